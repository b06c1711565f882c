#include "ssde/sim.hpp"

#include <cmath>
#include <string>

#include "ssde/distributions.hpp"
#include "ssde/errors.hpp"

namespace ssde {

MjpPath simulate_mjp(const RateMatrix& rates, const Vec& pi, double horizon, Rng& rng) {
  rates.validate();
  if (!(horizon > 0.0)) throw ValidationError("simulate_mjp: horizon must be positive");
  const int K = rates.modes();
  std::vector<double> jumps;
  std::vector<int> states{rng.categorical(pi)};
  std::vector<double> weights(static_cast<std::size_t>(K));
  double t = 0.0;
  for (;;) {
    const int z = states.back();
    const double exit = rates.exit_rate(z);
    if (!(exit > 0.0)) break;
    t += rng.exponential(exit);
    if (t >= horizon) break;
    for (int w = 0; w < K; ++w) weights[static_cast<std::size_t>(w)] = (w == z) ? 0.0 : rates(z, w);
    jumps.push_back(t);
    states.push_back(rng.categorical(weights));
  }
  return MjpPath(std::move(jumps), std::move(states), horizon);
}

DiffusionPath simulate_ssde(const MjpPath& z, const std::vector<ModeDynamics>& modes, const Vec& y0,
                            const TimeGrid& grid, Rng& rng) {
  const auto n = y0.size();
  if (!y0.allFinite()) throw ValidationError("simulate_ssde: non-finite initial state");
  const auto mode = z.on_grid(grid);
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  DiffusionPath path{Mat(n, grid.points())};
  path.values.col(0) = y0;
  Vec noise(n);
  for (int l = 0; l < grid.steps(); ++l) {
    const auto& m = modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])];
    for (Eigen::Index i = 0; i < n; ++i) noise[i] = rng.normal();
    const auto y = path.values.col(l);
    path.values.col(l + 1) = y + (m.A() * y + m.b()) * h + m.Q() * noise * sqrt_h;
    if (!path.values.col(l + 1).allFinite()) {
      throw NumericalError("simulate_ssde: non-finite state at grid index " + std::to_string(l + 1) +
                           " (reduce the step size)");
    }
  }
  return path;
}

ObservationSet generate_observations(const DiffusionPath& y, const TimeGrid& grid, const std::vector<double>& times,
                                     const Mat& Sigma_x, Rng& rng) {
  const auto n = y.dim();
  const Mat root = psd_sqrt(Sigma_x);
  ObservationSet obs{times, Mat(n, static_cast<Eigen::Index>(times.size()))};
  for (std::size_t i = 0; i < times.size(); ++i) {
    const int l = grid.snap(times[i]);
    obs.values.col(static_cast<Eigen::Index>(i)) = y.at(l) + root * rng.normal_vector(n);
  }
  obs.validate(grid);
  return obs;
}

SimulatedData simulate_model(const ModelParams& params, const TimeGrid& grid, const std::vector<double>& obs_times,
                             Rng& rng) {
  validate_params(params);
  auto z = simulate_mjp(params.rates, params.init.pi, grid.horizon(), rng);
  const Vec y0 = sample_gaussian(params.init.mu0, params.init.Sigma0, rng);
  auto y = simulate_ssde(z, params.modes, y0, grid, rng);
  auto obs = generate_observations(y, grid, obs_times, params.obs.Sigma_x, rng);
  return {std::move(z), std::move(y), std::move(obs)};
}

std::vector<double> equally_spaced_times(const TimeGrid& grid, int count) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    const double target = grid.horizon() * static_cast<double>(i) / static_cast<double>(count);
    times.push_back(grid.time(static_cast<int>(std::llround(target / grid.step()))));
  }
  return times;
}

}  // namespace ssde
