#include "ssde/switching_cond.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssde/errors.hpp"

namespace ssde {

FilterTrajectory run_ks_filter(const DiffusionPath& y, const std::vector<ModeDynamics>& modes,
                               const RateMatrix& rates, const Vec& pi, const TimeGrid& grid) {
  const int K = rates.modes();
  const Eigen::Index n = y.dim();
  const double h = grid.step();
  FilterTrajectory ft{Mat(K, grid.points())};
  Vec p = pi / pi.sum();
  ft.p.col(0) = p;
  if (K == 1) {
    ft.p.setOnes();
    return ft;
  }

  const Mat gen_t = rates.matrix().transpose();
  Mat f(n, K);
  Vec fbar(n), dy(n), innov(n), next(K);
  for (int l = 0; l < grid.steps(); ++l) {
    const auto yl = y.at(l);
    for (int z = 0; z < K; ++z) {
      f.col(z).noalias() = modes[static_cast<std::size_t>(z)].A() * yl;
      f.col(z) += modes[static_cast<std::size_t>(z)].b();
    }
    fbar.noalias() = f * p;
    dy = y.at(l + 1) - yl;
    innov = dy - fbar * h;
    next.noalias() = h * (gen_t * p);
    next += p;
    for (int z = 0; z < K; ++z) {
      const auto& Dinv = modes[static_cast<std::size_t>(z)].D_inverse();
      next[z] += p[z] * (f.col(z) - fbar).dot(Dinv * innov);
    }
    next = next.cwiseMax(0.0);
    const double total = next.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericalError("Kushner-Stratonovich filter degenerate at grid index " + std::to_string(l + 1) +
                           " (reduce the step size or check the model)");
    }
    p = next / total;
    ft.p.col(l + 1) = p;
  }
  return ft;
}

Mat backward_rates(const Vec& p_f, const RateMatrix& rates) {
  const int K = rates.modes();
  Mat out = Mat::Zero(K, K);
  for (int a = 0; a < K; ++a) {
    const double denom = std::max(p_f[a], kBackwardRateFloor);
    double exit = 0.0;
    for (int c = 0; c < K; ++c) {
      if (c == a) continue;
      out(a, c) = p_f[c] * rates(c, a) / denom;
      exit += out(a, c);
    }
    out(a, a) = -exit;
  }
  return out;
}

namespace {

// Backward exit rate and jump weights of mode a in cell l, from p_f(t_l).
double exit_rate_in_cell(const FilterTrajectory& ft, const RateMatrix& rates, int l, int a) {
  const auto p = ft.at(l);
  const double denom = std::max(p[a], kBackwardRateFloor);
  double exit = 0.0;
  for (int c = 0; c < rates.modes(); ++c) {
    if (c != a) exit += p[c] * rates(c, a);
  }
  return exit / denom;
}

}  // namespace

MjpPath sample_conditional_switching(const FilterTrajectory& ft, const RateMatrix& rates, const TimeGrid& grid,
                                     Rng& rng, const ThinningOptions& options) {
  const int K = rates.modes();
  const int L = grid.steps();
  const double h = grid.step();
  const double horizon = grid.horizon();

  const auto pT = ft.at(L);
  const int terminal = rng.categorical(std::span<const double>(pT.data(), static_cast<std::size_t>(K)));
  int z = terminal;
  // Collected backward in time: (jump time, earlier mode).
  std::vector<double> times;
  std::vector<int> earlier;
  std::vector<double> weights(static_cast<std::size_t>(K));

  double tau = horizon;
  while (tau > 0.0) {
    // Cell containing tau from the left: [t_l, t_{l+1}) with tau in (t_l, t_{l+1}].
    const int cell = std::clamp(static_cast<int>(std::ceil(tau / h - 1e-9)) - 1, 0, L - 1);
    // The window stops early at a cell whose rate would inflate the bound far
    // beyond the current cell's, so one sharp spike does not stall thinning.
    const double here = exit_rate_in_cell(ft, rates, cell, z);
    const double cap = std::max(4.0 * here, 1.0 / (options.window * h));
    int first = cell;
    double bound = here;
    while (first > 0 && first > cell - options.window + 1) {
      const double r = exit_rate_in_cell(ft, rates, first - 1, z);
      if (r > cap) break;
      bound = std::max(bound, r);
      --first;
    }
    bound *= options.safety;
    const double window_start = grid.time(first);
    if (!(bound > 0.0)) {
      tau = window_start;
      continue;
    }
    const double proposal = tau - rng.exponential(bound);
    if (proposal <= window_start) {
      tau = window_start;
      continue;
    }
    tau = proposal;
    const int l = std::clamp(static_cast<int>(std::floor(proposal / h)), first, cell);
    const double exit = exit_rate_in_cell(ft, rates, l, z);
    if (exit > bound * (1.0 + 1e-12)) {
      throw NumericalError("thinning bound violated at grid cell " + std::to_string(l));
    }
    if (rng.uniform() * bound >= exit) continue;
    const auto p = ft.at(l);
    for (int c = 0; c < K; ++c) weights[static_cast<std::size_t>(c)] = (c == z) ? 0.0 : p[c] * rates(c, z);
    const int prev = rng.categorical(weights);
    times.push_back(proposal);
    earlier.push_back(prev);
    z = prev;
  }

  // Backward jump k moved from the later mode to earlier[k]; reverse both lists.
  std::vector<double> jumps(times.rbegin(), times.rend());
  std::vector<int> states(earlier.rbegin(), earlier.rend());
  states.push_back(terminal);
  return MjpPath(std::move(jumps), std::move(states), horizon);
}

}  // namespace ssde
