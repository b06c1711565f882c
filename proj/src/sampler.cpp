#include "ssde/sampler.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "ssde/diffusion_cond.hpp"
#include "ssde/errors.hpp"
#include "ssde/log.hpp"
#include "ssde/param_gibbs.hpp"

namespace ssde {

namespace {

template <typename E>
[[noreturn]] void rethrow_with_sweep(const E& e, int sweep) {
  throw E("sweep " + std::to_string(sweep) + ": " + e.what());
}

void update_parameters(GibbsState& next, const ObservationSet& obs, const PriorHyperparams& hyper,
                       const TimeGrid& grid, Rng& rng, bool adapt) {
  auto& p = next.params;
  const int K = p.num_modes();

  p.init.pi = update_initial_mode(hyper.alpha, next.z.initial_mode(), rng);
  auto [mu0, Sigma0] =
      update_initial_state(NiwParams{hyper.eta, hyper.lambda, hyper.Psi, hyper.kappa}, next.y.at(0), rng);
  p.init.mu0 = std::move(mu0);
  p.init.Sigma0 = std::move(Sigma0);

  p.rates = update_rates(hyper.s, hyper.r, mjp_sufficient_stats(next.z, K), rng);

  const auto drift = drift_sufficient_stats(next.z, next.y, grid, K);
  const Eigen::Index n = p.dim();
  for (int m = 0; m < K; ++m) {
    auto& mode = p.modes[static_cast<std::size_t>(m)];
    const Mat gamma = update_drift(hyper.M[static_cast<std::size_t>(m)], hyper.K[static_cast<std::size_t>(m)],
                                   mode.D(), drift.dY_Ybar[static_cast<std::size_t>(m)],
                                   drift.Ybar_Ybar[static_cast<std::size_t>(m)], rng);
    mode = ModeDynamics(gamma.leftCols(n), gamma.col(n), mode.Q());

    double& xi = next.mala_step[static_cast<std::size_t>(m)];
    auto result = mala_update_dispersion(mode, m, next.z, next.y, grid, hyper.Psi_D[static_cast<std::size_t>(m)],
                                         hyper.lambda_D[static_cast<std::size_t>(m)], xi, rng);
    next.mala_accepted[static_cast<std::size_t>(m)] = result.accepted ? 1 : 0;
    if (result.accepted) mode = ModeDynamics::from_covariance(mode.A(), mode.b(), result.D);
    if (adapt) {
      const double gain = std::pow(static_cast<double>(next.sweep) + 1.0, -0.6);
      xi *= std::exp(gain * ((result.accepted ? 1.0 : 0.0) - kTargetAcceptance));
    }
  }

  if (obs.size() > 0) {
    const auto idx = obs.grid_indices(grid);
    Mat residuals(n, obs.size());
    for (int i = 0; i < obs.size(); ++i) {
      residuals.col(i) = obs.values.col(i) - next.y.at(idx[static_cast<std::size_t>(i)]);
    }
    p.obs.Sigma_x = update_obs_cov(hyper.Psi_x, hyper.lambda_x, residuals, rng);
  } else {
    p.obs.Sigma_x = update_obs_cov(hyper.Psi_x, hyper.lambda_x, Mat(n, 0), rng);
  }
}

}  // namespace

GibbsState gibbs_sweep(const GibbsState& state, const ObservationSet& obs, const PriorHyperparams& hyper,
                       const TimeGrid& grid, Rng& rng, const SweepOptions& options) {
  try {
    GibbsState next = state;
    const auto& p = state.params;
    const auto info = run_information_filter(state.z, p.modes, obs, p.obs.Sigma_x, grid);
    next.y = sample_conditional_diffusion(state.z, info, p.modes, p.init, grid, rng);
    const auto filter = run_ks_filter(next.y, p.modes, p.rates, p.init.pi, grid);
    next.z = sample_conditional_switching(filter, p.rates, grid, rng, options.thinning);
    if (next.mala_step.size() != p.modes.size()) next.mala_step.assign(p.modes.size(), hyper.xi);
    next.mala_accepted.assign(p.modes.size(), 0);
    if (options.update_params) update_parameters(next, obs, hyper, grid, rng, options.adapt_mala);
    ++next.sweep;
    return next;
  } catch (const NumericalError& e) {
    rethrow_with_sweep(e, state.sweep);
  } catch (const ValidationError& e) {
    rethrow_with_sweep(e, state.sweep);
  }
}

void SamplerConfig::validate() const {
  if (num_samples <= 0) throw ValidationError("sampler: number of samples must be positive");
  if (effective_burn_in() >= num_samples) throw ValidationError("sampler: burn-in must be smaller than samples");
  if (thin < 1) throw ValidationError("sampler: thinning interval must be >= 1");
  if (stride < 1) throw ValidationError("sampler: stride must be >= 1");
}

SamplerSetup empirical_setup(const ObservationSet& obs, const TimeGrid& grid, int num_modes, std::uint64_t seed) {
  auto init = empirical_hyperparams(obs, num_modes, grid, seed);
  SamplerSetup setup;
  setup.initial.z = std::move(init.z);
  setup.initial.y = std::move(init.y);
  setup.initial.params = std::move(init.params);
  setup.initial.mala_step.assign(static_cast<std::size_t>(num_modes), init.hyper.xi);
  setup.initial.mala_accepted.assign(static_cast<std::size_t>(num_modes), 0);
  setup.hyper = std::move(init.hyper);
  return setup;
}

SamplerSetup fixed_setup(const ModelParams& params, const PriorHyperparams& hyper, MjpPath z, DiffusionPath y) {
  SamplerSetup setup;
  setup.hyper = hyper;
  setup.initial.z = std::move(z);
  setup.initial.y = std::move(y);
  setup.initial.params = params;
  setup.initial.mala_step.assign(params.modes.size(), hyper.xi);
  setup.initial.mala_accepted.assign(params.modes.size(), 0);
  return setup;
}

SamplerResult run_sampler(const SamplerConfig& config, const ObservationSet& obs, const TimeGrid& grid,
                          const SamplerSetup& setup, const std::function<void(int)>& progress) {
  config.validate();
  validate_params(setup.initial.params);
  obs.validate(grid);
  if (config.update_params) setup.hyper.validate();

  SamplerResult result;
  auto& store = result.store;
  store.num_samples = config.num_samples;
  store.burn_in = config.effective_burn_in();
  store.thin = config.thin;
  store.stride = config.stride;
  store.seed = config.seed;

  Rng rng(config.seed);
  GibbsState state = setup.initial;
  state.sweep = 0;
  const int burn_in = config.effective_burn_in();
  const auto t_start = std::chrono::steady_clock::now();
  for (int i = 0; i < config.num_samples; ++i) {
    SweepOptions options;
    options.update_params = config.update_params;
    options.adapt_mala = i < burn_in;
    options.thinning = config.thinning;
    const auto t0 = std::chrono::steady_clock::now();
    state = gibbs_sweep(state, obs, setup.hyper, grid, rng, options);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (i >= burn_in && (i - burn_in + 1) % config.thin == 0) {
      store.records.push_back(ParamRecord{i, state.params, state.mala_accepted, seconds});
      if (config.store_paths) {
        store.z_paths.push_back(state.z);
        if (config.stride == 1) {
          store.y_paths.push_back(state.y.values);
        } else {
          const Eigen::Index cols = (state.y.points() - 1) / config.stride + 1;
          Mat ys(state.y.dim(), cols);
          for (Eigen::Index c = 0; c < cols; ++c) ys.col(c) = state.y.values.col(c * config.stride);
          store.y_paths.push_back(std::move(ys));
        }
      }
    }
    if (progress) progress(i);
    if ((i + 1) % 1000 == 0) log::debug("completed sweep " + std::to_string(i + 1));
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  log::info("sampler finished " + std::to_string(config.num_samples) + " sweeps in " + std::to_string(total) + " s");
  result.diagnostics = compute_diagnostics(store.records);
  result.final_state = std::move(state);
  return result;
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

EmpiricalMarginals empirical_marginals(const SampleStore& store, const TimeGrid& grid, int num_modes) {
  if (store.z_paths.empty() || store.y_paths.empty()) throw ValidationError("empirical marginals: empty sample store");
  EmpiricalMarginals out;
  const double draws = static_cast<double>(store.z_paths.size());
  out.z_prob = Mat::Zero(num_modes, grid.points());
  for (int l = 0; l < grid.points(); ++l) out.z_times.push_back(grid.time(l));
  for (const auto& z : store.z_paths) {
    const auto modes = z.on_grid(grid);
    for (int l = 0; l < grid.points(); ++l) out.z_prob(modes[static_cast<std::size_t>(l)], l) += 1.0;
  }
  out.z_prob /= draws;

  const auto n = store.y_paths.front().rows();
  const auto cols = store.y_paths.front().cols();
  out.y_mean = Mat::Zero(n, cols);
  out.y_q05.resize(n, cols);
  out.y_q95.resize(n, cols);
  for (Eigen::Index c = 0; c < cols; ++c) out.y_times.push_back(grid.time(static_cast<int>(c) * store.stride));
  std::vector<double> column(store.y_paths.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double sum = 0.0;
      for (std::size_t d = 0; d < store.y_paths.size(); ++d) {
        column[d] = store.y_paths[d](i, c);
        sum += column[d];
      }
      out.y_mean(i, c) = sum / static_cast<double>(column.size());
      out.y_q05(i, c) = sample_quantile(column, 0.05);
      out.y_q95(i, c) = sample_quantile(column, 0.95);
    }
  }
  return out;
}

}  // namespace ssde
