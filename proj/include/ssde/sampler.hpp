#ifndef SSDE_SAMPLER_HPP
#define SSDE_SAMPLER_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssde/core.hpp"
#include "ssde/rng.hpp"
#include "ssde/switching_cond.hpp"

namespace ssde {

/// Current (z, y, theta) of one chain plus per-mode MALA step sizes.
struct GibbsState {
  MjpPath z;
  DiffusionPath y;
  ModelParams params;
  std::vector<double> mala_step;
  std::vector<int> mala_accepted;  // flags from the last sweep, per mode
  int sweep = 0;
};

struct SweepOptions {
  bool update_params = true;
  /// Robbins-Monro adaptation of the MALA step towards kTargetAcceptance.
  bool adapt_mala = false;
  ThinningOptions thinning;
};

inline constexpr double kTargetAcceptance = 0.57;

/// One blocked sweep in the fixed order: information filter given z, posterior
/// diffusion draw, Kushner-Stratonovich filter given the new y, backward
/// switching draw, then parameters (pi, mu0/Sigma0, rates, drift and dispersion
/// per mode, Sigma_x) given the new paths.
GibbsState gibbs_sweep(const GibbsState& state, const ObservationSet& obs, const PriorHyperparams& hyper,
                       const TimeGrid& grid, Rng& rng, const SweepOptions& options = {});

struct SamplerConfig {
  int num_samples = 1000;
  /// Negative means 10% of num_samples.
  int burn_in = -1;
  int thin = 1;
  std::uint64_t seed = 0;
  /// Keep every stride-th grid point of retained y paths.
  int stride = 1;
  bool update_params = true;
  bool store_paths = true;
  ThinningOptions thinning;

  int effective_burn_in() const { return burn_in < 0 ? num_samples / 10 : burn_in; }
  int retained_count() const { return std::max(0, (num_samples - effective_burn_in()) / thin); }
  void validate() const;
};

/// One retained parameter draw with its bookkeeping.
struct ParamRecord {
  int sweep = 0;
  ModelParams params;
  std::vector<int> mala_accepted;
  double sweep_seconds = 0.0;
};

/// Retained draws. z paths are kept in jump form, y at every stride-th grid point.
struct SampleStore {
  std::vector<ParamRecord> records;
  std::vector<MjpPath> z_paths;
  std::vector<Mat> y_paths;
  int num_samples = 0;
  int burn_in = 0;
  int thin = 1;
  int stride = 1;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
};

struct Diagnostics {
  std::vector<std::pair<std::string, double>> ess;
  double mala_acceptance = 0.0;
  double mean_sweep_seconds = 0.0;
  double total_seconds = 0.0;
  int retained = 0;
};

/// Named scalar parameters in a fixed order (rates, A, b, D, pi, mu0, Sigma0, Sigma_x).
std::vector<std::pair<std::string, double>> scalar_parameters(const ModelParams& params);

/// Batch-means effective sample size with batch size floor(sqrt(n)), clamped to (0, n].
double ess_batch_means(std::span<const double> trace);

/// Per-record scalar traces, MALA flags and timings in column form.
struct TraceTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> traces;  // one per name
  std::vector<std::vector<int>> mala_flags;  // one per record
  std::vector<double> sweep_seconds;         // one per record

  void append(const std::vector<std::pair<std::string, double>>& scalars, const std::vector<int>& flags,
              double seconds);
  std::size_t size() const { return sweep_seconds.size(); }
};

Diagnostics compute_diagnostics(const TraceTable& table);
Diagnostics compute_diagnostics(std::span<const ParamRecord> records);

/// Initial chain state and prior hyperparameters.
struct SamplerSetup {
  PriorHyperparams hyper;
  GibbsState initial;
};

/// Setup from the k-means empirical initializer.
SamplerSetup empirical_setup(const ObservationSet& obs, const TimeGrid& grid, int num_modes, std::uint64_t seed);

/// Setup that starts from given parameters and paths (used with update_params = false).
SamplerSetup fixed_setup(const ModelParams& params, const PriorHyperparams& hyper, MjpPath z, DiffusionPath y);

struct SamplerResult {
  SampleStore store;
  Diagnostics diagnostics;
  GibbsState final_state;
};

/// Runs config.num_samples sweeps, adapting MALA during burn-in only, and
/// retains every thin-th post-burn-in draw.
SamplerResult run_sampler(const SamplerConfig& config, const ObservationSet& obs, const TimeGrid& grid,
                          const SamplerSetup& setup, const std::function<void(int)>& progress = {});

struct EmpiricalMarginals {
  std::vector<double> z_times;  // every grid point
  Mat z_prob;                   // K x points
  std::vector<double> y_times;  // stored (strided) grid points
  Mat y_mean;                   // n x points
  Mat y_q05;
  Mat y_q95;
};

EmpiricalMarginals empirical_marginals(const SampleStore& store, const TimeGrid& grid, int num_modes);

/// Linear-interpolation sample quantile (type 7).
double sample_quantile(std::vector<double> values, double q);

}  // namespace ssde

#endif  // SSDE_SAMPLER_HPP
