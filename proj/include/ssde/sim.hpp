#ifndef SSDE_SIM_HPP
#define SSDE_SIM_HPP

#include <vector>

#include "ssde/core.hpp"
#include "ssde/rng.hpp"

namespace ssde {

/// Exact MJP draw on [0, T] by the Doob-Gillespie algorithm.
MjpPath simulate_mjp(const RateMatrix& rates, const Vec& pi, double horizon, Rng& rng);

/// Euler-Maruyama on the grid with the mode taken at the left end of each step.
DiffusionPath simulate_ssde(const MjpPath& z, const std::vector<ModeDynamics>& modes, const Vec& y0,
                            const TimeGrid& grid, Rng& rng);

/// x_i = y(t_i) + noise, noise ~ N(0, Sigma_x). Sigma_x may be singular (including zero).
ObservationSet generate_observations(const DiffusionPath& y, const TimeGrid& grid, const std::vector<double>& times,
                                     const Mat& Sigma_x, Rng& rng);

struct SimulatedData {
  MjpPath z;
  DiffusionPath y;
  ObservationSet obs;
};

/// Full generative draw: z, y(0) ~ N(mu0, Sigma0), the diffusion, then observations.
SimulatedData simulate_model(const ModelParams& params, const TimeGrid& grid, const std::vector<double>& obs_times,
                             Rng& rng);

/// `count` observation times equally spaced on (0, T], snapped to the grid.
std::vector<double> equally_spaced_times(const TimeGrid& grid, int count);

}  // namespace ssde

#endif  // SSDE_SIM_HPP
