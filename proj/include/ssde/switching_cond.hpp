#ifndef SSDE_SWITCHING_COND_HPP
#define SSDE_SWITCHING_COND_HPP

#include <vector>

#include "ssde/core.hpp"
#include "ssde/rng.hpp"

namespace ssde {

/// Filtering distribution p_f(., t_l) of the mode given y on [0, t_l]; column l.
struct FilterTrajectory {
  Mat p;

  int modes() const { return static_cast<int>(p.rows()); }
  int points() const { return static_cast<int>(p.cols()); }
  auto at(int l) const { return p.col(l); }
};

/// Euler step of the Kushner-Stratonovich equation driven by the increments of y:
///   p(z) += sum_z' L(z', z) p(z') h + p(z) (f_z - f_bar)^T D_z^{-1} (dy - f_bar h),
/// followed by clamping at zero and renormalization. p_0 = pi.
FilterTrajectory run_ks_filter(const DiffusionPath& y, const std::vector<ModeDynamics>& modes,
                               const RateMatrix& rates, const Vec& pi, const TimeGrid& grid);

/// Floor for filter probabilities in backward-rate denominators.
inline constexpr double kBackwardRateFloor = 1e-12;

/// Rates of the time-reversed conditional MJP at one time point:
/// R(a, c) = p_f(c) L(c, a) / max(p_f(a), eps) is the rate of moving, backward
/// in time, from current mode a to earlier mode c; R(a, a) = -sum_c R(a, c).
Mat backward_rates(const Vec& p_f, const RateMatrix& rates);

struct ThinningOptions {
  int window = 64;       // lookahead window in grid cells
  double safety = 1.2;   // multiplier on the window's maximum exit rate
};

/// z(T) ~ Cat(p_f(., T)), then backward simulation by thinning with rates
/// piecewise constant per cell (evaluated at the cell's earlier endpoint).
MjpPath sample_conditional_switching(const FilterTrajectory& ft, const RateMatrix& rates, const TimeGrid& grid,
                                     Rng& rng, const ThinningOptions& options = {});

}  // namespace ssde

#endif  // SSDE_SWITCHING_COND_HPP
