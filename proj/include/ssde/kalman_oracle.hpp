#ifndef SSDE_KALMAN_ORACLE_HPP
#define SSDE_KALMAN_ORACLE_HPP

#include <optional>
#include <vector>

#include "ssde/core.hpp"

namespace ssde {

/// Kalman-form backward filter beta(y, t) = N(x_stack | F(t) y + m(t), Sigma(t)).
///
/// The stacked dimension grows by n per observation, so this form is kept for
/// cross-checking the information filter only (at most kMaxObservations).
class KalmanBackwardOracle {
 public:
  static constexpr int kMaxObservations = 8;

  struct Block {
    Mat F;
    Vec m;
    Mat Sigma;
    Vec x;

    Eigen::Index rows() const { return m.size(); }
  };

  /// Value at t_l with any observation at t_l folded in.
  const Block& at(int l) const { return blocks_[static_cast<std::size_t>(l)]; }
  /// Right limit at t_l (differs from at(l) only at observation indices).
  const Block& right(int l) const;

  /// log beta(y, t_l); zero when no observation lies at or after t_l.
  double log_beta(int l, const Vec& y) const;
  /// grad_y log beta = F^T Sigma^{-1} (x - m) - F^T Sigma^{-1} F y.
  Vec gradient(int l, const Vec& y) const;
  /// Equivalent information parameters (F^T Sigma^{-1} F, F^T Sigma^{-1} (x - m)).
  std::pair<Mat, Vec> information(int l) const;

 private:
  friend KalmanBackwardOracle run_kalman_backward_oracle(const MjpPath&, const std::vector<ModeDynamics>&,
                                                         const ObservationSet&, const Mat&, const TimeGrid&);
  int dim_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::optional<Block>> right_;
};

/// Integrates dF/dt = -F A, dm/dt = -F b, dSigma/dt = -F D F^T backward with RK4
/// (one step per cell, mode at the left endpoint) and stacks
/// F <- [I; F], m <- [0; m], Sigma <- diag(Sigma_x, Sigma) at each observation.
KalmanBackwardOracle run_kalman_backward_oracle(const MjpPath& z, const std::vector<ModeDynamics>& modes,
                                                const ObservationSet& obs, const Mat& Sigma_x, const TimeGrid& grid);

}  // namespace ssde

#endif  // SSDE_KALMAN_ORACLE_HPP
