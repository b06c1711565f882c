#ifndef SSDE_CORE_HPP
#define SSDE_CORE_HPP

#include <cstddef>
#include <vector>

#include "ssde/linalg.hpp"

namespace ssde {

/// Uniform simulation grid t_l = l * h, l = 0..L, with L * h = T.
///
/// The requested horizon is snapped to the nearest multiple of h.
class TimeGrid {
 public:
  TimeGrid(double horizon, double step);

  double horizon() const { return step_ * static_cast<double>(steps_); }
  double step() const { return step_; }
  /// Number of steps L; there are L + 1 grid points.
  int steps() const { return steps_; }
  int points() const { return steps_ + 1; }
  double time(int l) const { return step_ * static_cast<double>(l); }

  /// Index of the grid point within h/2 of t; throws ValidationError otherwise.
  int snap(double t) const;

 private:
  double step_;
  int steps_;
};

/// MJP generator. Off-diagonal entries are rates z -> z'; the diagonal holds
/// minus the exit rate.
class RateMatrix {
 public:
  RateMatrix() = default;
  /// Stores a full generator as given; call validate() before use.
  explicit RateMatrix(Mat full) : m_(std::move(full)) {}
  /// Builds the generator from its off-diagonal part (diagonal input ignored).
  static RateMatrix from_offdiagonal(const Mat& rates);

  int modes() const { return static_cast<int>(m_.rows()); }
  double operator()(int from, int to) const { return m_(from, to); }
  double exit_rate(int z) const { return -m_(z, z); }
  const Mat& matrix() const { return m_; }

  /// Throws ValidationError on negative off-diagonals or a row sum above 1e-12.
  void validate() const;

 private:
  Mat m_;
};

/// Affine drift A y + b and dispersion Q for one mode; D = Q Q^T is cached
/// with its inverse. Q = 0 (deterministic mode) is accepted for simulation;
/// D_inverse() and log_det_D() then throw because inference needs D SPD.
class ModeDynamics {
 public:
  ModeDynamics() = default;
  ModeDynamics(Mat A, Vec b, Mat Q);
  /// Builds the mode from a diffusion covariance; Q is its lower Cholesky factor.
  static ModeDynamics from_covariance(Mat A, Vec b, const Mat& D);

  int dim() const { return static_cast<int>(b_.size()); }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }
  const Mat& Q() const { return Q_; }
  const Mat& D() const { return D_; }
  const Mat& D_inverse() const {
    if (deterministic_) throw_singular();
    return D_inv_;
  }
  /// log det D.
  double log_det_D() const {
    if (deterministic_) throw_singular();
    return log_det_D_;
  }
  bool deterministic() const { return deterministic_; }

  Vec drift(const Vec& y) const { return A_ * y + b_; }

 private:
  Mat A_;
  Vec b_;
  Mat Q_;
  Mat D_;
  Mat D_inv_;
  double log_det_D_ = 0.0;
  bool deterministic_ = false;

  [[noreturn]] static void throw_singular();
};

struct InitialLaw {
  Vec pi;
  Vec mu0;
  Mat Sigma0;
};

struct ObservationModel {
  Mat Sigma_x;
};

struct ModelParams {
  RateMatrix rates;
  std::vector<ModeDynamics> modes;
  InitialLaw init;
  ObservationModel obs;

  int num_modes() const { return rates.modes(); }
  int dim() const { return static_cast<int>(init.mu0.size()); }
};

/// Throws ValidationError describing the first violated invariant.
void validate_params(const ModelParams& p);

/// Piecewise-constant mode trajectory on [0, T]: states[0] until jump_times[0],
/// states[k] on [jump_times[k-1], jump_times[k]).
class MjpPath {
 public:
  MjpPath() = default;
  MjpPath(std::vector<double> jump_times, std::vector<int> states, double horizon);
  static MjpPath constant(int mode, double horizon) { return MjpPath({}, {mode}, horizon); }

  double horizon() const { return horizon_; }
  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<int>& states() const { return states_; }
  std::size_t num_jumps() const { return jump_times_.size(); }
  int initial_mode() const { return states_.front(); }
  int final_mode() const { return states_.back(); }

  /// z(t), right-continuous at jump times.
  int mode_at(double t) const;
  /// z(t_l) for every grid point.
  std::vector<int> on_grid(const TimeGrid& grid) const;
  /// Length of each sojourn; sums to T.
  std::vector<double> sojourn_times() const;

  /// Throws ValidationError if states repeat, jumps are unordered or out of (0, T].
  void validate(int num_modes) const;

 private:
  std::vector<double> jump_times_;
  std::vector<int> states_;
  double horizon_ = 0.0;
};

/// Continuous state sampled at every grid point; column l is y(t_l).
struct DiffusionPath {
  Mat values;

  int dim() const { return static_cast<int>(values.rows()); }
  int points() const { return static_cast<int>(values.cols()); }
  auto at(int l) const { return values.col(l); }
};

/// Noisy observations x_i at strictly increasing times t_i; column i of `values`.
struct ObservationSet {
  std::vector<double> times;
  Mat values;

  int size() const { return static_cast<int>(times.size()); }
  int dim() const { return static_cast<int>(values.rows()); }

  /// Grid index for each observation (snapped to within h/2).
  std::vector<int> grid_indices(const TimeGrid& grid) const;
  void validate(const TimeGrid& grid) const;
};

/// Conjugate prior hyperparameters. Gamma uses (shape, rate); inverse-Wishart
/// IW(Psi, nu) has density ~ |S|^{-(nu+n+1)/2} exp(-tr(Psi S^{-1})/2).
struct PriorHyperparams {
  Vec alpha;                      // Dirichlet on pi
  Vec eta;                        // NIW mean
  double lambda = 1.0;            // NIW mean precision scaling
  Mat Psi;                        // NIW scale
  double kappa = 0.0;             // NIW degrees of freedom
  double s = 1.0;                 // Gamma shape for rates
  double r = 1.0;                 // Gamma rate for rates
  std::vector<Mat> M;             // Matrix-Normal mean of [A, b], per mode
  std::vector<Mat> K;             // Matrix-Normal column precision, per mode
  std::vector<Mat> Psi_D;         // IW scale for D_z
  std::vector<double> lambda_D;   // IW dof for D_z
  Mat Psi_x;                      // IW scale for Sigma_x
  double lambda_x = 0.0;          // IW dof for Sigma_x
  double xi = 1e-4;               // MALA step size

  int num_modes() const { return static_cast<int>(alpha.size()); }
  int dim() const { return static_cast<int>(eta.size()); }
  void validate() const;
};

}  // namespace ssde

#endif  // SSDE_CORE_HPP
