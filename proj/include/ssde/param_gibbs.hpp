#ifndef SSDE_PARAM_GIBBS_HPP
#define SSDE_PARAM_GIBBS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "ssde/core.hpp"
#include "ssde/rng.hpp"

namespace ssde {

// ---------------------------------------------------------------------------
// MJP initial law and rates

/// Transition counts N(z, z') (zero diagonal) and cumulative sojourn T_z.
struct MjpStats {
  Mat counts;
  Vec sojourn;
};

MjpStats mjp_sufficient_stats(const MjpPath& z, int num_modes);

/// Gamma posterior of the off-diagonal rates: shape(z, z') = s + N(z, z')
/// (zero diagonal), rate(z) = r + T_z.
struct RatePosterior {
  Mat shape;
  Vec rate;
};

RatePosterior rate_posterior(double s, double r, const MjpStats& stats);

/// Each off-diagonal rate ~ Gamma(s + N(z, z'), r + T_z) independently.
RateMatrix update_rates(double s, double r, const MjpStats& stats, Rng& rng);

/// Dirichlet parameters alpha + e_{z0}.
Vec initial_mode_posterior(const Vec& alpha, int z0);

/// pi ~ Dirichlet(alpha + e_{z0}).
Vec update_initial_mode(const Vec& alpha, int z0, Rng& rng);

// ---------------------------------------------------------------------------
// Initial state law

/// Normal-inverse-Wishart: mu0 | Sigma0 ~ N(eta, Sigma0 / lambda), Sigma0 ~ IW(Psi, kappa).
struct NiwParams {
  Vec eta;
  double lambda = 1.0;
  Mat Psi;
  double kappa = 0.0;
};

/// Single-datum conjugate update with y0.
NiwParams niw_posterior(const NiwParams& prior, const Vec& y0);

/// Draws (mu0, Sigma0) from niw_posterior(prior, y0).
std::pair<Vec, Mat> update_initial_state(const NiwParams& prior, const Vec& y0, Rng& rng);

// ---------------------------------------------------------------------------
// Drift

/// Per-mode products over grid cells whose left endpoint is in mode z:
/// dY_Ybar = sum_l dy_l ybar_l^T, Ybar_Ybar = h sum_l ybar_l ybar_l^T, ybar = [y; 1].
struct DriftStats {
  std::vector<Mat> dY_Ybar;
  std::vector<Mat> Ybar_Ybar;
  std::vector<int> steps;
};

DriftStats drift_sufficient_stats(const MjpPath& z, const DiffusionPath& y, const TimeGrid& grid, int num_modes);

struct MatrixNormalPosterior {
  Mat M;
  Mat K;
};

/// K~ = Ybar Ybar^T + K, M~ = (dY Ybar^T + M K) K~^{-1}.
MatrixNormalPosterior drift_posterior(const Mat& M, const Mat& K, const Mat& dY_Ybar, const Mat& Ybar_Ybar);

/// Draws Gamma_z = [A, b] ~ MN(M~, D_z, K~^{-1}).
Mat update_drift(const Mat& M, const Mat& K, const Mat& D, const Mat& dY_Ybar, const Mat& Ybar_Ybar, Rng& rng);

/// Discretized Girsanov log-likelihood
/// sum_l [ f^T D^{-1} dy_l - f^T D^{-1} f h / 2 ] with f = A(z_l) y_l + b(z_l).
double girsanov_loglik(const MjpPath& z, const DiffusionPath& y, const std::vector<ModeDynamics>& modes,
                       const TimeGrid& grid);

/// sum_l log N(dy_l | f h, D h), the Euler transition log-density of the path.
double transition_loglik(const MjpPath& z, const DiffusionPath& y, const std::vector<ModeDynamics>& modes,
                         const TimeGrid& grid);

// ---------------------------------------------------------------------------
// Dispersion (MALA in log-Cholesky coordinates)

/// Residual scatter sum_l (dy_l - f h)(dy_l - f h)^T / h over the steps of one mode.
struct DispersionStats {
  Mat scatter;
  int steps = 0;
};

DispersionStats dispersion_stats(const MjpPath& z, const DiffusionPath& y, const ModeDynamics& mode, int mode_index,
                                 const TimeGrid& grid);

/// Log posterior of D = L L^T in theta coordinates (lower triangle of L,
/// column-major, with the diagonal log-transformed), up to a constant:
/// Gaussian-transition likelihood x IW(Psi, lambda) prior x Jacobian of theta -> D.
class DispersionTarget {
 public:
  DispersionTarget(DispersionStats stats, Mat Psi, double lambda);

  int dim() const { return static_cast<int>(Psi_.rows()); }
  double log_density(const Vec& theta) const;
  Vec gradient(const Vec& theta) const;

  static Vec to_theta(const Mat& D);
  static Mat to_covariance(const Vec& theta);

 private:
  Mat B_;          // scatter + Psi
  double c_;       // steps + lambda + n + 1
  Mat Psi_;
};

/// log q(to | from) for the MALA proposal N(from + xi grad(from), 2 xi I).
double mala_log_proposal(const DispersionTarget& target, const Vec& from, const Vec& to, double xi);

/// Metropolis-Hastings acceptance probability min(1, ratio) for from -> to.
double mala_acceptance(const DispersionTarget& target, const Vec& from, const Vec& to, double xi);

struct MalaResult {
  Mat D;
  bool accepted = false;
};

/// One MALA step for the dispersion of `mode_index` given the paths and the
/// current drift of that mode. xi == 0 returns the current value as accepted.
MalaResult mala_update_dispersion(const ModeDynamics& mode, int mode_index, const MjpPath& z, const DiffusionPath& y,
                                  const TimeGrid& grid, const Mat& Psi_D, double lambda_D, double xi, Rng& rng);

// ---------------------------------------------------------------------------
// Observation covariance

struct InverseWishartParams {
  Mat Psi;
  double dof = 0.0;
};

/// IW(Psi_x + sum_i r_i r_i^T, lambda_x + N); residuals are columns.
InverseWishartParams obs_cov_posterior(const Mat& Psi_x, double lambda_x, const Mat& residuals);

/// Sigma_x ~ obs_cov_posterior(Psi_x, lambda_x, residuals).
Mat update_obs_cov(const Mat& Psi_x, double lambda_x, const Mat& residuals, Rng& rng);

// ---------------------------------------------------------------------------
// Empirical initialization

struct KMeansResult {
  Mat centers;              // n x K, ordered by first coordinate
  std::vector<int> labels;  // per point
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs.
KMeansResult kmeans(const Mat& points, int k, int restarts, Rng& rng);

struct EmpiricalInit {
  PriorHyperparams hyper;
  MjpPath z;
  DiffusionPath y;
  ModelParams params;
  KMeansResult clusters;
  int transitions = 0;
};

/// Hyperparameters, initial paths and initial parameters from k-means on the
/// observations (K clusters, 20 restarts).
EmpiricalInit empirical_hyperparams(const ObservationSet& obs, int num_modes, const TimeGrid& grid,
                                    std::uint64_t seed);

}  // namespace ssde

#endif  // SSDE_PARAM_GIBBS_HPP
