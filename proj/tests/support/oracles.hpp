#ifndef SSDE_TESTS_ORACLES_HPP
#define SSDE_TESTS_ORACLES_HPP

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's filters or samplers.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// --- Statistical tests -------------------------------------------------------

/// Asymptotic Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_tail(double lambda);

/// One-sample KS p-value against a continuous CDF (Stephens' small-sample correction).
double ks_one_sample_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Two-sample KS p-value.
double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b);

/// Upper tail of the chi-squared distribution.
double chi2_upper_tail(double statistic, double dof);

/// Chi-squared homogeneity test on a 2 x K contingency table; empty categories are dropped.
double chi2_homogeneity_pvalue(const std::vector<double>& counts_a, const std::vector<double>& counts_b);

/// Chi-squared goodness of fit of observed counts against probabilities.
double chi2_gof_pvalue(const std::vector<double>& counts, const std::vector<double>& probs);

// --- Linear-Gaussian references ----------------------------------------------

struct SmootherResult {
  std::vector<Vec> mean;  // per grid point
  std::vector<Mat> cov;
};

/// Rauch-Tung-Striebel smoother for the Euler-discretized single-mode model
/// y_{l+1} = y_l + (A y_l + b) h + N(0, D h), y_0 ~ N(mu0, Sigma0),
/// x_i = y_{idx_i} + N(0, Sigma_x).
SmootherResult rts_smoother(const Mat& A, const Vec& b, const Mat& D, const Mat& Sigma_x, const Vec& mu0,
                            const Mat& Sigma0, double h, int steps, const std::vector<int>& obs_idx,
                            const std::vector<Vec>& obs_values);

/// Prior moments at time t: dm/dt = A m + b, dP/dt = A P + P A^T + D, via RK4 with n_steps.
std::pair<Vec, Mat> prior_moments(const Mat& A, const Vec& b, const Mat& D, const Vec& mu0, const Mat& Sigma0,
                                  double t, int n_steps);

// --- Hidden Markov references -------------------------------------------------

/// Matrix exponential (Pade via Eigen's MatrixFunctions).
Mat expm(const Mat& m);

/// Exact discrete forward filter for modes with state-independent drift b(z) and
/// shared D: transition exp(Lambda h), emission N(dy_l; b(z) h, D h).
/// Row l is the posterior over z(t_l) given dy_0..dy_{l-1}. `rates` is the full generator.
Mat hmm_forward_filter(const std::vector<Vec>& increments, const std::vector<Vec>& drifts, const Mat& D,
                       const Mat& rates, const Vec& pi, double h);

/// Marginals of the backward-time chain started at p_f(T) whose rate from a to c
/// in cell l is p_f(c, t_l) Lambda(c, a) / max(p_f(a, t_l), 1e-12); RK4 with
/// `substeps` per cell. Column l is the marginal at t_l.
Mat backward_master_marginals(const Mat& p_f, const Mat& rates, double h, int substeps);

// --- MCMC ---------------------------------------------------------------------

/// Batch-means ESS with batch size floor(sqrt(n)); written independently of the library.
double batch_means_ess(const std::vector<double>& trace);

}  // namespace oracle

#endif  // SSDE_TESTS_ORACLES_HPP
