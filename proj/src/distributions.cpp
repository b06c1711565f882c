#include "ssde/distributions.hpp"

#include <cmath>
#include <numbers>

namespace ssde {

Vec sample_gaussian(const Vec& mean, const Mat& cov, Rng& rng) {
  const Mat L = spd_sqrt(cov, "gaussian covariance");
  return mean + L * rng.normal_vector(mean.size());
}

Vec sample_dirichlet(const Vec& alpha, Rng& rng) {
  Vec g(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) g[k] = rng.gamma(alpha[k], 1.0);
  return g / g.sum();
}

Mat sample_wishart(const Mat& scale, double dof, Rng& rng) {
  const Eigen::Index n = scale.rows();
  const Mat L = spd_sqrt(scale, "wishart scale");
  Mat B = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // chi^2_k = Gamma(k/2, rate 1/2)
    B(i, i) = std::sqrt(rng.gamma(0.5 * (dof - static_cast<double>(i)), 0.5));
    for (Eigen::Index j = 0; j < i; ++j) B(i, j) = rng.normal();
  }
  const Mat LB = L * B;
  return symmetrized(LB * LB.transpose());
}

Mat sample_inverse_wishart(const Mat& Psi, double dof, Rng& rng) {
  const Mat W = sample_wishart(spd_inverse(Psi, "inverse-wishart scale"), dof, rng);
  return spd_inverse(W, "wishart draw");
}

double inverse_wishart_logpdf(const Mat& S, const Mat& Psi, double dof) {
  const double n = static_cast<double>(S.rows());
  const auto llt_s = spd_cholesky(S, "inverse-wishart argument");
  const auto llt_p = spd_cholesky(Psi, "inverse-wishart scale");
  const double logdet_s = 2.0 * Mat(llt_s.matrixL()).diagonal().array().log().sum();
  const double logdet_p = 2.0 * Mat(llt_p.matrixL()).diagonal().array().log().sum();
  double log_mvgamma = 0.25 * n * (n - 1.0) * std::log(std::numbers::pi);
  for (int j = 0; j < static_cast<int>(n); ++j) log_mvgamma += std::lgamma(0.5 * (dof - j));
  const double tr = (llt_s.solve(Psi)).trace();
  return 0.5 * dof * logdet_p - 0.5 * dof * n * std::log(2.0) - log_mvgamma -
         0.5 * (dof + n + 1.0) * logdet_s - 0.5 * tr;
}

Mat sample_matrix_normal(const Mat& mean, const Mat& row_cov, const Mat& col_cov, Rng& rng) {
  const Mat Lr = spd_sqrt(row_cov, "matrix-normal row covariance");
  const Mat Lc = spd_sqrt(col_cov, "matrix-normal column covariance");
  Mat E(mean.rows(), mean.cols());
  for (Eigen::Index j = 0; j < E.cols(); ++j)
    for (Eigen::Index i = 0; i < E.rows(); ++i) E(i, j) = rng.normal();
  return mean + Lr * E * Lc.transpose();
}

double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& cov) {
  const auto llt = spd_cholesky(cov, "gaussian covariance");
  const Vec r = x - mean;
  const Vec w = llt.matrixL().solve(r);
  const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * (w.squaredNorm() + logdet + static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

}  // namespace ssde
