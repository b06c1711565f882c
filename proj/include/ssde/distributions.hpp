#ifndef SSDE_DISTRIBUTIONS_HPP
#define SSDE_DISTRIBUTIONS_HPP

#include "ssde/linalg.hpp"
#include "ssde/rng.hpp"

namespace ssde {

/// x ~ N(mean, cov).
Vec sample_gaussian(const Vec& mean, const Mat& cov, Rng& rng);

/// pi ~ Dirichlet(alpha) via normalized Gamma draws.
Vec sample_dirichlet(const Vec& alpha, Rng& rng);

/// W ~ Wishart(scale, dof) by the Bartlett decomposition.
Mat sample_wishart(const Mat& scale, double dof, Rng& rng);

/// S ~ IW(Psi, dof), i.e. S^{-1} ~ Wishart(Psi^{-1}, dof). Mean Psi / (dof - n - 1).
Mat sample_inverse_wishart(const Mat& Psi, double dof, Rng& rng);

/// log IW(S | Psi, dof) including the normalizer.
double inverse_wishart_logpdf(const Mat& S, const Mat& Psi, double dof);

/// G ~ MN(mean, row_cov, col_cov): G = mean + chol(row_cov) E chol(col_cov)^T.
Mat sample_matrix_normal(const Mat& mean, const Mat& row_cov, const Mat& col_cov, Rng& rng);

/// log N(x | mean, cov).
double gaussian_logpdf(const Vec& x, const Vec& mean, const Mat& cov);

}  // namespace ssde

#endif  // SSDE_DISTRIBUTIONS_HPP
