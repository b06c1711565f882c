#ifndef SSDE_LINALG_HPP
#define SSDE_LINALG_HPP

#include <string_view>

#include <Eigen/Dense>

namespace ssde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky factorization of a matrix that must be SPD.
///
/// On failure a jitter of 1e-10 * trace(M) / n is added to the diagonal once;
/// a second failure throws ValidationError("<what>: not SPD").
Eigen::LLT<Mat> spd_cholesky(const Mat& m, std::string_view what);

/// True if `m` is symmetric (to 1e-9 relative) and its Cholesky succeeds
/// (with the same one-shot jitter rule as spd_cholesky).
bool is_spd(const Mat& m);

/// Inverse of an SPD matrix via Cholesky.
Mat spd_inverse(const Mat& m, std::string_view what);

/// Lower Cholesky factor of an SPD matrix.
Mat spd_sqrt(const Mat& m, std::string_view what);

/// Symmetric square root of a PSD matrix via eigendecomposition
/// (negative eigenvalues from roundoff are clamped to zero).
Mat psd_sqrt(const Mat& m);

}  // namespace ssde

#endif  // SSDE_LINALG_HPP
