#include "ssde/linalg.hpp"

#include <cmath>
#include <string>

#include "ssde/errors.hpp"

namespace ssde {

namespace {

bool symmetric_enough(const Mat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale;
}

bool try_cholesky(const Mat& m, Eigen::LLT<Mat>& out) {
  if (m.rows() == 0 || m.rows() != m.cols() || !m.allFinite()) return false;
  if (!symmetric_enough(m)) return false;
  out.compute(m);
  if (out.info() == Eigen::Success) return true;
  const double jitter = 1e-10 * m.trace() / static_cast<double>(m.rows());
  if (!(jitter > 0.0)) return false;
  Mat jittered = m;
  jittered.diagonal().array() += jitter;
  out.compute(jittered);
  return out.info() == Eigen::Success;
}

}  // namespace

Eigen::LLT<Mat> spd_cholesky(const Mat& m, std::string_view what) {
  Eigen::LLT<Mat> llt;
  if (!try_cholesky(m, llt)) {
    throw ValidationError(std::string(what) + ": not SPD");
  }
  return llt;
}

bool is_spd(const Mat& m) {
  Eigen::LLT<Mat> llt;
  return try_cholesky(m, llt);
}

Mat spd_inverse(const Mat& m, std::string_view what) {
  const auto llt = spd_cholesky(m, what);
  return symmetrized(llt.solve(Mat::Identity(m.rows(), m.cols())));
}

Mat spd_sqrt(const Mat& m, std::string_view what) {
  return spd_cholesky(m, what).matrixL();
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m));
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace ssde
