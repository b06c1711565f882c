#ifndef SSDE_TESTS_HELPERS_HPP
#define SSDE_TESTS_HELPERS_HPP

#include <cmath>
#include <algorithm>
#include <vector>

#include "ssde/core.hpp"
#include "ssde/rng.hpp"
#include "ssde/sim.hpp"

namespace testing {

using ssde::Mat;
using ssde::Vec;

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }
inline Vec vec1(double v) { return Vec::Constant(1, v); }

inline Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

/// Random SPD matrix with eigenvalues bounded below by `floor`.
inline Mat random_spd(int n, ssde::Rng& rng, double floor = 0.2) {
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  return g * g.transpose() / n + floor * Mat::Identity(n, n);
}

inline Mat random_matrix(int rows, int cols, ssde::Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

/// Single-mode scalar model with the given dynamics and observation noise.
inline ssde::ModelParams scalar_model(double A, double b, double D, double Sigma_x) {
  ssde::ModelParams p;
  p.rates = ssde::RateMatrix(scalar(0.0));
  p.modes = {ssde::ModeDynamics(scalar(A), vec1(b), scalar(std::sqrt(D)))};
  p.init = {vec1(1.0), vec1(0.0), scalar(1.0)};
  p.obs = {scalar(Sigma_x)};
  return p;
}

/// Two-mode scalar model with symmetric switching at rate `lambda`.
inline ssde::ModelParams two_mode_model(double lambda, double b1, double b2, double A, double D, double Sigma_x) {
  ssde::ModelParams p;
  p.rates = ssde::RateMatrix(mat2(-lambda, lambda, lambda, -lambda));
  p.modes = {ssde::ModeDynamics(scalar(A), vec1(b1), scalar(std::sqrt(D))),
             ssde::ModeDynamics(scalar(A), vec1(b2), scalar(std::sqrt(D)))};
  p.init = {vec2(0.5, 0.5), vec1(0.0), scalar(1.0)};
  p.obs = {scalar(Sigma_x)};
  return p;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Random switching instance for filter cross-checks: K modes in n dimensions
/// on [0, T], a simulated mode path and between 1 and max_obs observations.
struct FilterInstance {
  ssde::TimeGrid grid{1.0, 0.01};
  ssde::MjpPath z;
  std::vector<ssde::ModeDynamics> modes;
  ssde::ObservationSet obs;
  Mat Sigma_x;
};

inline FilterInstance random_filter_instance(ssde::Rng& rng, int K, int n, int max_obs, double T = 2.0,
                                             double h = 0.01) {
  FilterInstance inst;
  inst.grid = ssde::TimeGrid(T, h);
  Mat off = Mat::Constant(K, K, 1.0);
  const auto rates = ssde::RateMatrix::from_offdiagonal(off);
  inst.z = ssde::simulate_mjp(rates, Vec::Constant(K, 1.0 / K), inst.grid.horizon(), rng);
  for (int k = 0; k < K; ++k) {
    const Mat A = random_matrix(n, n, rng, 0.4) - Mat::Identity(n, n);
    const Vec b = random_matrix(n, 1, rng);
    const Mat D = random_spd(n, rng, 0.3);
    inst.modes.push_back(ssde::ModeDynamics::from_covariance(A, b, D));
  }
  inst.Sigma_x = random_spd(n, rng, 0.2);
  const int count = 1 + static_cast<int>(rng.uniform() * max_obs);
  std::vector<int> idx;
  while (static_cast<int>(idx.size()) < count) {
    const int l = static_cast<int>(rng.uniform() * (inst.grid.points()));
    if (std::find(idx.begin(), idx.end(), l) == idx.end()) idx.push_back(l);
  }
  std::sort(idx.begin(), idx.end());
  inst.obs.values = random_matrix(n, count, rng);
  for (int l : idx) inst.obs.times.push_back(inst.grid.time(l));
  return inst;
}

}  // namespace testing

#endif  // SSDE_TESTS_HELPERS_HPP
