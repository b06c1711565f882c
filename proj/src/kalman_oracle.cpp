#include "ssde/kalman_oracle.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ssde/errors.hpp"

namespace ssde {

namespace {

using Block = KalmanBackwardOracle::Block;

struct Derivative {
  Mat dF;
  Vec dm;
  Mat dSigma;
};

Derivative rhs(const ModeDynamics& mode, const Block& b) {
  return {-b.F * mode.A(), -b.F * mode.b(), -b.F * mode.D() * b.F.transpose()};
}

Block axpy(const Block& b, double c, const Derivative& d) {
  return {b.F + c * d.dF, b.m + c * d.dm, b.Sigma + c * d.dSigma, b.x};
}

void rk4_step(const ModeDynamics& mode, Block& b, double dt) {
  if (b.rows() == 0) return;
  const auto k1 = rhs(mode, b);
  const auto k2 = rhs(mode, axpy(b, 0.5 * dt, k1));
  const auto k3 = rhs(mode, axpy(b, 0.5 * dt, k2));
  const auto k4 = rhs(mode, axpy(b, dt, k3));
  b.F += (dt / 6.0) * (k1.dF + 2.0 * k2.dF + 2.0 * k3.dF + k4.dF);
  b.m += (dt / 6.0) * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
  b.Sigma += (dt / 6.0) * (k1.dSigma + 2.0 * k2.dSigma + 2.0 * k3.dSigma + k4.dSigma);
  b.Sigma = symmetrized(b.Sigma);
}

Block stack_observation(const Block& b, const Vec& x, const Mat& Sigma_x) {
  const Eigen::Index n = x.size();
  const Eigen::Index r = b.rows();
  Block out{Mat::Zero(n + r, n), Vec::Zero(n + r), Mat::Zero(n + r, n + r), Vec(n + r)};
  out.F.topRows(n).setIdentity();
  out.Sigma.topLeftCorner(n, n) = Sigma_x;
  out.x.head(n) = x;
  if (r > 0) {
    out.F.bottomRows(r) = b.F;
    out.m.tail(r) = b.m;
    out.Sigma.bottomRightCorner(r, r) = b.Sigma;
    out.x.tail(r) = b.x;
  }
  return out;
}

}  // namespace

const Block& KalmanBackwardOracle::right(int l) const {
  const auto& r = right_[static_cast<std::size_t>(l)];
  return r ? *r : at(l);
}

double KalmanBackwardOracle::log_beta(int l, const Vec& y) const {
  const auto& b = at(l);
  if (b.rows() == 0) return 0.0;
  const auto llt = spd_cholesky(b.Sigma, "oracle Sigma");
  const Vec r = b.x - b.F * y - b.m;
  const Vec w = llt.matrixL().solve(r);
  const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * (w.squaredNorm() + logdet + static_cast<double>(b.rows()) * std::log(2.0 * std::numbers::pi));
}

Vec KalmanBackwardOracle::gradient(int l, const Vec& y) const {
  const auto& b = at(l);
  if (b.rows() == 0) return Vec::Zero(dim_);
  const auto llt = spd_cholesky(b.Sigma, "oracle Sigma");
  return b.F.transpose() * llt.solve(b.x - b.m - b.F * y);
}

std::pair<Mat, Vec> KalmanBackwardOracle::information(int l) const {
  const auto& b = at(l);
  if (b.rows() == 0) return {Mat::Zero(dim_, dim_), Vec::Zero(dim_)};
  const auto llt = spd_cholesky(b.Sigma, "oracle Sigma");
  return {symmetrized(b.F.transpose() * llt.solve(b.F)), b.F.transpose() * llt.solve(b.x - b.m)};
}

KalmanBackwardOracle run_kalman_backward_oracle(const MjpPath& z, const std::vector<ModeDynamics>& modes,
                                                const ObservationSet& obs, const Mat& Sigma_x, const TimeGrid& grid) {
  if (obs.size() > KalmanBackwardOracle::kMaxObservations) {
    throw ValidationError("kalman oracle: at most " + std::to_string(KalmanBackwardOracle::kMaxObservations) +
                          " observations supported");
  }
  const int L = grid.steps();
  const int n = modes.front().dim();
  KalmanBackwardOracle out;
  out.dim_ = n;
  out.blocks_.resize(static_cast<std::size_t>(grid.points()));
  out.right_.resize(static_cast<std::size_t>(grid.points()));

  const auto obs_idx = obs.grid_indices(grid);
  const auto mode = z.on_grid(grid);
  Block current{Mat(0, n), Vec(0), Mat(0, 0), Vec(0)};
  int next_obs = obs.size() - 1;
  auto apply_reset = [&](int l) {
    while (next_obs >= 0 && obs_idx[static_cast<std::size_t>(next_obs)] == l) {
      out.right_[static_cast<std::size_t>(l)] = current;
      current = stack_observation(current, obs.values.col(next_obs), Sigma_x);
      --next_obs;
    }
  };

  apply_reset(L);
  out.blocks_[static_cast<std::size_t>(L)] = current;
  for (int l = L - 1; l >= 0; --l) {
    rk4_step(modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])], current, -grid.step());
    if (!current.F.allFinite() || !current.Sigma.allFinite()) {
      throw NumericalError("kalman oracle: non-finite state at grid index " + std::to_string(l));
    }
    apply_reset(l);
    out.blocks_[static_cast<std::size_t>(l)] = current;
  }
  return out;
}

}  // namespace ssde
