#include "ssde/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssde/errors.hpp"
#include "ssde/log.hpp"

namespace ssde {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

void require_spd(const Mat& m, int n, const std::string& what) {
  require(m.rows() == n && m.cols() == n, what + ": dimension mismatch");
  require(is_spd(m), what + ": not SPD");
}

}  // namespace

// ---------------------------------------------------------------------------

TimeGrid::TimeGrid(double horizon, double step) : step_(step) {
  require(std::isfinite(step) && step > 0.0, "invalid step: h must be > 0");
  require(std::isfinite(horizon) && horizon > 0.0, "invalid horizon: T must be > 0");
  require(step <= horizon, "invalid step: h must not exceed T");
  const double ratio = horizon / step;
  steps_ = static_cast<int>(std::llround(ratio));
  require(steps_ >= 2, "invalid grid: need at least 2 steps");
  if (std::abs(ratio - steps_) > 1e-9 * ratio) {
    log::info("time grid: horizon " + std::to_string(horizon) + " snapped to " +
              std::to_string(this->horizon()));
  }
}

int TimeGrid::snap(double t) const {
  const double pos = t / step_;
  const long long l = std::llround(pos);
  if (!std::isfinite(t) || l < 0 || l > steps_ || std::abs(t - time(static_cast<int>(l))) > 0.5 * step_ + 1e-12 * step_) {
    throw ValidationError("observation time " + std::to_string(t) + " is off the time grid");
  }
  return static_cast<int>(l);
}

// ---------------------------------------------------------------------------

RateMatrix RateMatrix::from_offdiagonal(const Mat& rates) {
  Mat m = rates;
  for (Eigen::Index z = 0; z < m.rows(); ++z) {
    m(z, z) = 0.0;
    m(z, z) = -m.row(z).sum();
  }
  return RateMatrix(std::move(m));
}

void RateMatrix::validate() const {
  require(m_.rows() >= 1 && m_.rows() == m_.cols(), "rate matrix: must be square with K >= 1");
  require(m_.allFinite(), "rate matrix: non-finite entry");
  for (Eigen::Index z = 0; z < m_.rows(); ++z) {
    double sum = 0.0;
    for (Eigen::Index w = 0; w < m_.cols(); ++w) {
      if (w != z) require(m_(z, w) >= 0.0, "rate matrix: negative off-diagonal rate");
      sum += m_(z, w);
    }
    const double scale = std::max(1.0, std::abs(m_(z, z)));
    require(std::abs(sum) <= 1e-12 * scale, "rate row sum: row " + std::to_string(z + 1) + " does not sum to 0");
  }
}

// ---------------------------------------------------------------------------

ModeDynamics::ModeDynamics(Mat A, Vec b, Mat Q) : A_(std::move(A)), b_(std::move(b)), Q_(std::move(Q)) {
  const auto n = b_.size();
  require(n >= 1, "mode: empty drift offset");
  require(A_.rows() == n && A_.cols() == n, "mode: A dimension mismatch");
  require(Q_.rows() == n && Q_.cols() == n, "mode: Q dimension mismatch");
  require(A_.allFinite() && b_.allFinite() && Q_.allFinite(), "mode: non-finite parameter");
  D_ = symmetrized(Q_ * Q_.transpose());
  if (Q_.isZero(0.0)) {
    deterministic_ = true;
    return;
  }
  const auto llt = spd_cholesky(D_, "dispersion D");
  D_inv_ = symmetrized(llt.solve(Mat::Identity(n, n)));
  log_det_D_ = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
}

void ModeDynamics::throw_singular() {
  throw ValidationError("dispersion D: not SPD (mode has Q = 0)");
}

ModeDynamics ModeDynamics::from_covariance(Mat A, Vec b, const Mat& D) {
  return ModeDynamics(std::move(A), std::move(b), spd_sqrt(symmetrized(D), "dispersion D"));
}

// ---------------------------------------------------------------------------

void validate_params(const ModelParams& p) {
  p.rates.validate();
  const int K = p.rates.modes();
  const int n = p.dim();
  require(n >= 1, "initial law: empty mean");
  require(static_cast<int>(p.modes.size()) == K, "dimension mismatch: number of modes differs from rate matrix");
  for (const auto& m : p.modes) {
    require(m.dim() == n, "dimension mismatch: mode state dimension");
    require(m.A().rows() == n && m.A().cols() == n && m.Q().rows() == n, "dimension mismatch: mode matrices");
  }
  require(p.init.pi.size() == K, "dimension mismatch: pi length");
  require((p.init.pi.array() >= 0.0).all() && std::abs(p.init.pi.sum() - 1.0) <= 1e-12,
          "simplex violation: pi must be non-negative and sum to 1");
  require(p.init.mu0.allFinite(), "initial law: non-finite mean");
  require_spd(p.init.Sigma0, n, "Sigma0");
  require_spd(p.obs.Sigma_x, n, "Sigma_x");
}

// ---------------------------------------------------------------------------

MjpPath::MjpPath(std::vector<double> jump_times, std::vector<int> states, double horizon)
    : jump_times_(std::move(jump_times)), states_(std::move(states)), horizon_(horizon) {
  require(!states_.empty(), "mjp path: empty state sequence");
  require(states_.size() == jump_times_.size() + 1, "mjp path: need one more state than jumps");
}

int MjpPath::mode_at(double t) const {
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  return states_[static_cast<std::size_t>(it - jump_times_.begin())];
}

std::vector<int> MjpPath::on_grid(const TimeGrid& grid) const {
  std::vector<int> out(static_cast<std::size_t>(grid.points()));
  std::size_t k = 0;
  for (int l = 0; l < grid.points(); ++l) {
    const double t = grid.time(l);
    while (k < jump_times_.size() && jump_times_[k] <= t) ++k;
    out[static_cast<std::size_t>(l)] = states_[k];
  }
  return out;
}

std::vector<double> MjpPath::sojourn_times() const {
  std::vector<double> out;
  out.reserve(states_.size());
  double prev = 0.0;
  for (double j : jump_times_) {
    out.push_back(j - prev);
    prev = j;
  }
  out.push_back(horizon_ - prev);
  return out;
}

void MjpPath::validate(int num_modes) const {
  require(horizon_ > 0.0, "mjp path: horizon must be positive");
  for (std::size_t k = 0; k < states_.size(); ++k) {
    require(states_[k] >= 0 && states_[k] < num_modes, "mjp path: mode out of range");
    if (k > 0) require(states_[k] != states_[k - 1], "mjp path: consecutive states must differ");
  }
  double prev = 0.0;
  for (double j : jump_times_) {
    require(j > prev && j <= horizon_, "mjp path: jump times must be increasing within (0, T]");
    prev = j;
  }
}

// ---------------------------------------------------------------------------

std::vector<int> ObservationSet::grid_indices(const TimeGrid& grid) const {
  std::vector<int> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(grid.snap(t));
  return out;
}

void ObservationSet::validate(const TimeGrid& grid) const {
  require(static_cast<Eigen::Index>(times.size()) == values.cols(), "observations: times/values count mismatch");
  require(values.allFinite(), "observations: non-finite value");
  for (std::size_t i = 1; i < times.size(); ++i) {
    require(times[i] > times[i - 1], "observations: times must be strictly increasing");
  }
  const auto idx = grid_indices(grid);
  for (std::size_t i = 1; i < idx.size(); ++i) {
    require(idx[i] > idx[i - 1], "observations: two observations snap to the same grid point");
  }
}

// ---------------------------------------------------------------------------

void PriorHyperparams::validate() const {
  const int K = num_modes();
  const int n = dim();
  require(K >= 1 && n >= 1, "hyper: empty alpha or eta");
  require((alpha.array() > 0.0).all(), "hyper: alpha must be positive");
  require(lambda > 0.0, "hyper: lambda must be positive");
  require_spd(Psi, n, "hyper Psi");
  require(kappa > n + 1, "hyper: kappa must exceed n + 1");
  require(s > 0.0 && r > 0.0, "hyper: Gamma shape and rate must be positive");
  require(static_cast<int>(M.size()) == K && static_cast<int>(this->K.size()) == K, "hyper: drift prior count mismatch");
  require(static_cast<int>(Psi_D.size()) == K && static_cast<int>(lambda_D.size()) == K,
          "hyper: dispersion prior count mismatch");
  for (int z = 0; z < K; ++z) {
    require(M[z].rows() == n && M[z].cols() == n + 1, "hyper: M_z must be n x (n+1)");
    require_spd(this->K[z], n + 1, "hyper K_z");
    require_spd(Psi_D[z], n, "hyper Psi_D");
    require(lambda_D[z] > n + 1, "hyper: lambda_D must exceed n + 1");
  }
  require_spd(Psi_x, n, "hyper Psi_x");
  require(lambda_x > n + 1, "hyper: lambda_x must exceed n + 1");
  require(xi > 0.0, "hyper: MALA step xi must be positive");
}

}  // namespace ssde
