#include "ssde/diffusion_cond.hpp"

#include <cmath>
#include <string>

#include "ssde/errors.hpp"

namespace ssde {

BackwardInfo::BackwardInfo(int dim, int points)
    : dim_(dim),
      points_(points),
      I_(Mat::Zero(dim, static_cast<Eigen::Index>(dim) * points)),
      a_(Mat::Zero(dim, points)),
      right_slot_(static_cast<std::size_t>(points), -1) {}

namespace {

constexpr double kMaxStepStiffness = 0.03;
constexpr int kMaxSubsteps = 1 << 16;

// Right-hand side of the (I, a) ODEs with preallocated scratch.
struct InfoRhs {
  explicit InfoRhs(Eigen::Index n) : ID(n, n), dI(n, n), da(n) {}

  void operator()(const ModeDynamics& m, const Mat& I, const Vec& a) {
    ID.noalias() = I * m.D();
    dI.noalias() = ID * I;
    dI.noalias() -= m.A().transpose() * I;
    dI.noalias() -= I * m.A();
    da.noalias() = ID * a;
    da.noalias() -= m.A().transpose() * a;
    da.noalias() += I * m.b();
  }

  Mat ID, dI;
  Vec da;
};

struct InfoRk4 {
  explicit InfoRk4(Eigen::Index n)
      : rhs(n), kI(4, Mat(n, n)), ka(4, Vec(n)), Is(n, n), as(n) {}

  // One step of size dt (negative when integrating backward).
  void step(const ModeDynamics& m, Mat& I, Vec& a, double dt) {
    static constexpr double c[4] = {0.0, 0.5, 0.5, 1.0};
    for (int k = 0; k < 4; ++k) {
      if (k == 0) {
        rhs(m, I, a);
      } else {
        Is = I + (c[k] * dt) * kI[k - 1];
        as = a + (c[k] * dt) * ka[k - 1];
        rhs(m, Is, as);
      }
      kI[k] = rhs.dI;
      ka[k] = rhs.da;
    }
    I += (dt / 6.0) * (kI[0] + 2.0 * kI[1] + 2.0 * kI[2] + kI[3]);
    a += (dt / 6.0) * (ka[0] + 2.0 * ka[1] + 2.0 * ka[2] + ka[3]);
    Is = I.transpose();
    I = 0.5 * (I + Is);
  }

  InfoRhs rhs;
  std::vector<Mat> kI;
  std::vector<Vec> ka;
  Mat Is;
  Vec as;
};

}  // namespace

BackwardInfo run_information_filter(const MjpPath& z, const std::vector<ModeDynamics>& modes,
                                    const ObservationSet& obs, const Mat& Sigma_x, const TimeGrid& grid) {
  const int L = grid.steps();
  const auto n = static_cast<int>(modes.front().dim());
  BackwardInfo out(n, grid.points());

  const auto obs_idx = obs.grid_indices(grid);
  const auto N = static_cast<int>(obs_idx.size());
  Mat prec_x;
  Mat prec_obs;  // Sigma_x^{-1} x_i, column per observation
  if (N > 0) {
    const auto llt = spd_cholesky(Sigma_x, "Sigma_x");
    prec_x = symmetrized(llt.solve(Mat::Identity(n, n)));
    prec_obs = llt.solve(obs.values);
    out.I_plus_.resize(n, static_cast<Eigen::Index>(n) * N);
    out.a_plus_.resize(n, N);
  }

  const auto mode = z.on_grid(grid);
  Mat I = Mat::Zero(n, n);
  Vec a = Vec::Zero(n);
  int next_obs = N - 1;
  InfoRk4 rk4(n);

  auto apply_reset = [&](int l) {
    while (next_obs >= 0 && obs_idx[static_cast<std::size_t>(next_obs)] == l) {
      out.right_slot_[static_cast<std::size_t>(l)] = next_obs;
      out.I_plus_.middleCols(static_cast<Eigen::Index>(next_obs) * n, n) = I;
      out.a_plus_.col(next_obs) = a;
      I += prec_x;
      a += prec_obs.col(next_obs);
      --next_obs;
    }
  };
  auto store = [&](int l) {
    out.I_.middleCols(static_cast<Eigen::Index>(l) * n, n) = I;
    out.a_.col(l) = a;
  };

  apply_reset(L);
  store(L);
  const double h = grid.step();
  for (int l = L - 1; l >= 0; --l) {
    const auto& m = modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])];
    // Just before an observation I D h can be large (small Sigma_x); split the
    // cell so the RK4 error of the Riccati term stays near roundoff level.
    const double stiffness = h * (2.0 * m.A().norm() + I.norm() * m.D().norm());
    const int substeps = static_cast<int>(std::ceil(stiffness / kMaxStepStiffness));
    if (substeps > kMaxSubsteps) {
      throw NumericalError("information filter: Riccati equation too stiff at grid index " + std::to_string(l));
    }
    if (substeps <= 1) {
      rk4.step(m, I, a, -h);
    } else {
      for (int k = 0; k < substeps; ++k) rk4.step(m, I, a, -h / substeps);
    }
    if (!I.allFinite() || !a.allFinite()) {
      throw NumericalError("information filter: non-finite state at grid index " + std::to_string(l));
    }
    apply_reset(l);
    store(l);
  }
  return out;
}

std::pair<Vec, Mat> posterior_initial_law(const Mat& I0, const Vec& a0, const Vec& mu0, const Mat& Sigma0) {
  const auto llt0 = spd_cholesky(Sigma0, "Sigma0");
  const Eigen::Index n = mu0.size();
  const Mat prec = symmetrized(llt0.solve(Mat::Identity(n, n)) + I0);
  const auto llt = spd_cholesky(prec, "posterior initial precision");
  Mat cov = symmetrized(llt.solve(Mat::Identity(n, n)));
  Vec mean = llt.solve(llt0.solve(mu0) + a0);
  return {std::move(mean), std::move(cov)};
}

Vec posterior_drift(const ModeDynamics& mode, const BackwardInfo& info, int l, const Vec& y) {
  const Vec grad = info.a_right(l) - info.I_right(l) * y;
  return mode.A() * y + mode.b() + mode.D() * grad;
}

DiffusionPath sample_conditional_diffusion(const MjpPath& z, const BackwardInfo& info,
                                           const std::vector<ModeDynamics>& modes, const InitialLaw& init,
                                           const TimeGrid& grid, Rng& rng, PosteriorStep step) {
  const auto n = static_cast<Eigen::Index>(info.dim());
  const auto [mu_bar, Sigma_bar] = posterior_initial_law(info.I(0), info.a(0), init.mu0, init.Sigma0);
  const Mat root = spd_sqrt(Sigma_bar, "posterior initial covariance");

  DiffusionPath path{Mat(n, grid.points())};
  Vec y = mu_bar + root * rng.normal_vector(n);
  path.values.col(0) = y;

  const auto mode = z.on_grid(grid);
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);
  Vec grad(n), drift(n), eps(n), rhs(n);
  Mat precision(n, n);
  Eigen::LLT<Mat> llt(n);
  for (int l = 0; l < grid.steps(); ++l) {
    const auto& m = modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])];
    drift = m.b();
    drift.noalias() += m.A() * y;
    for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.normal();
    if (step == PosteriorStep::kEuler) {
      grad = info.a_right(l);
      grad.noalias() -= info.I_right(l) * y;
      drift.noalias() += m.D() * grad;
      y += h * drift;
      y.noalias() += sqrt_h * (m.Q() * eps);
    } else {
      // N(y + f h, D h) prior step combined with beta(., t_{l+1}).
      precision = m.D_inverse() / h;
      precision += info.I(l + 1);
      llt.compute(precision);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("posterior diffusion: transition precision not SPD at grid index " + std::to_string(l + 1));
      }
      y += h * drift;
      rhs.noalias() = m.D_inverse() * y;
      rhs /= h;
      rhs += info.a(l + 1);
      llt.matrixL().solveInPlace(rhs);
      rhs += eps;
      llt.matrixU().solveInPlace(rhs);
      y = rhs;
    }
    if (!y.allFinite()) {
      throw NumericalError("posterior diffusion: non-finite state at grid index " + std::to_string(l + 1));
    }
    path.values.col(l + 1) = y;
  }
  return path;
}

}  // namespace ssde
