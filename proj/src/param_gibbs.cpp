#include "ssde/param_gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "ssde/distributions.hpp"
#include "ssde/errors.hpp"
#include "ssde/log.hpp"

namespace ssde {

MjpStats mjp_sufficient_stats(const MjpPath& z, int num_modes) {
  MjpStats out{Mat::Zero(num_modes, num_modes), Vec::Zero(num_modes)};
  const auto& states = z.states();
  const auto sojourns = z.sojourn_times();
  for (std::size_t k = 0; k < states.size(); ++k) {
    out.sojourn[states[k]] += sojourns[k];
    if (k + 1 < states.size()) out.counts(states[k], states[k + 1]) += 1.0;
  }
  return out;
}

RatePosterior rate_posterior(double s, double r, const MjpStats& stats) {
  const auto K = stats.counts.rows();
  RatePosterior post{Mat::Zero(K, K), Vec::Constant(K, r) + stats.sojourn};
  for (Eigen::Index a = 0; a < K; ++a) {
    for (Eigen::Index c = 0; c < K; ++c) {
      if (a != c) post.shape(a, c) = s + stats.counts(a, c);
    }
  }
  return post;
}

RateMatrix update_rates(double s, double r, const MjpStats& stats, Rng& rng) {
  const auto post = rate_posterior(s, r, stats);
  const auto K = post.shape.rows();
  Mat rates = Mat::Zero(K, K);
  for (Eigen::Index a = 0; a < K; ++a) {
    for (Eigen::Index c = 0; c < K; ++c) {
      if (a != c) rates(a, c) = rng.gamma(post.shape(a, c), post.rate[a]);
    }
  }
  return RateMatrix::from_offdiagonal(rates);
}

Vec initial_mode_posterior(const Vec& alpha, int z0) {
  Vec post = alpha;
  post[z0] += 1.0;
  return post;
}

Vec update_initial_mode(const Vec& alpha, int z0, Rng& rng) {
  return sample_dirichlet(initial_mode_posterior(alpha, z0), rng);
}

NiwParams niw_posterior(const NiwParams& prior, const Vec& y0) {
  NiwParams post;
  post.lambda = prior.lambda + 1.0;
  post.kappa = prior.kappa + 1.0;
  post.eta = (prior.lambda * prior.eta + y0) / post.lambda;
  const Vec d = y0 - prior.eta;
  post.Psi = symmetrized(prior.Psi + (prior.lambda / post.lambda) * d * d.transpose());
  return post;
}

std::pair<Vec, Mat> update_initial_state(const NiwParams& prior, const Vec& y0, Rng& rng) {
  const auto post = niw_posterior(prior, y0);
  Mat Sigma0 = sample_inverse_wishart(post.Psi, post.kappa, rng);
  Vec mu0 = sample_gaussian(post.eta, Sigma0 / post.lambda, rng);
  return {std::move(mu0), std::move(Sigma0)};
}

// ---------------------------------------------------------------------------

DriftStats drift_sufficient_stats(const MjpPath& z, const DiffusionPath& y, const TimeGrid& grid, int num_modes) {
  const Eigen::Index n = y.dim();
  DriftStats out{std::vector<Mat>(num_modes, Mat::Zero(n, n + 1)),
                 std::vector<Mat>(num_modes, Mat::Zero(n + 1, n + 1)), std::vector<int>(num_modes, 0)};
  const auto mode = z.on_grid(grid);
  const double h = grid.step();
  Vec ybar(n + 1);
  ybar[n] = 1.0;
  for (int l = 0; l < grid.steps(); ++l) {
    const int m = mode[static_cast<std::size_t>(l)];
    ybar.head(n) = y.at(l);
    out.dY_Ybar[m].noalias() += (y.at(l + 1) - y.at(l)) * ybar.transpose();
    out.Ybar_Ybar[m].noalias() += h * ybar * ybar.transpose();
    ++out.steps[m];
  }
  return out;
}

MatrixNormalPosterior drift_posterior(const Mat& M, const Mat& K, const Mat& dY_Ybar, const Mat& Ybar_Ybar) {
  MatrixNormalPosterior post;
  post.K = symmetrized(Ybar_Ybar + K);
  const auto llt = spd_cholesky(post.K, "drift posterior precision");
  // M~ = (dY Ybar^T + M K) K~^{-1}, solved from the right via K~ symmetric.
  post.M = llt.solve((dY_Ybar + M * K).transpose()).transpose();
  return post;
}

Mat update_drift(const Mat& M, const Mat& K, const Mat& D, const Mat& dY_Ybar, const Mat& Ybar_Ybar, Rng& rng) {
  const auto post = drift_posterior(M, K, dY_Ybar, Ybar_Ybar);
  return sample_matrix_normal(post.M, D, spd_inverse(post.K, "drift posterior precision"), rng);
}

double girsanov_loglik(const MjpPath& z, const DiffusionPath& y, const std::vector<ModeDynamics>& modes,
                       const TimeGrid& grid) {
  const auto mode = z.on_grid(grid);
  const double h = grid.step();
  double total = 0.0;
  Vec f(y.dim()), w(y.dim());
  for (int l = 0; l < grid.steps(); ++l) {
    const auto& m = modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])];
    f.noalias() = m.A() * y.at(l);
    f += m.b();
    w.noalias() = m.D_inverse() * f;
    total += w.dot(y.at(l + 1) - y.at(l)) - 0.5 * h * w.dot(f);
  }
  return total;
}

double transition_loglik(const MjpPath& z, const DiffusionPath& y, const std::vector<ModeDynamics>& modes,
                         const TimeGrid& grid) {
  const auto mode = z.on_grid(grid);
  const double h = grid.step();
  const double n = static_cast<double>(y.dim());
  double total = 0.0;
  Vec r(y.dim());
  for (int l = 0; l < grid.steps(); ++l) {
    const auto& m = modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])];
    r = y.at(l + 1) - y.at(l);
    r.noalias() -= h * (m.A() * y.at(l));
    r -= h * m.b();
    total += -0.5 * r.dot(m.D_inverse() * r) / h - 0.5 * (n * std::log(2.0 * std::numbers::pi * h) + m.log_det_D());
  }
  return total;
}

// ---------------------------------------------------------------------------

DispersionStats dispersion_stats(const MjpPath& z, const DiffusionPath& y, const ModeDynamics& mode, int mode_index,
                                 const TimeGrid& grid) {
  const Eigen::Index n = y.dim();
  DispersionStats out{Mat::Zero(n, n), 0};
  const auto modes = z.on_grid(grid);
  const double h = grid.step();
  Vec r(n);
  for (int l = 0; l < grid.steps(); ++l) {
    if (modes[static_cast<std::size_t>(l)] != mode_index) continue;
    r = y.at(l + 1) - y.at(l);
    r.noalias() -= h * (mode.A() * y.at(l));
    r -= h * mode.b();
    out.scatter.noalias() += r * r.transpose() / h;
    ++out.steps;
  }
  out.scatter = symmetrized(out.scatter);
  return out;
}

DispersionTarget::DispersionTarget(DispersionStats stats, Mat Psi, double lambda)
    : B_(symmetrized(stats.scatter + Psi)),
      c_(static_cast<double>(stats.steps) + lambda + static_cast<double>(Psi.rows()) + 1.0),
      Psi_(std::move(Psi)) {}

Vec DispersionTarget::to_theta(const Mat& D) {
  const Mat L = spd_sqrt(D, "dispersion D");
  const Eigen::Index n = D.rows();
  Vec theta(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) theta[k++] = (i == j) ? std::log(L(i, i)) : L(i, j);
  }
  return theta;
}

namespace {

Mat theta_to_cholesky(const Vec& theta) {
  const auto n = static_cast<Eigen::Index>(std::lround((std::sqrt(8.0 * static_cast<double>(theta.size()) + 1.0) - 1.0) / 2.0));
  Mat L = Mat::Zero(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) L(i, j) = (i == j) ? std::exp(theta[k++]) : theta[k++];
  }
  return L;
}

}  // namespace

Mat DispersionTarget::to_covariance(const Vec& theta) {
  const Mat L = theta_to_cholesky(theta);
  return symmetrized(L * L.transpose());
}

double DispersionTarget::log_density(const Vec& theta) const {
  const Mat L = theta_to_cholesky(theta);
  const Eigen::Index n = L.rows();
  // tr(D^{-1} B) = ||L^{-1} B^{1/2}||^2, computed via triangular solves.
  const Mat W = L.triangularView<Eigen::Lower>().solve(B_);
  const Mat V = L.triangularView<Eigen::Lower>().solve(W.transpose());
  double logdet_half = 0.0;
  double jacobian = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = std::log(L(i, i));
    logdet_half += t;
    jacobian += static_cast<double>(n - i + 1) * t;
  }
  return -0.5 * V.trace() - c_ * logdet_half + jacobian;
}

Vec DispersionTarget::gradient(const Vec& theta) const {
  const Mat L = theta_to_cholesky(theta);
  const Eigen::Index n = L.rows();
  const Mat D = L * L.transpose();
  const auto llt = D.llt();
  const Mat Dinv_B = llt.solve(B_);
  const Mat G = llt.solve(Dinv_B.transpose());  // D^{-1} B D^{-1}
  const Mat GL = G * L;
  Vec grad(theta.size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      grad[k++] = (i == j) ? GL(i, i) * L(i, i) - c_ + static_cast<double>(n - i + 1) : GL(i, j);
    }
  }
  return grad;
}

double mala_log_proposal(const DispersionTarget& target, const Vec& from, const Vec& to, double xi) {
  const Vec mean = from + xi * target.gradient(from);
  const double d = static_cast<double>(from.size());
  return -(to - mean).squaredNorm() / (4.0 * xi) - 0.5 * d * std::log(4.0 * std::numbers::pi * xi);
}

double mala_acceptance(const DispersionTarget& target, const Vec& from, const Vec& to, double xi) {
  const double log_ratio = target.log_density(to) - target.log_density(from) +
                           mala_log_proposal(target, to, from, xi) - mala_log_proposal(target, from, to, xi);
  if (!std::isfinite(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

MalaResult mala_update_dispersion(const ModeDynamics& mode, int mode_index, const MjpPath& z, const DiffusionPath& y,
                                  const TimeGrid& grid, const Mat& Psi_D, double lambda_D, double xi, Rng& rng) {
  if (xi == 0.0) return {mode.D(), true};
  const DispersionTarget target(dispersion_stats(z, y, mode, mode_index, grid), Psi_D, lambda_D);
  const Vec theta = DispersionTarget::to_theta(mode.D());
  const Vec grad = target.gradient(theta);
  Vec proposal = theta + xi * grad;
  const double noise = std::sqrt(2.0 * xi);
  for (Eigen::Index i = 0; i < proposal.size(); ++i) proposal[i] += noise * rng.normal();
  const double accept = proposal.allFinite() ? mala_acceptance(target, theta, proposal, xi) : 0.0;
  if (rng.uniform() < accept) {
    Mat D = DispersionTarget::to_covariance(proposal);
    if (is_spd(D)) return {std::move(D), true};
  }
  return {mode.D(), false};
}

// ---------------------------------------------------------------------------

InverseWishartParams obs_cov_posterior(const Mat& Psi_x, double lambda_x, const Mat& residuals) {
  return {symmetrized(Psi_x + residuals * residuals.transpose()), lambda_x + static_cast<double>(residuals.cols())};
}

Mat update_obs_cov(const Mat& Psi_x, double lambda_x, const Mat& residuals, Rng& rng) {
  const auto post = obs_cov_posterior(Psi_x, lambda_x, residuals);
  return sample_inverse_wishart(post.Psi, post.dof, rng);
}

// ---------------------------------------------------------------------------

namespace {

KMeansResult lloyd(const Mat& points, Mat centers) {
  const Eigen::Index N = points.cols();
  const Eigen::Index k = centers.cols();
  std::vector<int> labels(static_cast<std::size_t>(N), -1);
  double inertia = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    inertia = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      Eigen::Index best = 0;
      const double d = (centers.colwise() - points.col(i)).colwise().squaredNorm().minCoeff(&best);
      inertia += d;
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Mat sums = Mat::Zero(points.rows(), k);
    Vec counts = Vec::Zero(k);
    for (Eigen::Index i = 0; i < N; ++i) {
      sums.col(labels[static_cast<std::size_t>(i)]) += points.col(i);
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) centers.col(c) = sums.col(c) / counts[c];
    }
  }
  return {std::move(centers), std::move(labels), inertia};
}

Mat kmeans_plus_plus(const Mat& points, int k, Rng& rng) {
  const Eigen::Index N = points.cols();
  Mat centers(points.rows(), k);
  centers.col(0) = points.col(static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(N)));
  std::vector<double> dist(static_cast<std::size_t>(N));
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < N; ++i) {
      dist[static_cast<std::size_t>(i)] = (centers.leftCols(c).colwise() - points.col(i)).colwise().squaredNorm().minCoeff();
    }
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const Eigen::Index pick =
        total > 0.0 ? rng.categorical(dist) : static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(N));
    centers.col(c) = points.col(pick);
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Mat& points, int k, int restarts, Rng& rng) {
  if (k < 1 || points.cols() < k) throw ValidationError("k-means: need at least as many points as clusters");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    auto result = lloyd(points, kmeans_plus_plus(points, k, rng));
    if (result.inertia < best.inertia) best = std::move(result);
  }
  // Order clusters by their first coordinate so labels are reproducible.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return best.centers(0, a) < best.centers(0, b); });
  std::vector<int> relabel(static_cast<std::size_t>(k));
  Mat sorted(best.centers.rows(), k);
  for (int c = 0; c < k; ++c) {
    relabel[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = c;
    sorted.col(c) = best.centers.col(order[static_cast<std::size_t>(c)]);
  }
  for (auto& l : best.labels) l = relabel[static_cast<std::size_t>(l)];
  best.centers = std::move(sorted);
  return best;
}

namespace {

Mat sample_covariance(const Mat& points) {
  const Vec mean = points.rowwise().mean();
  const Mat centered = points.colwise() - mean;
  return symmetrized(centered * centered.transpose() / static_cast<double>(points.cols() - 1));
}

bool hurwitz_stable(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A);
  return es.info() == Eigen::Success && (es.eigenvalues().real().array() < 0.0).all();
}

// Least-squares fit of finite-difference velocities on deviations from the cluster mean.
Mat drift_matrix_estimate(const ObservationSet& obs, const std::vector<int>& labels, int cluster, const Vec& mean) {
  const Eigen::Index n = obs.dim();
  Mat vel_dev = Mat::Zero(n, n);
  Mat dev_dev = Mat::Zero(n, n);
  int used = 0;
  for (int i = 0; i + 1 < obs.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)] != cluster) continue;
    const double dt = obs.times[static_cast<std::size_t>(i + 1)] - obs.times[static_cast<std::size_t>(i)];
    const Vec v = (obs.values.col(i + 1) - obs.values.col(i)) / dt;
    const Vec d = obs.values.col(i) - mean;
    vel_dev += v * d.transpose();
    dev_dev += d * d.transpose();
    ++used;
  }
  if (used < n + 1) return -Mat::Identity(n, n);
  dev_dev.diagonal().array() += 1e-9 * std::max(1.0, dev_dev.trace());
  const Mat A = dev_dev.llt().solve(vel_dev.transpose()).transpose();
  if (!A.allFinite() || !hurwitz_stable(A)) return -Mat::Identity(n, n);
  return A;
}

MjpPath assignment_path(const ObservationSet& obs, const std::vector<int>& labels, double horizon) {
  std::vector<double> jumps;
  std::vector<int> states{labels.front()};
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == states.back()) continue;
    jumps.push_back(0.5 * (obs.times[i - 1] + obs.times[i]));
    states.push_back(labels[i]);
  }
  return MjpPath(std::move(jumps), std::move(states), horizon);
}

DiffusionPath interpolated_path(const ObservationSet& obs, const TimeGrid& grid) {
  DiffusionPath y{Mat(obs.dim(), grid.points())};
  std::size_t i = 0;
  const auto N = obs.times.size();
  for (int l = 0; l < grid.points(); ++l) {
    const double t = grid.time(l);
    while (i + 1 < N && obs.times[i + 1] <= t) ++i;
    if (t <= obs.times.front()) {
      y.values.col(l) = obs.values.col(0);
    } else if (i + 1 >= N) {
      y.values.col(l) = obs.values.col(static_cast<Eigen::Index>(N - 1));
    } else {
      const double w = (t - obs.times[i]) / (obs.times[i + 1] - obs.times[i]);
      y.values.col(l) = (1.0 - w) * obs.values.col(static_cast<Eigen::Index>(i)) +
                        w * obs.values.col(static_cast<Eigen::Index>(i + 1));
    }
  }
  return y;
}

}  // namespace

EmpiricalInit empirical_hyperparams(const ObservationSet& obs, int num_modes, const TimeGrid& grid,
                                    std::uint64_t seed) {
  const int N = obs.size();
  const int K = num_modes;
  const auto n = static_cast<Eigen::Index>(obs.dim());
  if (N < K || N < 2) throw ValidationError("empirical hyperparameters: need N >= K and N >= 2 observations");

  Rng rng(seed);
  EmpiricalInit out;
  out.clusters = kmeans(obs.values, K, 20, rng);
  const auto& labels = out.clusters.labels;

  const Mat global_cov = sample_covariance(obs.values);
  std::vector<Mat> cov(static_cast<std::size_t>(K));
  std::vector<Vec> mean(static_cast<std::size_t>(K));
  for (int c = 0; c < K; ++c) {
    std::vector<Eigen::Index> members;
    for (int i = 0; i < N; ++i) {
      if (labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
    }
    mean[static_cast<std::size_t>(c)] = out.clusters.centers.col(c);
    Mat sub(n, static_cast<Eigen::Index>(members.size()));
    for (std::size_t j = 0; j < members.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = obs.values.col(members[j]);
    if (members.size() >= 2 && is_spd(sample_covariance(sub))) {
      cov[static_cast<std::size_t>(c)] = sample_covariance(sub);
    } else {
      log::info("empirical hyperparameters: cluster " + std::to_string(c + 1) +
                " has too few members for a covariance; using the global covariance");
      cov[static_cast<std::size_t>(c)] = global_cov;
    }
  }
  Mat mean_cov = Mat::Zero(n, n);
  Vec mean_of_means = Vec::Zero(n);
  for (int c = 0; c < K; ++c) {
    mean_cov += cov[static_cast<std::size_t>(c)] / K;
    mean_of_means += mean[static_cast<std::size_t>(c)] / K;
  }
  if (!is_spd(mean_cov)) {
    throw ValidationError("empirical hyperparameters: degenerate data covariance (constant observations?)");
  }

  int transitions = 0;
  for (int i = 1; i < N; ++i) transitions += labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(i - 1)];
  out.transitions = transitions;

  auto& hp = out.hyper;
  hp.alpha = Vec::Ones(K);
  hp.alpha[labels.front()] += 1.0;
  hp.eta = mean_of_means;
  hp.lambda = 1.0;
  hp.Psi = 0.1 * mean_cov;
  hp.kappa = static_cast<double>(n) + 2.0;
  hp.s = transitions > 0 ? static_cast<double>(transitions) : 1.0;
  hp.r = 1.0;
  std::vector<ModeDynamics> modes;
  for (int c = 0; c < K; ++c) {
    const Mat A = drift_matrix_estimate(obs, labels, c, mean[static_cast<std::size_t>(c)]);
    const Vec b = -A * mean[static_cast<std::size_t>(c)];
    Mat M(n, n + 1);
    M << A, b;
    hp.M.push_back(M);
    hp.K.push_back(Mat::Identity(n + 1, n + 1));
    hp.Psi_D.push_back(0.1 * cov[static_cast<std::size_t>(c)]);
    hp.lambda_D.push_back(static_cast<double>(n) + 2.0);
    modes.push_back(ModeDynamics::from_covariance(A, b, hp.Psi_D.back()));
  }
  hp.Psi_x = 0.5 * mean_cov;
  hp.lambda_x = static_cast<double>(n) + 2.0;
  hp.validate();

  out.z = assignment_path(obs, labels, grid.horizon());
  out.y = interpolated_path(obs, grid);

  const auto stats = mjp_sufficient_stats(out.z, K);
  Mat rates = Mat::Zero(K, K);
  for (int a = 0; a < K; ++a) {
    for (int c = 0; c < K; ++c) {
      if (a != c) rates(a, c) = std::max(stats.counts(a, c), 1.0) / std::max(stats.sojourn[a], grid.step());
    }
  }
  out.params.rates = RateMatrix::from_offdiagonal(rates);
  out.params.modes = std::move(modes);
  out.params.init = InitialLaw{hp.alpha / hp.alpha.sum(), hp.eta, hp.Psi};
  out.params.obs = ObservationModel{hp.Psi_x};
  validate_params(out.params);
  return out;
}

}  // namespace ssde
