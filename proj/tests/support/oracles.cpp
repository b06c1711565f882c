#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

double kolmogorov_tail(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_one_sample_pvalue(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
}

double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d);
}

double chi2_upper_tail(double statistic, double dof) {
  if (dof <= 0) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, std::max(statistic, 0.0)));
}

double chi2_homogeneity_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  double stat = 0.0;
  int used = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double total = a[k] + b[k];
    if (total == 0.0) continue;
    ++used;
    const double ea = total * na / (na + nb);
    const double eb = total * nb / (na + nb);
    stat += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
  }
  return chi2_upper_tail(stat, used - 1);
}

double chi2_gof_pvalue(const std::vector<double>& counts, const std::vector<double>& probs) {
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  double stat = 0.0;
  int used = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (probs[k] <= 0.0) {
      if (counts[k] > 0.0) return 0.0;
      continue;
    }
    ++used;
    const double e = n * probs[k];
    stat += (counts[k] - e) * (counts[k] - e) / e;
  }
  return chi2_upper_tail(stat, used - 1);
}

SmootherResult rts_smoother(const Mat& A, const Vec& b, const Mat& D, const Mat& Sigma_x, const Vec& mu0,
                            const Mat& Sigma0, double h, int steps, const std::vector<int>& obs_idx,
                            const std::vector<Vec>& obs_values) {
  const auto n = mu0.size();
  const Mat F = Mat::Identity(n, n) + A * h;
  const Vec c = b * h;
  const Mat W = D * h;
  std::vector<Vec> m_pred(steps + 1), m_filt(steps + 1);
  std::vector<Mat> P_pred(steps + 1), P_filt(steps + 1);
  std::size_t next = 0;
  for (int l = 0; l <= steps; ++l) {
    if (l == 0) {
      m_pred[0] = mu0;
      P_pred[0] = Sigma0;
    } else {
      m_pred[l] = F * m_filt[l - 1] + c;
      P_pred[l] = F * P_filt[l - 1] * F.transpose() + W;
    }
    Vec m = m_pred[l];
    Mat P = P_pred[l];
    while (next < obs_idx.size() && obs_idx[next] == l) {
      const Mat S = P + Sigma_x;
      const Mat K = P * S.inverse();
      m = m + K * (obs_values[next] - m);
      P = P - K * P;
      P = 0.5 * (P + P.transpose()).eval();
      ++next;
    }
    m_filt[l] = m;
    P_filt[l] = P;
  }
  SmootherResult out;
  out.mean.resize(steps + 1);
  out.cov.resize(steps + 1);
  out.mean[steps] = m_filt[steps];
  out.cov[steps] = P_filt[steps];
  for (int l = steps - 1; l >= 0; --l) {
    const Mat G = P_filt[l] * F.transpose() * P_pred[l + 1].inverse();
    out.mean[l] = m_filt[l] + G * (out.mean[l + 1] - m_pred[l + 1]);
    Mat P = P_filt[l] + G * (out.cov[l + 1] - P_pred[l + 1]) * G.transpose();
    out.cov[l] = 0.5 * (P + P.transpose());
  }
  return out;
}

std::pair<Vec, Mat> prior_moments(const Mat& A, const Vec& b, const Mat& D, const Vec& mu0, const Mat& Sigma0,
                                  double t, int n_steps) {
  const double dt = t / n_steps;
  Vec m = mu0;
  Mat P = Sigma0;
  auto fm = [&](const Vec& x) -> Vec { return A * x + b; };
  auto fP = [&](const Mat& X) -> Mat { return A * X + X * A.transpose() + D; };
  for (int k = 0; k < n_steps; ++k) {
    const Vec k1 = fm(m), k2 = fm(m + 0.5 * dt * k1), k3 = fm(m + 0.5 * dt * k2), k4 = fm(m + dt * k3);
    m += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    const Mat q1 = fP(P), q2 = fP(P + 0.5 * dt * q1), q3 = fP(P + 0.5 * dt * q2), q4 = fP(P + dt * q3);
    P += dt / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4);
  }
  return {m, P};
}

Mat expm(const Mat& m) { return m.exp(); }

Mat hmm_forward_filter(const std::vector<Vec>& increments, const std::vector<Vec>& drifts, const Mat& D,
                       const Mat& rates, const Vec& pi, double h) {
  const auto K = pi.size();
  const auto L = static_cast<Eigen::Index>(increments.size());
  const Mat T = expm(rates * h);  // row-stochastic: T(a, c) = P(z_{l+1} = c | z_l = a)
  const Eigen::LLT<Mat> llt(D * h);
  Mat out(K, L + 1);
  Vec p = pi / pi.sum();
  out.col(0) = p;
  Vec logw(K);
  for (Eigen::Index l = 0; l < L; ++l) {
    for (Eigen::Index z = 0; z < K; ++z) {
      const Vec r = increments[static_cast<std::size_t>(l)] - drifts[static_cast<std::size_t>(z)] * h;
      logw[z] = -0.5 * r.dot(llt.solve(r));
    }
    const double mx = logw.maxCoeff();
    Vec post = p.cwiseProduct((logw.array() - mx).exp().matrix());
    post /= post.sum();
    p = T.transpose() * post;
    p /= p.sum();
    out.col(l + 1) = p;
  }
  return out;
}

Mat backward_master_marginals(const Mat& p_f, const Mat& rates, double h, int substeps) {
  const auto K = p_f.rows();
  const auto L = p_f.cols() - 1;
  Mat out(K, L + 1);
  Vec q = p_f.col(L);
  out.col(L) = q;
  const double dt = h / substeps;
  for (Eigen::Index l = L - 1; l >= 0; --l) {
    // Generator G(a, c) of the reversed chain in cell l.
    Mat G = Mat::Zero(K, K);
    for (Eigen::Index a = 0; a < K; ++a) {
      const double denom = std::max(p_f(a, l), 1e-12);
      for (Eigen::Index c = 0; c < K; ++c) {
        if (c == a) continue;
        G(a, c) = p_f(c, l) * rates(c, a) / denom;
        G(a, a) -= G(a, c);
      }
    }
    const Mat Gt = G.transpose();
    for (int s = 0; s < substeps; ++s) {
      const Vec k1 = Gt * q, k2 = Gt * (q + 0.5 * dt * k1), k3 = Gt * (q + 0.5 * dt * k2), k4 = Gt * (q + dt * k3);
      q += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    out.col(l) = q;
  }
  return out;
}

double batch_means_ess(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  const std::size_t size = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const std::size_t count = n / size;
  std::vector<double> means;
  for (std::size_t k = 0; k < count; ++k) {
    means.push_back(std::accumulate(trace.begin() + static_cast<long>(k * size),
                                    trace.begin() + static_cast<long>((k + 1) * size), 0.0) /
                    static_cast<double>(size));
  }
  const std::size_t used = count * size;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(count);
  double s2 = 0.0;
  for (std::size_t i = 0; i < used; ++i) s2 += (trace[i] - grand) * (trace[i] - grand);
  s2 /= static_cast<double>(used - 1);
  double sb = 0.0;
  for (double m : means) sb += (m - grand) * (m - grand);
  const double sigma2 = static_cast<double>(size) * sb / static_cast<double>(count - 1);
  if (s2 == 0.0 || sigma2 == 0.0) return static_cast<double>(n);
  return std::min(static_cast<double>(n), static_cast<double>(used) * s2 / sigma2);
}

}  // namespace oracle
