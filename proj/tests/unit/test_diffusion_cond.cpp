#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "ssde/diffusion_cond.hpp"
#include "ssde/kalman_oracle.hpp"
#include "ssde/sim.hpp"

using namespace ssde;
using namespace testing;

namespace {

double normal_cdf(double x, double mean, double var) { return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var)); }

std::vector<ModeDynamics> scalar_mode(double A, double b, double D) {
  return {ModeDynamics(scalar(A), vec1(b), scalar(std::sqrt(D)))};
}

}  // namespace

TEST_SUITE("diffusion_cond") {
  TEST_CASE("no observations leave I and a at zero") {
    Rng rng(1);
    auto inst = random_filter_instance(rng, 2, 2, 1);
    inst.obs = ObservationSet{{}, Mat(2, 0)};
    const auto info = run_information_filter(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
    for (int l = 0; l < inst.grid.points(); ++l) {
      CHECK(info.I(l).norm() == 0.0);
      CHECK(info.a(l).norm() == 0.0);
    }
    const auto oracle = run_kalman_backward_oracle(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
    CHECK(oracle.at(0).rows() == 0);
    CHECK(oracle.log_beta(0, vec2(1.0, 2.0)) == 0.0);
  }

  TEST_CASE("single terminal observation of Brownian motion has I = 1 / (Sigma_x + T - t)") {
    const double Sx = 0.3;
    TimeGrid grid(2.0, 0.01);
    const auto modes = scalar_mode(0.0, 0.0, 1.0);
    const ObservationSet obs{{2.0}, scalar(0.7)};
    const auto z = MjpPath::constant(0, 2.0);
    const auto info = run_information_filter(z, modes, obs, scalar(Sx), grid);
    const auto oracle = run_kalman_backward_oracle(z, modes, obs, scalar(Sx), grid);
    CHECK(info.I_right(grid.steps()).norm() == 0.0);
    CHECK(info.a_right(grid.steps()).norm() == 0.0);
    for (int l = 0; l < grid.points(); ++l) {
      const double t = grid.time(l);
      const double expected = 1.0 / (Sx + (grid.horizon() - t));
      CHECK(info.I(l)(0, 0) == doctest::Approx(expected).epsilon(1e-7));
      CHECK(info.a(l)[0] == doctest::Approx(0.7 * expected).epsilon(1e-7));
      CHECK(oracle.at(l).F(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(oracle.at(l).m[0]) < 1e-12);
      CHECK(oracle.at(l).Sigma(0, 0) == doctest::Approx(Sx + grid.horizon() - t).epsilon(1e-9));
    }
    // With A = b = 0, I grows forward in time between observations.
    for (int l = 0; l + 1 < grid.points(); ++l) CHECK(info.I(l + 1)(0, 0) >= info.I(l)(0, 0));
  }

  TEST_CASE("scalar Riccati error shrinks at fourth order") {
    const double Sx = 1.0;
    const auto modes = scalar_mode(0.0, 0.0, 1.0);
    const ObservationSet obs{{2.0}, scalar(0.7)};
    const auto z = MjpPath::constant(0, 2.0);
    double err[2];
    for (int k = 0; k < 2; ++k) {
      TimeGrid grid(2.0, 0.02 / (1 << k));
      const auto info = run_information_filter(z, modes, obs, scalar(Sx), grid);
      err[k] = std::abs(info.I(0)(0, 0) - 1.0 / (Sx + 2.0));
    }
    CHECK(err[0] / err[1] == doctest::Approx(16.0).epsilon(0.1));
  }

  TEST_CASE("information filter gradient agrees with the Kalman-form oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
      const auto inst = random_filter_instance(rng, 2, 2, 8);
      const auto info = run_information_filter(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
      const auto oracle = run_kalman_backward_oracle(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
      double worst = 0.0;
      for (int l = 0; l < inst.grid.points(); ++l) {
        const Vec y = random_matrix(2, 1, rng);
        worst = std::max(worst, (info.gradient(l, y) - oracle.gradient(l, y)).cwiseAbs().maxCoeff());
      }
      CHECK(worst < 1e-6);
    }
  }

  TEST_CASE("I stays symmetric and positive semidefinite") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const auto inst = random_filter_instance(rng, 3, 3, 20);
      const auto info = run_information_filter(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
      for (int l = 0; l < inst.grid.points(); ++l) {
        const Mat I = info.I(l);
        CHECK((I - I.transpose()).norm() <= 1e-9);
        CHECK(Eigen::SelfAdjointEigenSolver<Mat>(I).eigenvalues().minCoeff() >= -1e-9);
      }
    }
  }

  TEST_CASE("gradient of log beta matches central differences of the oracle") {
    Rng rng(4);
    const auto inst = random_filter_instance(rng, 2, 2, 6);
    const auto info = run_information_filter(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
    const auto oracle = run_kalman_backward_oracle(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
    const int last_obs = inst.grid.snap(inst.obs.times.back());
    for (int k = 0; k < 10; ++k) {
      const int l = static_cast<int>(rng.uniform() * last_obs);
      const Vec y = random_matrix(2, 1, rng);
      const Vec g = info.gradient(l, y);
      Vec fd(2);
      const double eps = 1e-5;
      for (int i = 0; i < 2; ++i) {
        Vec up = y, down = y;
        up[i] += eps;
        down[i] -= eps;
        fd[i] = (oracle.log_beta(l, up) - oracle.log_beta(l, down)) / (2.0 * eps);
      }
      CHECK((g - fd).norm() / std::max(1e-3, fd.norm()) < 1e-4);
    }
  }

  TEST_CASE("posterior initial law formulas") {
    auto [m0, S0] = posterior_initial_law(Mat::Zero(2, 2), Vec::Zero(2), vec2(1.0, -1.0), mat2(2.0, 0.3, 0.3, 1.0));
    CHECK((m0 - vec2(1.0, -1.0)).norm() < 1e-14);
    CHECK((S0 - mat2(2.0, 0.3, 0.3, 1.0)).norm() < 1e-14);

    auto [m1, S1] = posterior_initial_law(scalar(1.0), vec1(2.0), vec1(0.0), scalar(1.0));
    CHECK(S1(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(m1[0] == doctest::Approx(1.0).epsilon(1e-14));

    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const Mat Sigma0 = random_spd(3, rng);
      const Mat I0 = random_spd(3, rng, 0.0);
      const auto [mean, cov] = posterior_initial_law(I0, random_matrix(3, 1, rng), random_matrix(3, 1, rng), Sigma0);
      CHECK(Eigen::SelfAdjointEigenSolver<Mat>(cov).eigenvalues().minCoeff() > 0.0);
      CHECK(Eigen::SelfAdjointEigenSolver<Mat>(Sigma0 - cov).eigenvalues().minCoeff() >= -1e-12);
    }
  }

  TEST_CASE("without data the posterior drift is the prior drift") {
    Rng rng(6);
    auto inst = random_filter_instance(rng, 2, 2, 1);
    inst.obs = ObservationSet{{}, Mat(2, 0)};
    const auto info = run_information_filter(inst.z, inst.modes, inst.obs, inst.Sigma_x, inst.grid);
    const auto mode = inst.z.on_grid(inst.grid);
    for (int l = 0; l < inst.grid.steps(); ++l) {
      const auto& m = inst.modes[static_cast<std::size_t>(mode[static_cast<std::size_t>(l)])];
      const Vec y = random_matrix(2, 1, rng);
      CHECK(posterior_drift(m, info, l, y) == m.A() * y + m.b());
    }
  }

  TEST_CASE("posterior draws match the RTS smoother for a single mode") {
    const double A = -1.0, b = 1.0, D = 0.5, Sx = 0.1;
    TimeGrid grid(2.0, 1e-3);
    const auto modes = scalar_mode(A, b, D);
    const auto z = MjpPath::constant(0, grid.horizon());
    Rng rng(7);
    const std::vector<double> times{0.5, 1.0, 1.5, 2.0};
    ObservationSet obs{times, Mat(1, 4)};
    obs.values << 0.8, 0.3, 1.4, 0.9;
    const InitialLaw init{vec1(1.0), vec1(0.0), scalar(1.0)};
    const auto info = run_information_filter(z, modes, obs, scalar(Sx), grid);

    const int draws = 5000;
    const auto idx = obs.grid_indices(grid);
    std::vector<std::vector<double>> at_obs(idx.size());
    for (int d = 0; d < draws; ++d) {
      const auto y = sample_conditional_diffusion(z, info, modes, init, grid, rng);
      for (std::size_t i = 0; i < idx.size(); ++i) at_obs[i].push_back(y.at(idx[i])[0]);
    }
    std::vector<oracle::Vec> values;
    for (int i = 0; i < 4; ++i) values.push_back(obs.values.col(i));
    const auto rts = oracle::rts_smoother(scalar(A), vec1(b), scalar(D), scalar(Sx), vec1(0.0), scalar(1.0),
                                          grid.step(), grid.steps(), idx, values);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double se = std::sqrt(variance(at_obs[i]) / draws);
      CHECK(std::abs(mean(at_obs[i]) - rts.mean[static_cast<std::size_t>(idx[i])][0]) < 3.0 * se);
    }
  }

  TEST_CASE("without data the endpoint moments follow the prior moment equations") {
    const Mat A = mat2(-1.0, 0.5, -0.5, -1.5);
    const Vec b = vec2(1.0, -0.5);
    const Mat D = mat2(0.5, 0.1, 0.1, 0.3);
    const std::vector<ModeDynamics> modes{ModeDynamics::from_covariance(A, b, D)};
    TimeGrid grid(1.0, 1e-3);
    const auto z = MjpPath::constant(0, 1.0);
    const ObservationSet obs{{}, Mat(2, 0)};
    const InitialLaw init{vec1(1.0), vec2(0.5, 0.0), mat2(0.2, 0.0, 0.0, 0.4)};
    const auto info = run_information_filter(z, modes, obs, Mat::Identity(2, 2), grid);
    Rng rng(8);
    const int draws = 5000;
    std::vector<double> y1, y2;
    for (int d = 0; d < draws; ++d) {
      const auto y = sample_conditional_diffusion(z, info, modes, init, grid, rng);
      y1.push_back(y.at(grid.steps())[0]);
      y2.push_back(y.at(grid.steps())[1]);
    }
    const auto [m, P] = oracle::prior_moments(A, b, D, init.mu0, init.Sigma0, 1.0, 1000);
    CHECK(std::abs(mean(y1) - m[0]) < 3.0 * std::sqrt(P(0, 0) / draws));
    CHECK(std::abs(mean(y2) - m[1]) < 3.0 * std::sqrt(P(1, 1) / draws));
    CHECK(std::abs(variance(y1) - P(0, 0)) < 3.0 * P(0, 0) * std::sqrt(2.0 / (draws - 1)));
    CHECK(std::abs(variance(y2) - P(1, 1)) < 3.0 * P(1, 1) * std::sqrt(2.0 / (draws - 1)));
  }

  TEST_CASE("posterior marginal of Brownian motion matches the Gaussian smoothing law") {
    // y(0) ~ N(0, 1), dy = dW, x = y(1) + N(0, Sx): y(t) | x is Gaussian with
    // mean (1 + t) x / (2 + Sx) and variance (1 + t) - (1 + t)^2 / (2 + Sx).
    const double Sx = 0.1, x = 1.5, t = 0.5;
    TimeGrid grid(1.0, 5e-3);
    const auto modes = scalar_mode(0.0, 0.0, 1.0);
    const auto z = MjpPath::constant(0, 1.0);
    const ObservationSet obs{{1.0}, scalar(x)};
    const InitialLaw init{vec1(1.0), vec1(0.0), scalar(1.0)};
    const auto info = run_information_filter(z, modes, obs, scalar(Sx), grid);
    Rng rng(9);
    std::vector<double> sample;
    const int l = grid.snap(t);
    for (int d = 0; d < 10000; ++d) sample.push_back(sample_conditional_diffusion(z, info, modes, init, grid, rng).at(l)[0]);
    const double m = (1.0 + t) * x / (2.0 + Sx);
    const double v = (1.0 + t) - (1.0 + t) * (1.0 + t) / (2.0 + Sx);
    CHECK(oracle::ks_one_sample_pvalue(sample, [&](double s) { return normal_cdf(s, m, v); }) > 0.01);
  }

  TEST_CASE("Euler posterior step agrees with the Gaussian step in distribution") {
    const double Sx = 0.2, x = -0.7;
    TimeGrid grid(1.0, 1e-3);
    const auto modes = scalar_mode(-0.5, 0.3, 0.8);
    const auto z = MjpPath::constant(0, 1.0);
    const ObservationSet obs{{0.6}, scalar(x)};
    const InitialLaw init{vec1(1.0), vec1(0.0), scalar(1.0)};
    const auto info = run_information_filter(z, modes, obs, scalar(Sx), grid);
    Rng rng(10);
    std::vector<double> gauss, euler;
    for (int d = 0; d < 4000; ++d) {
      gauss.push_back(sample_conditional_diffusion(z, info, modes, init, grid, rng).at(800)[0]);
      euler.push_back(sample_conditional_diffusion(z, info, modes, init, grid, rng, PosteriorStep::kEuler).at(800)[0]);
    }
    CHECK(oracle::ks_two_sample_pvalue(gauss, euler) > 0.01);
  }
}
