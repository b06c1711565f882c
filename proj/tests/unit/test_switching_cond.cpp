#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "ssde/errors.hpp"
#include "ssde/sim.hpp"
#include "ssde/switching_cond.hpp"

using namespace ssde;
using namespace testing;

namespace {

struct FilterFixture {
  TimeGrid grid{4.0, 0.01};
  RateMatrix rates;
  std::vector<ModeDynamics> modes;
  FilterTrajectory ft;
};

// Three-mode scalar model with distinct set points; the filter is driven by a
// simulated path so that p_f moves between modes.
FilterFixture three_mode_filter(std::uint64_t seed) {
  FilterFixture f;
  Mat gen(3, 3);
  gen << -1.0, 0.6, 0.4, 0.5, -1.0, 0.5, 0.3, 0.9, -1.2;
  f.rates = RateMatrix(gen);
  f.modes = {ModeDynamics(scalar(-1.0), vec1(-1.0), scalar(0.8)), ModeDynamics(scalar(-1.0), vec1(0.0), scalar(0.8)),
             ModeDynamics(scalar(-1.0), vec1(1.2), scalar(0.8))};
  Rng rng(seed);
  const Vec pi = Vec::Constant(3, 1.0 / 3.0);
  const auto z = simulate_mjp(f.rates, pi, f.grid.horizon(), rng);
  const auto y = simulate_ssde(z, f.modes, vec1(0.0), f.grid, rng);
  f.ft = run_ks_filter(y, f.modes, f.rates, pi, f.grid);
  return f;
}

}  // namespace

TEST_SUITE("switching_cond") {
  TEST_CASE("single mode filter is identically one") {
    Rng rng(1);
    TimeGrid grid(1.0, 0.01);
    const std::vector<ModeDynamics> modes{ModeDynamics(scalar(-1.0), vec1(0.0), scalar(1.0))};
    const auto y = simulate_ssde(MjpPath::constant(0, 1.0), modes, vec1(0.0), grid, rng);
    const auto ft = run_ks_filter(y, modes, RateMatrix(scalar(0.0)), vec1(1.0), grid);
    CHECK((ft.p.array() == 1.0).all());
  }

  TEST_CASE("identical modes reduce the filter to the prior master equation") {
    Rng rng(2);
    TimeGrid grid(3.0, 1e-3);
    const ModeDynamics m(scalar(-0.5), vec1(0.2), scalar(0.7));
    const std::vector<ModeDynamics> modes{m, m, m};
    Mat gen(3, 3);
    gen << -1.5, 1.0, 0.5, 0.2, -0.2, 0.0, 0.7, 0.8, -1.5;
    const RateMatrix rates(gen);
    const Vec pi = (Vec(3) << 0.7, 0.2, 0.1).finished();
    const auto y = simulate_ssde(MjpPath::constant(0, 3.0), modes, vec1(0.0), grid, rng);
    const auto ft = run_ks_filter(y, modes, rates, pi, grid);
    for (int l = 0; l < grid.points(); l += 100) {
      const Vec exact = oracle::expm(gen.transpose() * grid.time(l)) * pi;
      CHECK((ft.at(l) - exact).cwiseAbs().maxCoeff() < 1e-3);
    }
  }

  TEST_CASE("state-independent drifts reproduce the discrete HMM filter") {
    Rng rng(3);
    TimeGrid grid(5.0, 1e-3);
    const Mat gen = mat2(-2.0, 2.0, 2.0, -2.0);
    const RateMatrix rates(gen);
    const std::vector<ModeDynamics> modes{ModeDynamics(scalar(0.0), vec1(-0.5), scalar(1.0)),
                                          ModeDynamics(scalar(0.0), vec1(0.5), scalar(1.0))};
    const Vec pi = vec2(0.5, 0.5);
    const auto z = simulate_mjp(rates, pi, grid.horizon(), rng);
    const auto y = simulate_ssde(z, modes, vec1(0.0), grid, rng);
    const auto ft = run_ks_filter(y, modes, rates, pi, grid);
    std::vector<oracle::Vec> inc;
    for (int l = 0; l < grid.steps(); ++l) inc.push_back(y.at(l + 1) - y.at(l));
    const Mat ref = oracle::hmm_forward_filter(inc, {modes[0].b(), modes[1].b()}, modes[0].D(), gen, pi, grid.step());
    CHECK((ft.p - ref).cwiseAbs().maxCoeff() < 0.02);
  }

  TEST_CASE("filter output stays on the simplex") {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
      const auto f = three_mode_filter(seed);
      for (int l = 0; l < f.grid.points(); ++l) {
        CHECK(std::abs(f.ft.at(l).sum() - 1.0) <= 1e-9);
        CHECK(f.ft.at(l).minCoeff() >= 0.0);
      }
    }
  }

  TEST_CASE("backward rates examples") {
    const RateMatrix sym(mat2(-1.5, 1.5, 1.5, -1.5));
    CHECK((backward_rates(vec2(0.5, 0.5), sym) - sym.matrix()).norm() < 1e-15);

    const RateMatrix gen(mat2(-1.0, 1.0, 3.0, -3.0));
    const Mat R = backward_rates(vec2(0.8, 0.2), gen);
    // Backward from mode 2 into mode 1: p_f(1) Lambda(1, 2) / p_f(2).
    CHECK(R(1, 0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(R(0, 1) == doctest::Approx(0.2 * 3.0 / 0.8).epsilon(1e-14));

    const Mat floored = backward_rates(vec2(1.0, 0.0), gen);
    CHECK(floored.allFinite());
  }

  TEST_CASE("backward rates have zero row sums and non-negative off-diagonals") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      Vec p = random_matrix(4, 1, rng).cwiseAbs() + Vec::Constant(4, 0.01);
      p /= p.sum();
      const auto gen = RateMatrix::from_offdiagonal(random_matrix(4, 4, rng).cwiseAbs());
      const Mat R = backward_rates(p, gen);
      for (int a = 0; a < 4; ++a) {
        CHECK(std::abs(R.row(a).sum()) <= 1e-12 * std::max(1.0, -R(a, a)));
        for (int c = 0; c < 4; ++c) {
          if (c != a) CHECK(R(a, c) >= 0.0);
        }
      }
    }
  }

  TEST_CASE("concentrated filter yields constant paths") {
    TimeGrid grid(5.0, 0.01);
    FilterTrajectory ft{Mat(2, grid.points())};
    ft.p.row(0).setConstant(1.0 - 1e-10);
    ft.p.row(1).setConstant(1e-10);
    const RateMatrix gen(mat2(-1.0, 1.0, 1.0, -1.0));
    Rng rng(5);
    int constant = 0;
    for (int d = 0; d < 1000; ++d) {
      const auto z = sample_conditional_switching(ft, gen, grid, rng);
      if (z.num_jumps() == 0 && z.initial_mode() == 0) ++constant;
    }
    CHECK(constant >= 1000 - 1);
  }

  TEST_CASE("terminal mode frequencies match the terminal filter") {
    const auto f = three_mode_filter(20);
    Rng rng(6);
    const int draws = 10000;
    Vec counts = Vec::Zero(3);
    for (int d = 0; d < draws; ++d) counts[sample_conditional_switching(f.ft, f.rates, f.grid, rng).final_mode()] += 1.0;
    const Vec pT = f.ft.at(f.grid.steps());
    for (int k = 0; k < 3; ++k) {
      const double se = std::sqrt(pT[k] * (1.0 - pT[k]) / draws);
      CHECK(std::abs(counts[k] / draws - pT[k]) <= 3.0 * se + 1e-12);
    }
  }

  TEST_CASE("time marginals of backward draws solve the backward master equation") {
    const auto f = three_mode_filter(21);
    const Mat marg = oracle::backward_master_marginals(f.ft.p, f.rates.matrix(), f.grid.step(), 20);
    CHECK((marg.col(f.grid.steps()) - f.ft.at(f.grid.steps())).norm() == 0.0);
    Rng rng(7);
    const int draws = 4000;
    std::vector<int> probes;
    for (int k = 1; k <= 10; ++k) probes.push_back(static_cast<int>(f.grid.steps() * (k - 0.5) / 10.0));
    Mat counts = Mat::Zero(3, static_cast<Eigen::Index>(probes.size()));
    for (int d = 0; d < draws; ++d) {
      const auto z = sample_conditional_switching(f.ft, f.rates, f.grid, rng);
      for (std::size_t j = 0; j < probes.size(); ++j) counts(z.mode_at(f.grid.time(probes[j])), static_cast<Eigen::Index>(j)) += 1.0;
    }
    for (std::size_t j = 0; j < probes.size(); ++j) {
      for (int k = 0; k < 3; ++k) {
        const double p = marg(k, probes[j]);
        const double se = std::sqrt(p * (1.0 - p) / draws);
        CHECK(std::abs(counts(k, static_cast<Eigen::Index>(j)) / draws - p) <= 3.0 * se + 1e-12);
      }
    }
  }

  TEST_CASE("thinning with constant backward rates gives exponential sojourns") {
    TimeGrid grid(100.0, 0.01);
    FilterTrajectory ft{Mat::Constant(2, grid.points(), 0.5)};
    const RateMatrix gen(mat2(-1.0, 1.0, 1.0, -1.0));
    Rng rng(8);
    std::vector<double> soj;
    while (soj.size() < 10000) {
      const auto z = sample_conditional_switching(ft, gen, grid, rng);
      const auto s = z.sojourn_times();
      for (std::size_t k = 1; k + 1 < s.size(); ++k) soj.push_back(s[k]);
    }
    CHECK(oracle::ks_one_sample_pvalue(soj, [](double x) { return 1.0 - std::exp(-x); }) > 0.01);
  }

  TEST_CASE("sharp filter spikes do not stall backward sampling") {
    TimeGrid grid(2.0, 1e-3);
    FilterTrajectory ft{Mat(2, grid.points())};
    for (int l = 0; l < grid.points(); ++l) {
      const double p = (l % 200 < 3) ? 1e-14 : 0.6;
      ft.p(0, l) = p;
      ft.p(1, l) = 1.0 - p;
    }
    const RateMatrix gen(mat2(-2.0, 2.0, 2.0, -2.0));
    Rng rng(9);
    for (int d = 0; d < 200; ++d) CHECK_NOTHROW(sample_conditional_switching(ft, gen, grid, rng).validate(2));
  }
}
