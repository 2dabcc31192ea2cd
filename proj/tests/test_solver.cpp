#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "qot/config.hpp"
#include "qot/cost.hpp"
#include "qot/solver.hpp"
#include "support.hpp"

using namespace qot;
using namespace qot::testing;

namespace {

PsdMat scalar_psd(double x, int d = 1) { return PsdMat::make(SymMat::identity(d, x)); }

TensorMeasure scalar_measure(const std::vector<double>& mass, const std::vector<Point>& pts, int d = 1) {
  std::vector<PsdMat> ts;
  for (double m : mass) ts.push_back(scalar_psd(m, d));
  return TensorMeasure(pts, ts);
}

std::vector<double> random_masses(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  std::vector<double> m(n);
  for (double& x : m) x = u(rng);
  return m;
}

SolverConfig sinkhorn_cfg(double eps, double rho1, double rho2) {
  SolverConfig cfg;
  cfg.eps = eps;
  cfg.rho1 = rho1;
  cfg.rho2 = rho2;
  cfg.tau1 = eps / (eps + rho1);
  cfg.tau2 = eps / (eps + rho2);
  return cfg;
}

}  // namespace

TEST_CASE("1x1 scalar instance matches the first-order condition") {
  const TensorMeasure mu({{0.0}}, {scalar_psd(2.0)});
  SolverConfig cfg;
  cfg.eps = 0.01;
  cfg.tol = 1e-12;
  const SolveResult r = sinkhorn_solve(mu, mu, GroundCost::isotropic(1, 1, {0.0}), cfg);
  CHECK(r.report.converged);
  // 2 rho log(g / 2) + eps log g = 0
  const double expected = std::pow(2.0, 2.0 / (2.0 + cfg.eps));
  CHECK(r.coupling.at(0, 0).mat()(0, 0) == doctest::Approx(expected).epsilon(1e-8));
  CHECK(expected == doctest::Approx(1.9931).epsilon(1e-4));
}

TEST_CASE("scalar iterates match the scaling-form oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 8, m = 6;
    const auto xs = random_points(rng, n, 1), ys = random_points(rng, m, 1);
    const auto a = random_masses(rng, n), b = random_masses(rng, m);
    const GroundCost cost = euclidean_cost(xs, ys, 2.0);
    const double eps = 0.05, rho1 = 0.7, rho2 = 1.3;
    SolverConfig cfg = sinkhorn_cfg(eps, rho1, rho2);
    cfg.max_iter = 40;
    ScalarSinkhorn oracle(a, b, cost.scalars(), eps, rho1, rho2);
    double worst = 0.0;
    sinkhorn_solve(scalar_measure(a, xs), scalar_measure(b, ys), cost, cfg,
                   [&](int, const DualState& s) {
                     oracle.step();
                     for (std::size_t i = 0; i < n; ++i)
                       worst = std::max(worst, std::abs(s.u[i](0, 0) - oracle.u(i)));
                     for (std::size_t j = 0; j < m; ++j)
                       worst = std::max(worst, std::abs(s.v[j](0, 0) - oracle.v(j)));
                   });
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("isotropic inputs give isotropic scalar plans") {
  std::mt19937_64 rng(22);
  const std::size_t n = 5, m = 4;
  const auto xs = random_points(rng, n, 2), ys = random_points(rng, m, 2);
  const auto a = random_masses(rng, n), b = random_masses(rng, m);
  const GroundCost cost = euclidean_cost(xs, ys, 2.0);
  SolverConfig cfg = sinkhorn_cfg(0.05, 1.0, 1.0);
  cfg.tol = 1e-13;
  const SolveResult r3 = sinkhorn_solve(scalar_measure(a, xs, 3), scalar_measure(b, ys, 3), cost, cfg);
  const SolveResult r1 = sinkhorn_solve(scalar_measure(a, xs), scalar_measure(b, ys), cost, cfg);
  REQUIRE(r3.report.converged);
  ScalarSinkhorn oracle(a, b, cost.scalars(), 0.05, 1.0, 1.0);
  for (int k = 0; k < 5000; ++k) oracle.step();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const SymMat& g = r3.coupling.at(i, j).mat();
      CHECK(std::abs(g(0, 1)) < 1e-14);
      CHECK(std::abs(g(1, 2)) < 1e-14);
      CHECK(g(0, 0) == doctest::Approx(g(2, 2)).epsilon(1e-12));
      CHECK(g(0, 0) == doctest::Approx(oracle.plan(i, j)).epsilon(1e-9));
      CHECK(r1.coupling.at(i, j).mat()(0, 0) == doctest::Approx(oracle.plan(i, j)).epsilon(1e-9));
    }
}

TEST_CASE("commuting diagonal inputs decouple into scalar solves") {
  std::mt19937_64 rng(23);
  const std::size_t n = 6, m = 5;
  const auto xs = random_points(rng, n, 2), ys = random_points(rng, m, 2);
  const auto a0 = random_masses(rng, n), a1 = random_masses(rng, n);
  const auto b0 = random_masses(rng, m), b1 = random_masses(rng, m);
  std::vector<PsdMat> mu, nu;
  for (std::size_t i = 0; i < n; ++i) mu.push_back(PsdMat::make(SymMat::diagonal(std::vector{a0[i], a1[i]})));
  for (std::size_t j = 0; j < m; ++j) nu.push_back(PsdMat::make(SymMat::diagonal(std::vector{b0[j], b1[j]})));
  const GroundCost cost = euclidean_cost(xs, ys, 2.0);
  SolverConfig cfg;
  cfg.eps = 0.02;
  cfg.tol = 1e-13;
  const SolveResult r = sinkhorn_solve(TensorMeasure(xs, mu), TensorMeasure(ys, nu), cost, cfg);
  const SolveResult s0 = sinkhorn_solve(scalar_measure(a0, xs), scalar_measure(b0, ys), cost, cfg);
  const SolveResult s1 = sinkhorn_solve(scalar_measure(a1, xs), scalar_measure(b1, ys), cost, cfg);
  REQUIRE(r.report.converged);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const SymMat& g = r.coupling.at(i, j).mat();
      CHECK(std::abs(g(0, 1)) < 1e-8);
      CHECK(std::abs(g(0, 0) - s0.coupling.at(i, j).mat()(0, 0)) < 1e-8);
      CHECK(std::abs(g(1, 1) - s1.coupling.at(i, j).mat()(0, 0)) < 1e-8);
    }
}

TEST_CASE("duality and fixed-point certificates") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 4; ++trial) {
    const TensorMeasure mu = random_measure(rng, 4, 2), nu = random_measure(rng, 4, 2);
    const GroundCost cost = euclidean_cost(mu.points(), nu.points(), 2.0);
    SolverConfig cfg;
    cfg.eps = 0.05;
    cfg.tol = 1e-10;
    double worst_weak = -kInf;
    const SolveResult r = sinkhorn_solve(mu, nu, cost, cfg, [&](int, const DualState& s) {
      const double dual = dual_objective(s, mu, nu, cost, cfg);
      const double primal = primal_objective(coupling_from_state(s, cost, cfg), mu, nu, cost, cfg);
      worst_weak = std::max(worst_weak, dual - primal);
    });
    REQUIRE(r.report.converged);
    const double p = r.report.primal_value, d = r.report.dual_value;
    CHECK(std::abs(p - d) / (1 + std::abs(p)) < 1e-6);
    CHECK(p == doctest::Approx(primal_objective(r.coupling, mu, nu, cost, cfg)));
    CHECK(worst_weak <= 1e-9);
    CHECK(fixed_point_residual(r.state, mu, nu, cost, cfg) < 1e-8);

    // first-order condition: sum_j exp(K_ij) = exp(u_i + log mu_i)
    const auto rows = marginal_rows(r.coupling);
    for (std::size_t i = 0; i < 4; ++i) {
      const SymMat target = exp_sym(r.state.u[i] + log_sym(mu.tensors()[i])).mat();
      CHECK((rows[i].mat() - target).max_abs() < 1e-6);
    }
  }
}

TEST_CASE("dual objective at zero potentials") {
  std::mt19937_64 rng(25);
  const TensorMeasure mu = random_measure(rng, 3, 2);
  const GroundCost zero = GroundCost::isotropic(3, 3, std::vector<double>(9, 0.0));
  SolverConfig cfg;
  cfg.eps = 0.1;
  const double value = dual_objective(DualState::zeros(3, 3, 2), mu, mu, zero, cfg);
  CHECK(value == doctest::Approx(-0.1 * 3 * 3 * 2).epsilon(1e-12));
}

TEST_CASE("fixed-point residual") {
  std::mt19937_64 rng(26);
  const TensorMeasure mu = random_measure(rng, 4, 2), nu = random_measure(rng, 3, 2);
  const GroundCost cost = euclidean_cost(mu.points(), nu.points(), 2.0);
  SolverConfig cfg;
  cfg.eps = 0.05;
  CHECK(fixed_point_residual(DualState::zeros(4, 3, 2), mu, nu, cost, cfg) > 0.0);

  // permuting the index sets permutes the state and leaves the residual alone
  const DualState s = sinkhorn_solve(mu, nu, cost, [&] {
                        SolverConfig c = cfg;
                        c.max_iter = 7;
                        return c;
                      }()).state;
  const std::vector<std::size_t> pi{2, 0, 3, 1}, pj{1, 2, 0};
  std::vector<Point> px, py;
  std::vector<PsdMat> pm, pn;
  DualState ps = s;
  std::vector<double> pc;
  for (std::size_t i = 0; i < 4; ++i) {
    px.push_back(mu.points()[pi[i]]);
    pm.push_back(mu.tensors()[pi[i]]);
    ps.u[i] = s.u[pi[i]];
  }
  for (std::size_t j = 0; j < 3; ++j) {
    py.push_back(nu.points()[pj[j]]);
    pn.push_back(nu.tensors()[pj[j]]);
    ps.v[j] = s.v[pj[j]];
  }
  const TensorMeasure pmu(px, pm), pnu(py, pn);
  const GroundCost pcost = euclidean_cost(px, py, 2.0);
  CHECK(fixed_point_residual(ps, pmu, pnu, pcost, cfg) ==
        doctest::Approx(fixed_point_residual(s, mu, nu, cost, cfg)).epsilon(1e-12));
}

TEST_CASE("residual history is nonincreasing in the contractive range") {
  std::mt19937_64 rng(27);
  const auto xs = random_points(rng, 10, 1), ys = random_points(rng, 10, 1);
  const auto a = random_masses(rng, 10), b = random_masses(rng, 10);
  const SolverConfig cfg = sinkhorn_cfg(0.05, 1.0, 1.0);
  const SolveResult r = sinkhorn_solve(scalar_measure(a, xs, 2), scalar_measure(b, ys, 2),
                                       euclidean_cost(xs, ys, 2.0), cfg);
  REQUIRE(r.report.converged);
  const auto& h = r.report.residual_history;
  for (std::size_t k = 11; k < h.size(); ++k) CHECK(h[k] <= h[k - 1] * (1 + 1e-9));
}

TEST_CASE("linear convergence and the effect of relaxation") {
  const auto [mu, nu] = bump_pair_1d(32);
  const GroundCost cost = euclidean_cost(mu.points(), nu.points(), 2.0);
  auto run = [&](double relax) {
    SolverConfig cfg;
    cfg.relax = relax;
    cfg.tol = 1e-9;
    const SolveResult r = sinkhorn_solve(mu, nu, cost, cfg);
    REQUIRE(r.report.converged);
    std::vector<double> tail;
    const auto& h = r.report.residual_history;
    for (std::size_t k = h.size() / 2; k < h.size(); ++k) tail.push_back(std::log10(h[k]));
    return line_fit(tail);
  };
  const auto [slope1, r2] = run(1.0);
  const auto [slope15, r2b] = run(1.5);
  CHECK(r2 > 0.99);
  CHECK(-slope15 > -slope1);
}

TEST_CASE("small eps stays finite") {
  std::mt19937_64 rng(28);
  const TensorMeasure mu = random_measure(rng, 16, 2), nu = random_measure(rng, 16, 2);
  SolverConfig cfg;
  cfg.eps = 1e-4;
  cfg.max_iter = 300;
  const SolveResult r = sinkhorn_solve(mu, nu, euclidean_cost(mu.points(), nu.points(), 2.0), cfg);
  CHECK_FALSE(r.report.diverged);
  for (const SymMat& u : r.state.u) CHECK(u.all_finite());
  for (const SymMat& v : r.state.v) CHECK(v.all_finite());
  for (const PsdMat& g : r.coupling.entries()) CHECK(g.mat().all_finite());
}

TEST_CASE("hard column marginal") {
  std::mt19937_64 rng(29);
  SUBCASE("isotropic: exact after every v-update with tau2 = 1") {
    const auto xs = random_points(rng, 6, 2), ys = random_points(rng, 5, 2);
    const auto a = random_masses(rng, 6), b = random_masses(rng, 5);
    const TensorMeasure mu = scalar_measure(a, xs, 2), nu = scalar_measure(b, ys, 2);
    const GroundCost cost = euclidean_cost(xs, ys, 2.0);
    SolverConfig cfg;
    cfg.eps = 0.05;
    cfg.rho2 = kInf;
    cfg.tau2 = 1.0;
    cfg.max_iter = 30;
    double worst = 0.0;
    sinkhorn_solve(mu, nu, cost, cfg, [&](int, const DualState& s) {
      const auto cols = marginal_cols(coupling_from_state(s, cost, cfg));
      for (std::size_t j = 0; j < 5; ++j)
        worst = std::max(worst, (cols[j].mat() - nu.tensors()[j].mat()).max_abs());
    });
    CHECK(worst < 1e-8);
  }
  SUBCASE("anisotropic: exact at convergence") {
    const TensorMeasure mu = random_measure(rng, 5, 2), nu = random_measure(rng, 4, 2);
    const GroundCost cost = euclidean_cost(mu.points(), nu.points(), 2.0);
    SolverConfig cfg;
    cfg.eps = 0.05;
    cfg.rho2 = kInf;
    cfg.tol = 1e-11;
    const SolveResult r = sinkhorn_solve(mu, nu, cost, cfg);
    REQUIRE(r.report.converged);
    const auto cols = marginal_cols(r.coupling);
    for (std::size_t j = 0; j < 4; ++j) CHECK((cols[j].mat() - nu.tensors()[j].mat()).max_abs() < 1e-8);
    CHECK(std::isfinite(r.report.primal_value));
    CHECK(std::abs(r.report.primal_value - r.report.dual_value) / (1 + std::abs(r.report.primal_value)) < 1e-6);
  }
}

TEST_CASE("trace-constrained solve") {
  SUBCASE("1x1 scalar zero cost reproduces mu") {
    for (double rho : {0.5, 1.0, 4.0}) {
      const TensorMeasure mu({{0.0}}, {scalar_psd(1.7)});
      SolverConfig cfg;
      cfg.eps = 0.05;
      cfg.rho1 = cfg.rho2 = rho;
      cfg.tol = 1e-12;
      const SolveResult r = sinkhorn_solve_trace(mu, mu, GroundCost::isotropic(1, 1, {0.0}), cfg);
      REQUIRE(r.report.converged);
      CHECK(std::abs(r.coupling.at(0, 0).mat()(0, 0) - 1.7) < 1e-10);
    }
  }
  SUBCASE("1x1 matrix zero cost: trace-normalized power of mu") {
    // Stationarity: (2 rho + eps) log g = 2 rho log mu - lambda Id, so g is
    // mu^(2 rho / (2 rho + eps)) rescaled to the trace of mu.
    std::mt19937_64 rng(30);
    for (double rho : {0.5, 1.0, 4.0}) {
      const TensorMeasure mu({{0.0}}, {PsdMat::make(random_pd(rng, 2))});
      SolverConfig cfg;
      cfg.eps = 0.05;
      cfg.rho1 = cfg.rho2 = rho;
      cfg.tol = 1e-12;
      const SolveResult r = sinkhorn_solve_trace(mu, mu, GroundCost::isotropic(1, 1, {0.0}), cfg);
      REQUIRE(r.report.converged);
      const double p = 2 * rho / (2 * rho + cfg.eps);
      SymMat expected = spectral_apply(eig_sym(mu.tensors()[0].mat()), [p](double x) { return std::pow(x, p); });
      expected *= mu.tensors()[0].trace() / expected.trace();
      CHECK((r.coupling.at(0, 0).mat() - expected).max_abs() < 1e-9);
    }
  }
  SUBCASE("unbalanced total traces are rejected") {
    const TensorMeasure a({{0.0}}, {scalar_psd(1.0)}), b({{0.0}}, {scalar_psd(2.0)});
    CHECK_THROWS_AS(sinkhorn_solve_trace(a, b, GroundCost::isotropic(1, 1, {0.0}), SolverConfig{}),
                    std::invalid_argument);
  }
  SUBCASE("marginal traces on random 5x5 instances") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 3; ++trial) {
      const TensorMeasure mu = random_measure(rng, 5, 2);
      const TensorMeasure nu = balanced_to(random_measure(rng, 5, 2), mu);
      SolverConfig cfg;
      cfg.eps = 0.05;
      cfg.trace_constrained = true;
      const SolveResult r = sinkhorn_solve(mu, nu, euclidean_cost(mu.points(), nu.points(), 2.0), cfg);
      REQUIRE(r.report.converged);
      const auto rows = marginal_rows(r.coupling), cols = marginal_cols(r.coupling);
      for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(rows[i].trace() - mu.tensors()[i].trace()) < 1e-6);
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(cols[j].trace() - nu.tensors()[j].trace()) < 1e-6);
    }
  }
  SUBCASE("symmetric instance: multipliers agree up to the additive gauge") {
    std::mt19937_64 rng(32);
    const TensorMeasure mu = random_measure(rng, 4, 2);
    SolverConfig cfg;
    // The multiplier exchange behaves like balanced Sinkhorn, whose rate
    // collapses when the kernel has entries near exp(-1/eps).
    cfg.eps = 0.2;
    cfg.tol = 1e-12;
    const SolveResult r = sinkhorn_solve_trace(mu, mu, euclidean_cost(mu.points(), mu.points(), 2.0), cfg);
    REQUIRE(r.report.converged);
    const double shift = r.state.alpha[0] - r.state.beta[0];
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(r.state.alpha[i] - r.state.beta[i] - shift) < 1e-8);
  }
}

TEST_CASE("results do not depend on the worker count") {
  std::mt19937_64 rng(33);
  const TensorMeasure mu = random_measure(rng, 40, 2), nu = random_measure(rng, 40, 2);
  const GroundCost cost = euclidean_cost(mu.points(), nu.points(), 2.0);
  SolverConfig cfg;
  cfg.max_iter = 20;
  setenv("QOT_THREADS", "1", 1);
  const SolveResult a = sinkhorn_solve(mu, nu, cost, cfg);
  setenv("QOT_THREADS", "4", 1);
  const SolveResult b = sinkhorn_solve(mu, nu, cost, cfg);
  unsetenv("QOT_THREADS");
  for (std::size_t k = 0; k < a.coupling.entries().size(); ++k)
    CHECK(a.coupling.entries()[k] == b.coupling.entries()[k]);
}

TEST_CASE("input validation") {
  const TensorMeasure a({{0.0}}, {scalar_psd(1.0, 1)}), b({{0.0}}, {scalar_psd(1.0, 2)});
  const GroundCost c = GroundCost::isotropic(1, 1, {0.0});
  CHECK_THROWS_AS(sinkhorn_solve(a, b, c, SolverConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(sinkhorn_solve(a, a, GroundCost::isotropic(1, 2, {0.0, 0.0}), SolverConfig{}),
                  std::invalid_argument);
  SolverConfig bad;
  bad.eps = 0.0;
  CHECK_THROWS_AS(sinkhorn_solve(a, a, c, bad), std::invalid_argument);
}

TEST_CASE("non-convergence is reported") {
  std::mt19937_64 rng(34);
  const TensorMeasure mu = random_measure(rng, 5, 2), nu = random_measure(rng, 5, 2);
  SolverConfig cfg;
  cfg.max_iter = 3;
  const SolveResult r = sinkhorn_solve(mu, nu, euclidean_cost(mu.points(), nu.points(), 2.0), cfg);
  CHECK_FALSE(r.report.converged);
  CHECK(r.report.iterations == 3);
  CHECK(r.report.residual_history.size() == 3);
}
