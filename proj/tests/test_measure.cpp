#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qot/config.hpp"
#include "qot/cost.hpp"
#include "qot/measure.hpp"
#include "support.hpp"

using namespace qot;
using qot::testing::random_pd;

namespace {

PsdMat psd(std::initializer_list<double> diag) {
  std::vector<double> d(diag);
  return PsdMat::make(SymMat::diagonal(d));
}

std::vector<PsdMat> identity_entries(std::size_t n, int d) {
  return std::vector<PsdMat>(n, PsdMat::make(SymMat::identity(d)));
}

}  // namespace

TEST_CASE("TensorMeasure construction") {
  CHECK_THROWS_AS(TensorMeasure({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(TensorMeasure({{0.0}, {1.0}}, {psd({1})}), std::invalid_argument);
  CHECK_THROWS_AS(TensorMeasure({{0.0}, {1.0}}, {psd({1}), psd({1, 1})}), std::invalid_argument);
  CHECK_THROWS_AS(TensorMeasure({{0.0}, {1.0, 2.0}}, {psd({1}), psd({1})}), std::invalid_argument);
  const TensorMeasure m({{0.0, 1.0}}, {psd({1, 2})});
  CHECK(m.ambient_dim() == 2);
  CHECK(m.tensor_dim() == 2);
  CHECK(TensorMeasure::empty(2, 3).size() == 0);
}

TEST_CASE("marginals") {
  SUBCASE("1x1") {
    const Coupling g(1, 1, {psd({2, 3})});
    CHECK(marginal_rows(g)[0] == g.at(0, 0));
    CHECK(marginal_cols(g)[0] == g.at(0, 0));
  }
  SUBCASE("2x2 identities") {
    const Coupling g(2, 2, identity_entries(4, 2));
    for (const PsdMat& m : marginal_rows(g)) CHECK(m.mat() == SymMat::identity(2, 2.0));
  }
  SUBCASE("2x1") {
    const Coupling g(2, 1, {psd({1, 2}), psd({3, 4})});
    const auto cols = marginal_cols(g);
    REQUIRE(cols.size() == 1);
    CHECK(cols[0] == psd({4, 6}));
  }
  SUBCASE("random: trace linearity, transpose, PSD") {
    std::mt19937_64 rng(1);
    std::vector<PsdMat> e;
    double total = 0.0;
    for (int k = 0; k < 12; ++k) {
      e.push_back(PsdMat::make(random_pd(rng, 3, 0.0)));
      total += e.back().trace();
    }
    const Coupling g(3, 4, e);
    double row_total = 0.0;
    for (const PsdMat& m : marginal_rows(g)) {
      row_total += m.trace();
      CHECK(PsdMat::is_psd(m.mat()));
    }
    CHECK(row_total == doctest::Approx(total).epsilon(1e-14));
    const auto a = marginal_cols(g), b = marginal_rows(g.transposed());
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
}

TEST_CASE("quantum entropy examples") {
  const PsdMat id[] = {PsdMat::make(SymMat::identity(2))};
  CHECK(quantum_entropy(id) == doctest::Approx(2));
  const PsdMat proj[] = {psd({1, 0})};
  CHECK(quantum_entropy(proj) == doctest::Approx(1));
  const PsdMat two[] = {psd({2, 2})};
  CHECK(quantum_entropy(two) == doctest::Approx(4 - 4 * std::log(2.0)));
  const SymMat bad[] = {SymMat::diagonal(std::vector<double>{1, -1})};
  CHECK(quantum_entropy(bad) == -kInf);
}

TEST_CASE("quantum entropy is concave along segments") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const SymMat p = random_pd(rng, 3, 0.01), q = random_pd(rng, 3, 0.01);
    const SymMat mid[] = {0.5 * (p + q)};
    const SymMat ps[] = {p}, qs[] = {q};
    CHECK(quantum_entropy(mid) >= 0.5 * (quantum_entropy(ps) + quantum_entropy(qs)) - 1e-12);
  }
}

TEST_CASE("quantum KL examples") {
  std::mt19937_64 rng(3);
  const PsdMat p[] = {PsdMat::make(random_pd(rng, 3))};
  CHECK(std::abs(quantum_kl(p, p)) < 1e-12);
  const PsdMat two[] = {psd({2})}, one[] = {psd({1})};
  CHECK(quantum_kl(two, one) == doctest::Approx(2 * std::log(2.0) - 1));
  const PsdMat id[] = {PsdMat::make(SymMat::identity(2))}, proj[] = {psd({1, 0})};
  CHECK(quantum_kl(id, proj) == kInf);
  // kernel containment: finite
  const PsdMat sub[] = {psd({0.5, 0})};
  CHECK(std::isfinite(quantum_kl(sub, proj)));
}

TEST_CASE("quantum KL properties") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const PsdMat a[] = {PsdMat::make(random_pd(rng, 3, 0.0)), PsdMat::make(random_pd(rng, 3, 0.0))};
    const PsdMat b[] = {PsdMat::make(random_pd(rng, 3, 0.05)),
                        PsdMat::make(random_pd(rng, 3, 0.05))};
    CHECK(quantum_kl(a, b) >= -1e-12);
    CHECK(std::abs(quantum_kl(b, b)) < 1e-9);
  }
  SUBCASE("d = 1 matches scalar KL") {
    std::uniform_real_distribution<double> u(0.01, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<PsdMat> a, b;
      double expected = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double p = u(rng), q = u(rng);
        a.push_back(psd({p}));
        b.push_back(psd({q}));
        expected += p * std::log(p / q) - p + q;
      }
      CHECK(quantum_kl(a, b) == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("inner") {
  const SymMat id[] = {SymMat::identity(2)};
  CHECK(inner(id, id) == 2);
  const SymMat a[] = {SymMat::diagonal(std::vector<double>{1, 2})};
  const SymMat b[] = {SymMat::diagonal(std::vector<double>{3, 4})};
  CHECK(inner(a, b) == 11);
  std::mt19937_64 rng(5);
  const SymMat x[] = {qot::testing::random_sym(rng, 3), qot::testing::random_sym(rng, 3)};
  const SymMat y[] = {qot::testing::random_sym(rng, 3), qot::testing::random_sym(rng, 3)};
  CHECK(inner(x, y) == doctest::Approx(inner(y, x)).epsilon(1e-15));
}

TEST_CASE("primal objective examples") {
  SolverConfig cfg;
  cfg.rho1 = cfg.rho2 = 1.0;
  SUBCASE("exact marginals, zero cost, eps = 0") {
    cfg.eps = 0.0;
    const TensorMeasure mu({{0.0}, {1.0}}, {psd({1, 1}), psd({1, 1})});
    const Coupling g(2, 2, std::vector<PsdMat>(4, psd({0.5, 0.5})));
    const GroundCost c = GroundCost::isotropic(2, 2, {0, 0, 0, 0});
    CHECK(std::abs(primal_objective(g, mu, mu, c, cfg)) < 1e-14);
  }
  SUBCASE("1x1 scalar") {
    cfg.eps = 0.0;
    const TensorMeasure mu({{0.0}}, {psd({2})});
    const Coupling g(1, 1, {psd({2})});
    CHECK(std::abs(primal_objective(g, mu, mu, GroundCost::isotropic(1, 1, {0}), cfg)) < 1e-14);
  }
  SUBCASE("hard marginal indicator") {
    cfg.eps = 0.0;
    cfg.rho2 = kInf;
    const TensorMeasure mu({{0.0}}, {psd({2})});
    const GroundCost c = GroundCost::isotropic(1, 1, {0});
    CHECK(std::isfinite(primal_objective(Coupling(1, 1, {psd({2})}), mu, mu, c, cfg)));
    CHECK(primal_objective(Coupling(1, 1, {psd({1.9})}), mu, mu, c, cfg) == kInf);
  }
}
