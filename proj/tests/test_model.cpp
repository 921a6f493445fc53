#include <doctest.h>

#include <random>

#include "ligm/errors.hpp"
#include "ligm/model.hpp"
#include "oracles.hpp"

using namespace ligm;

namespace {

std::shared_ptr<const Model> synthetic(double kappa = 0.1, double coupling = 1.0) {
  ModelParams p;
  p.kappa = kappa;
  p.source_coupling = coupling;
  return make_model("synthetic", p);
}

std::shared_ptr<const Model> isothermal(double sigma = 1.0, double kappa = 0.0,
                                        double coupling = 1.0) {
  ModelParams p;
  p.sound_speed = sigma;
  p.kappa = kappa;
  p.source_coupling = coupling;
  return make_model("isothermal", p);
}

}  // namespace

TEST_CASE("synthetic flux values") {
  auto m = synthetic();
  CHECK(m->flux({2.0}, {3.0})[0] == 9.0);
  CHECK(m->flux({1.0}, {0.0})[0] == 0.0);
}

TEST_CASE("isothermal flux at rest") {
  auto m = isothermal(1.0);
  const ConservedState f = m->flux({1.0}, {1.0, 0.0});
  CHECK(f[0] == 0.0);
  CHECK(f[1] == 1.0);
}

TEST_CASE("metric gradient of the flux") {
  auto m = synthetic();
  CHECK(m->flux_grad_metric({2.0}, {3.0}).column(0)[0] == 4.5);
  CHECK(m->flux_grad_metric({1.7}, {0.0}).column(0)[0] == 0.0);
}

TEST_CASE("sources and metric law") {
  SUBCASE("synthetic g = -c u h") {
    // h = κ A u² = 1 at κ = 0.25, A = 1, u = 2, so g = -2.
    auto m = synthetic(0.25, 1.0);
    CHECK(m->metric_rhs({1.0}, {2.0}, 0.5)[0] == doctest::Approx(1.0));
    CHECK(m->source({1.0}, {2.0}, 0.5)[0] == doctest::Approx(-2.0));
  }
  SUBCASE("synthetic h") {
    CHECK(synthetic(0.1)->metric_rhs({1.0}, {2.0}, 0.3)[0] == doctest::Approx(0.4));
  }
  SUBCASE("homogeneous limit") {
    auto m = synthetic(0.0);
    CHECK(m->source({1.3}, {-0.7}, 0.2)[0] == 0.0);
    CHECK(m->metric_rhs({1.3}, {-0.7}, 0.2)[0] == 0.0);
  }
  SUBCASE("isothermal geometric source") {
    auto m = isothermal(1.0, 0.0, 1.0);
    const ConservedState g = m->source({1.0}, {2.0, 0.0}, 4.0);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(-0.5));
  }
}

TEST_CASE("wave speeds") {
  CHECK(synthetic()->wave_speeds({2.0}, {3.0})[0] == 6.0);
  const WaveSpeeds s = isothermal(1.0)->wave_speeds({1.0}, {1.0, 0.0});
  CHECK(s[0] == doctest::Approx(-1.0));
  CHECK(s[1] == doctest::Approx(1.0));
}

TEST_CASE("wave speeds match eigenvalues of a finite-difference Jacobian") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> metric(0.5, 2.0), rho(0.1, 3.0), v(-1.0, 1.0),
      sigma(0.1, 1.0);
  for (int k = 0; k < 500; ++k) {
    auto m = isothermal(sigma(rng));
    const MetricState a{metric(rng)};
    const double r = rho(rng);
    const ConservedState u{r, r * v(rng)};
    const std::vector<double> eig = oracle::jacobian_eigenvalues(*m, a, u);
    const WaveSpeeds s = m->wave_speeds(a, u);
    REQUIRE(eig.size() == 2);
    CHECK(s[0] == doctest::Approx(eig[0]).epsilon(1e-6));
    CHECK(s[1] == doctest::Approx(eig[1]).epsilon(1e-6));
  }
}

TEST_CASE("metric gradient matches central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> metric(0.5, 2.0), rho(0.1, 3.0), v(-1.0, 1.0);
  for (auto model : {synthetic(), isothermal(0.7)}) {
    for (int k = 0; k < 200; ++k) {
      const MetricState a{metric(rng)};
      const double r = rho(rng);
      const ConservedState u = model->state_dim() == 1 ? ConservedState{2.0 * v(rng)}
                                                       : ConservedState{r, r * v(rng)};
      const double h = 1e-6;
      const ConservedState fd =
          (model->flux({a[0] + h}, u) - model->flux({a[0] - h}, u)) * (0.5 / h);
      const ConservedState g = model->flux_grad_metric(a, u).column(0);
      for (std::size_t c = 0; c < u.size(); ++c) {
        CHECK(g[c] == doctest::Approx(fd[c]).epsilon(1e-7).scale(1.0));
      }
    }
  }
}

TEST_CASE("fractional-step right-hand side") {
  auto m = synthetic(0.1, 1.0);
  const MetricState a{1.5};
  const MetricState slope{0.4};
  const ConservedState u{0.8};
  const double x = 0.3;
  const ConservedState with = m->ode_rhs(a, slope, u, x, true);
  const ConservedState without = m->ode_rhs(a, slope, u, x, false);
  CHECK(without[0] == doctest::Approx(m->source(a, u, x)[0]));
  CHECK(with[0] == doctest::Approx(without[0] - 0.4 * 0.5 * 0.8 * 0.8));
}

TEST_CASE("model functions are pure") {
  auto m = isothermal(0.6, 0.2, 0.3);
  const MetricState a{1.25};
  const ConservedState u{0.9, -0.35};
  CHECK(m->flux(a, u) == m->flux(a, u));
  CHECK(m->source(a, u, 1.5) == m->source(a, u, 1.5));
  CHECK(m->wave_speeds(a, u) == m->wave_speeds(a, u));
}

TEST_CASE("admissibility and parameter checks") {
  CHECK_THROWS_AS(isothermal()->flux({1.0}, {-1.0, 0.0}), InadmissibleState);
  CHECK_THROWS_AS(isothermal()->flux({1.0}, {0.0, 0.0}), InadmissibleState);
  CHECK_THROWS_AS(synthetic()->flux({1.0}, {std::nan("")}), InadmissibleState);
  CHECK_THROWS_AS(isothermal(1.5), ConfigError);
  CHECK_THROWS_AS(isothermal(0.0), ConfigError);
  CHECK_THROWS_AS(make_model("euler", {}), ConfigError);
  CHECK_THROWS_AS(isothermal()->source({1.0}, {1.0, 0.0}, 0.0), InadmissibleState);
}
