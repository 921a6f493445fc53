#include <doctest.h>

#include <random>

#include "ligm/errors.hpp"
#include "ligm/riemann.hpp"
#include "oracles.hpp"

using namespace ligm;

namespace {

std::shared_ptr<const Model> burgers() {
  ModelParams p;
  p.kappa = 0.0;
  return make_model("synthetic", p);
}

std::shared_ptr<const Model> isothermal(double sigma) {
  ModelParams p;
  p.sound_speed = sigma;
  return make_model("isothermal", p);
}

}  // namespace

TEST_CASE("equal states give a constant fan") {
  const RiemannFan fan = solve_riemann(*burgers(), {1.0}, {0.3}, {0.3});
  CHECK(fan.is_constant());
  CHECK(fan.sample(-5.0)[0] == 0.3);
  CHECK(fan.average(-1.0, 1.0, 0.5)[0] == 0.3);
}

TEST_CASE("Burgers shock") {
  const RiemannFan fan = solve_riemann(*burgers(), {1.0}, {1.0}, {0.0});
  REQUIRE(fan.waves().size() == 1);
  const Wave& w = fan.waves()[0];
  CHECK(w.type == WaveType::kShock);
  // Rankine–Hugoniot: s = (f_R − f_L)/(u_R − u_L) = (0 − 1/2)/(0 − 1).
  CHECK(w.left_speed == doctest::Approx((0.0 - 0.5) / (0.0 - 1.0)));
  CHECK(fan.sample(0.4)[0] == 1.0);
  CHECK(fan.sample(0.6)[0] == 0.0);
  CHECK(fan.sample(0.0)[0] == 1.0);
  CHECK(fan.sample(-1e9)[0] == 1.0);
  CHECK(fan.sample(1e9)[0] == 0.0);
}

TEST_CASE("Burgers rarefaction") {
  const RiemannFan fan = solve_riemann(*burgers(), {1.0}, {0.0}, {1.0});
  REQUIRE(fan.waves().size() == 1);
  const Wave& w = fan.waves()[0];
  CHECK(w.type == WaveType::kRarefaction);
  CHECK(w.left_speed == 0.0);
  CHECK(w.right_speed == 1.0);
  // Characteristic inversion: A·u = ξ.
  for (double xi : {0.1, 0.25, 0.5, 0.9}) CHECK(fan.sample(xi)[0] == doctest::Approx(xi));
  CHECK(fan.min_speed() == 0.0);
  CHECK(fan.max_speed() == 1.0);
}

TEST_CASE("scaled metric scales Burgers speeds") {
  const RiemannFan fan = solve_riemann(*burgers(), {2.0}, {0.0}, {1.0});
  CHECK(fan.max_speed() == doctest::Approx(2.0));
  CHECK(fan.sample(1.0)[0] == doctest::Approx(0.5));
}

TEST_CASE("exact averages agree with brute-force quadrature") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5), rho(0.2, 3.0), v(-0.8, 0.8);
  for (int k = 0; k < 40; ++k) {
    const double t = 0.3;
    const RiemannFan b = solve_riemann(*burgers(), {1.0}, {u(rng)}, {u(rng)}, {0.0, 0.0});
    const double reach = 1.6 * t;
    CHECK(b.average(-reach, reach, t)[0] ==
          doctest::Approx(oracle::brute_average(b, -reach, reach, t, 200000)[0]).epsilon(1e-4));
    auto iso = isothermal(0.5);
    const double r1 = rho(rng), r2 = rho(rng);
    const RiemannFan f =
        solve_riemann(*iso, {1.0}, {r1, r1 * v(rng)}, {r2, r2 * v(rng)}, {0.0, 0.0});
    const double span = std::max(std::abs(f.min_speed()), std::abs(f.max_speed())) * t + 0.01;
    const ConservedState exact = f.average(-span, span, t);
    const ConservedState brute = oracle::brute_average(f, -span, span, t, 200000);
    CHECK(exact[0] == doctest::Approx(brute[0]).epsilon(1e-4));
    CHECK(exact[1] == doctest::Approx(brute[1]).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("averages outside the fan reach are rejected") {
  const RiemannFan fan = solve_riemann(*burgers(), {1.0}, {1.0}, {0.0}, {0.0, 0.0});
  CHECK_THROWS_AS(fan.average(-0.1, 0.1, 1.0), CflViolation);
}

TEST_CASE("isothermal middle states match the wave-curve oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rho(0.1, 3.0), v(-1.0, 1.0), sigma(0.2, 1.0),
      metric(0.5, 2.0);
  for (int k = 0; k < 500; ++k) {
    const double s = sigma(rng);
    auto model = isothermal(s);
    const double rl = rho(rng), rr = rho(rng);
    const ConservedState left{rl, rl * v(rng)};
    const ConservedState right{rr, rr * v(rng)};
    const RiemannFan fan = solve_riemann(*model, {metric(rng)}, left, right);
    const ConservedState mid = oracle::fan_middle_state(fan);
    const ConservedState expect = oracle::isothermal_middle_state(s, left, right);
    CHECK(std::abs(mid[0] - expect[0]) <= 1e-6);
    CHECK(std::abs(mid[1] - expect[1]) <= 1e-6);
    CHECK(oracle::rankine_hugoniot_residual(*model, fan) <= 1e-8);
  }
}

TEST_CASE("isothermal shocks satisfy the Lax inequalities") {
  auto model = isothermal(0.5);
  const RiemannFan fan = solve_riemann(*model, {1.0}, {2.0, 0.5}, {1.0, -0.5});
  for (const Wave& w : fan.waves()) {
    if (w.type != WaveType::kShock) continue;
    const std::size_t f = static_cast<std::size_t>(w.family - 1);
    CHECK(model->wave_speeds({1.0}, w.left_state)[f] >= w.left_speed);
    CHECK(model->wave_speeds({1.0}, w.right_state)[f] <= w.left_speed);
  }
}

TEST_CASE("inadmissible data is rejected") {
  CHECK_THROWS_AS(solve_riemann(*isothermal(0.5), {1.0}, {-1.0, 0.0}, {1.0, 0.0}),
                  InadmissibleState);
}
