#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

using ligm::ConservedState;

double burgers_godunov_flux(double left, double right) {
  if (left > right) {
    // Shock; the interface value is the upwind side of the jump.
    const double speed = 0.5 * (left + right);
    const double u = speed > 0.0 ? left : right;
    return 0.5 * u * u;
  }
  if (left >= 0.0) return 0.5 * left * left;
  if (right <= 0.0) return 0.5 * right * right;
  return 0.0;  // transonic rarefaction
}

std::vector<double> godunov_burgers(std::vector<double> cells, double dx, double cfl,
                                    std::size_t steps) {
  std::vector<double> flux(cells.size() - 1);
  for (std::size_t step = 0; step < steps; ++step) {
    double max_speed = 0.0;
    for (double u : cells) max_speed = std::max(max_speed, std::abs(u));
    const double dt = cfl * dx / max_speed;
    const double ratio = dt / dx;
    for (std::size_t k = 0; k + 1 < cells.size(); ++k) {
      flux[k] = burgers_godunov_flux(cells[k], cells[k + 1]);
    }
    std::vector<double> next = cells;
    for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
      next[i] = cells[i] - (flux[i] - flux[i - 1]) * ratio;
    }
    cells = std::move(next);
  }
  return cells;
}

std::vector<double> burgers_cell_averages(double u_left, double u_right, double x0, double t,
                                          double r_min, double dx, std::size_t cells) {
  // ∫ u over [p, q] for the exact solution at time t.
  auto integral = [&](double p, double q) {
    if (u_left > u_right || t == 0.0) {
      const double xs = x0 + 0.5 * (u_left + u_right) * t;
      return u_left * std::max(0.0, std::min(q, xs) - p) +
             u_right * std::max(0.0, q - std::max(p, xs));
    }
    const double head = x0 + u_left * t;
    const double tail = x0 + u_right * t;
    double sum = u_left * std::max(0.0, std::min(q, head) - p);
    sum += u_right * std::max(0.0, q - std::max(p, tail));
    const double lo = std::max(p, head);
    const double hi = std::min(q, tail);
    if (hi > lo) sum += ((hi - x0) * (hi - x0) - (lo - x0) * (lo - x0)) / (2.0 * t);
    return sum;
  };
  std::vector<double> out(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double a = r_min + static_cast<double>(i) * dx;
    out[i] = integral(a, a + dx) / dx;
  }
  return out;
}

double burgers_l1_error(double u_left, double u_right, double x0, double t, double r_min,
                        double dx, const std::vector<double>& cells) {
  auto exact = [&](double x) {
    const double xi = (x - x0) / t;
    if (u_left > u_right) return xi < 0.5 * (u_left + u_right) ? u_left : u_right;
    return std::clamp(xi, u_left, u_right);
  };
  double sum = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double a = r_min + static_cast<double>(i) * dx;
    const double c = cells[i];
    // Between these breaks the exact solution is linear and c − u keeps its
    // sign, so the midpoint rule is exact on each piece.
    std::vector<double> br{a, a + dx};
    for (double k : {x0 + u_left * t, x0 + u_right * t, x0 + 0.5 * (u_left + u_right) * t,
                     x0 + c * t}) {
      if (k > a && k < a + dx) br.push_back(k);
    }
    std::sort(br.begin(), br.end());
    for (std::size_t j = 0; j + 1 < br.size(); ++j) {
      sum += std::abs(c - exact(0.5 * (br[j] + br[j + 1]))) * (br[j + 1] - br[j]);
    }
  }
  return sum;
}

namespace {

// Characteristic speed of family 1 or 2 from the isothermal Jacobian
// [[0, 1], [σ² − v², 2v]], via its characteristic polynomial.
double family_speed(double sigma, double rho, double m, int family) {
  const double v = m / rho;
  const double j10 = sigma * sigma - v * v;
  const double j11 = 2.0 * v;
  const double half = 0.5 * j11;
  const double root = std::sqrt(half * half + j10);
  return family == 1 ? half - root : half + root;
}

// Momentum on the integral curve of `family` through (rho0, m0) at density
// rho. The eigenvector is (1, λ), so dm/dρ = λ; integrated in s = ln ρ.
double integral_curve(double sigma, double rho0, double m0, double rho, int family) {
  const double s0 = std::log(rho0);
  const double s1 = std::log(rho);
  const std::size_t n = std::max<std::size_t>(
      16, static_cast<std::size_t>(std::ceil(std::abs(s1 - s0) / 0.02)));
  const double h = (s1 - s0) / static_cast<double>(n);
  auto rhs = [&](double s, double m) {
    const double r = std::exp(s);
    return r * family_speed(sigma, r, m, family);
  };
  double m = m0;
  double s = s0;
  for (std::size_t k = 0; k < n; ++k) {
    const double k1 = rhs(s, m);
    const double k2 = rhs(s + 0.5 * h, m + 0.5 * h * k1);
    const double k3 = rhs(s + 0.5 * h, m + 0.5 * h * k2);
    const double k4 = rhs(s + h, m + h * k3);
    m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s = s0 + static_cast<double>(k + 1) * h;
  }
  return m;
}

// Momentum on the Hugoniot locus through (rho0, m0): the jump conditions
// s·[ρ] = [m], s·[m] = [m²/ρ + σ²ρ] reduce, after eliminating s and
// multiplying by ρ − ρ0, to a quadratic in m. Family 1 takes the smaller
// root, family 2 the larger.
double hugoniot(double sigma, double rho0, double m0, double rho, int family) {
  const double d = rho - rho0;
  const double a2 = rho0 / rho;
  const double a1 = -2.0 * m0;
  const double a0 = m0 * m0 + d * m0 * m0 / rho0 - sigma * sigma * d * d;
  const double disc = std::max(0.0, a1 * a1 - 4.0 * a2 * a0);
  const double root = std::sqrt(disc);
  return family == 1 ? (-a1 - root) / (2.0 * a2) : (-a1 + root) / (2.0 * a2);
}

double curve_velocity(double sigma, double rho0, double m0, double rho, int family) {
  const double m = rho <= rho0 ? integral_curve(sigma, rho0, m0, rho, family)
                               : hugoniot(sigma, rho0, m0, rho, family);
  return m / rho;
}

}  // namespace

ConservedState isothermal_middle_state(double sigma, const ConservedState& left,
                                       const ConservedState& right) {
  auto mismatch = [&](double rho) {
    return curve_velocity(sigma, left[0], left[1], rho, 1) -
           curve_velocity(sigma, right[0], right[1], rho, 2);
  };
  double lo = 0.5 * std::min(left[0], right[0]);
  double hi = 2.0 * std::max(left[0], right[0]);
  for (int k = 0; mismatch(lo) < 0.0; ++k) {
    if (k > 200) throw std::runtime_error("oracle: no lower bracket");
    lo *= 0.5;
  }
  for (int k = 0; mismatch(hi) > 0.0; ++k) {
    if (k > 200) throw std::runtime_error("oracle: no upper bracket");
    hi *= 2.0;
  }
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = std::sqrt(lo * hi);
    (mismatch(mid) > 0.0 ? lo : hi) = mid;
  }
  const double rho = 0.5 * (lo + hi);
  return {rho, rho * curve_velocity(sigma, left[0], left[1], rho, 1)};
}

double rankine_hugoniot_residual(const ligm::Model& model, const ligm::RiemannFan& fan) {
  double worst = 0.0;
  for (const ligm::Wave& w : fan.waves()) {
    if (w.type != ligm::WaveType::kShock) continue;
    const ConservedState jump = w.right_state - w.left_state;
    const ConservedState flux_jump = model.flux(fan.frozen_metric(), w.right_state) -
                                     model.flux(fan.frozen_metric(), w.left_state);
    worst = std::max(worst, (jump * w.left_speed - flux_jump).norm_inf());
  }
  return worst;
}

ConservedState fan_middle_state(const ligm::RiemannFan& fan) {
  const auto waves = fan.waves();
  for (std::size_t k = waves.size(); k-- > 0;) {
    if (waves[k].family == 1) return waves[k].right_state;
  }
  return waves.empty() ? fan.left_state() : waves.front().left_state;
}

std::vector<double> jacobian_eigenvalues(const ligm::Model& model, const ligm::MetricState& metric,
                                         const ConservedState& u) {
  const std::size_t d = u.size();
  Eigen::MatrixXd jac(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[c]));
    ConservedState up = u;
    ConservedState down = u;
    up[c] += h;
    down[c] -= h;
    const ConservedState col = (model.flux(metric, up) - model.flux(metric, down)) * (0.5 / h);
    for (std::size_t r = 0; r < d; ++r) jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(jac, false);
  std::vector<double> out;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
    const auto lambda = solver.eigenvalues()[k];
    if (std::abs(lambda.imag()) > 1e-9 * (1.0 + std::abs(lambda.real()))) {
      throw std::runtime_error("oracle: complex eigenvalue");
    }
    out.push_back(lambda.real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ConservedState brute_average(const ligm::RiemannFan& fan, double x_a, double x_b, double t,
                             std::size_t samples) {
  const double h = (x_b - x_a) / static_cast<double>(samples);
  ConservedState sum = fan.left_state() * 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = x_a + (static_cast<double>(k) + 0.5) * h;
    sum += fan.sample((x - fan.origin().x0) / t);
  }
  return sum * (1.0 / static_cast<double>(samples));
}

}  // namespace oracle
