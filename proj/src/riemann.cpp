#include "ligm/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ligm/errors.hpp"

namespace ligm {

namespace {

bool negligible_jump(const ConservedState& a, const ConservedState& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > kZeroStrength) return false;
  }
  return true;
}

// Isothermal wave curves written as velocity decrements in y = ln ρ:
// v* = v_L − φ(ρ*; ρ_L) on the 1-curve and v* = v_R + φ(ρ*; ρ_R) on the
// 2-curve. Rarefaction branch (ρ ≤ ρ_K) is the integral curve
// σ·ln(ρ/ρ_K); compressive branch is the Hugoniot locus
// σ·(√(ρ/ρ_K) − √(ρ_K/ρ)). The two branches join with matching slope.
struct IsothermalCurve {
  double rho_ref;
  double sigma;

  double value(double rho) const {
    if (rho <= rho_ref) return sigma * std::log(rho / rho_ref);
    const double r = std::sqrt(rho / rho_ref);
    return sigma * (r - 1.0 / r);
  }
  // d/dy with y = ln ρ.
  double slope(double rho) const {
    if (rho <= rho_ref) return sigma;
    const double r = std::sqrt(rho / rho_ref);
    return 0.5 * sigma * (r + 1.0 / r);
  }
};

// Middle density of the isothermal Riemann problem. The curve function is
// convex and increasing in ln ρ with slope ≥ 2σ, so damped Newton with a
// maintained bracket converges; bisection takes over if a step leaves it.
double isothermal_middle_density(double rho_l, double v_l, double rho_r, double v_r,
                                 double sigma) {
  const IsothermalCurve left{rho_l, sigma};
  const IsothermalCurve right{rho_r, sigma};
  const double dv = v_r - v_l;
  auto residual = [&](double y) {
    const double rho = std::exp(y);
    return left.value(rho) + right.value(rho) + dv;
  };
  auto derivative = [&](double y) {
    const double rho = std::exp(y);
    return left.slope(rho) + right.slope(rho);
  };

  const double scale = std::max({1.0, std::abs(v_l), std::abs(v_r), sigma});
  const double tol = kIntersectionTolerance * scale;
  // Two-rarefaction solution: exact whenever ρ* ≤ min(ρ_L, ρ_R).
  double y = 0.5 * (std::log(rho_l) + std::log(rho_r)) - 0.5 * dv / sigma;
  double lo = -INFINITY;
  double hi = INFINITY;
  for (int iter = 0; iter < kIntersectionMaxIterations; ++iter) {
    const double f = residual(y);
    if (!std::isfinite(f)) break;
    if (std::abs(f) <= tol) return std::exp(y);
    if (f < 0.0) {
      lo = std::max(lo, y);
    } else {
      hi = std::min(hi, y);
    }
    double step = -f / derivative(y);
    step = std::clamp(step, -4.0, 4.0);
    double next = y + step;
    if (std::isfinite(lo) && std::isfinite(hi) && !(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (next == y) return std::exp(y);
    y = next;
  }
  std::ostringstream os;
  os << "isothermal middle state did not converge (rho_L=" << rho_l << ", v_L=" << v_l
     << ", rho_R=" << rho_r << ", v_R=" << v_r << ")";
  throw RiemannError(RiemannError::Kind::kNonConvergence, os.str());
}

}  // namespace

double RiemannFan::min_speed() const { return count_ ? waves_[0].left_speed : 0.0; }

double RiemannFan::max_speed() const { return count_ ? waves_[count_ - 1].right_speed : 0.0; }

void RiemannFan::push_wave(const Wave& wave) {
  if (negligible_jump(wave.left_state, wave.right_state)) return;
  waves_[count_++] = wave;
}

ConservedState RiemannFan::region_state(std::size_t region) const {
  if (region == 0) return left_;
  if (region >= count_) return right_;
  return waves_[region - 1].right_state;
}

ConservedState RiemannFan::rarefaction_value(const Wave& wave, double xi) const {
  const double a = metric_[0];
  if (structure_ == WaveStructure::kScalarConvex) return {xi / a};
  const double c = sound_speed_;
  if (wave.family == 1) {
    const ConservedState& ref = wave.left_state;
    const double v = xi / a + c;
    const double rho = ref[0] * std::exp((ref[1] / ref[0] - v) / c);
    return {rho, rho * v};
  }
  const ConservedState& ref = wave.right_state;
  const double v = xi / a - c;
  const double rho = ref[0] * std::exp((v - ref[1] / ref[0]) / c);
  return {rho, rho * v};
}

ConservedState RiemannFan::rarefaction_antiderivative(const Wave& wave, double xi) const {
  const double a = metric_[0];
  if (structure_ == WaveStructure::kScalarConvex) return {0.5 * xi * xi / a};
  const double c = sound_speed_;
  const ConservedState u = rarefaction_value(wave, xi);
  const double rho = u[0];
  if (wave.family == 1) return {-a * c * rho, -rho * c * (xi + 2.0 * a * c)};
  return {a * c * rho, rho * c * (xi - 2.0 * a * c)};
}

ConservedState RiemannFan::sample(double xi) const {
  for (std::size_t k = 0; k < count_; ++k) {
    const Wave& w = waves_[k];
    if (xi < w.left_speed) return region_state(k);
    if (w.type == WaveType::kRarefaction && xi < w.right_speed) return rarefaction_value(w, xi);
  }
  return region_state(count_);
}

ConservedState RiemannFan::integrate_xi(double xi_a, double xi_b) const {
  ConservedState total = left_ * 0.0;
  double cur = xi_a;
  for (std::size_t k = 0; k < count_; ++k) {
    const Wave& w = waves_[k];
    const double edge = std::min(w.left_speed, xi_b);
    if (edge > cur) {
      total += region_state(k) * (edge - cur);
      cur = edge;
    }
    if (cur >= xi_b) return total;
    if (w.type == WaveType::kRarefaction) {
      const double lo = std::max(cur, w.left_speed);
      const double hi = std::min(w.right_speed, xi_b);
      if (hi > lo) {
        total += rarefaction_antiderivative(w, hi) - rarefaction_antiderivative(w, lo);
      }
    }
    cur = std::max(cur, w.right_speed);
    if (cur >= xi_b) return total;
  }
  total += region_state(count_) * (xi_b - cur);
  return total;
}

ConservedState RiemannFan::average(double x_a, double x_b, double t) const {
  if (!(x_b > x_a) || !(t > 0.0)) {
    throw CflViolation("fan average needs x_b > x_a and t > 0");
  }
  if (count_ == 0) return left_;
  const double xi_a = (x_a - origin_.x0) / t;
  const double xi_b = (x_b - origin_.x0) / t;
  const double slack = 1e-12 * std::max({1.0, std::abs(xi_a), std::abs(xi_b)});
  if (min_speed() < xi_a - slack || max_speed() > xi_b + slack) {
    std::ostringstream os;
    os << "fan at x0=" << origin_.x0 << " spans speeds [" << min_speed() << ", " << max_speed()
       << "] but averaging interval only admits [" << xi_a << ", " << xi_b << "]";
    throw CflViolation(os.str());
  }
  return integrate_xi(xi_a, xi_b) * (t / (x_b - x_a));
}

RiemannFan solve_riemann(const Model& model, const MetricState& metric,
                         const ConservedState& left, const ConservedState& right,
                         FanOrigin origin) {
  model.require_admissible(metric, left);
  model.require_admissible(metric, right);

  RiemannFan fan;
  fan.left_ = left;
  fan.right_ = right;
  fan.metric_ = metric;
  fan.origin_ = origin;
  fan.structure_ = model.wave_structure();
  if (left == right) return fan;

  const double a = metric[0];
  if (fan.structure_ == WaveStructure::kScalarConvex) {
    const double ul = left[0];
    const double ur = right[0];
    Wave w;
    w.family = 1;
    w.left_state = left;
    w.right_state = right;
    if (ul > ur) {
      w.type = WaveType::kShock;
      w.left_speed = w.right_speed = 0.5 * a * (ul + ur);
    } else {
      w.type = WaveType::kRarefaction;
      w.left_speed = a * ul;
      w.right_speed = a * ur;
    }
    // Scalar waves are exact at any strength; keeping tiny ones preserves the
    // upwind trace.
    fan.waves_[fan.count_++] = w;
    return fan;
  }

  const double c = static_cast<const IsothermalModel&>(model).sound_speed();
  fan.sound_speed_ = c;
  const double rho_l = left[0];
  const double v_l = left[1] / rho_l;
  const double rho_r = right[0];
  const double v_r = right[1] / rho_r;

  const double rho_m = isothermal_middle_density(rho_l, v_l, rho_r, v_r, c);
  if (!(rho_m > 0.0) || !std::isfinite(rho_m)) {
    throw RiemannError(RiemannError::Kind::kNoIntersection,
                       "isothermal wave curves do not meet at positive density");
  }
  const double v_m = 0.5 * ((v_l - IsothermalCurve{rho_l, c}.value(rho_m)) +
                            (v_r + IsothermalCurve{rho_r, c}.value(rho_m)));
  const ConservedState middle{rho_m, rho_m * v_m};

  Wave w1;
  w1.family = 1;
  w1.left_state = left;
  w1.right_state = middle;
  if (rho_m > rho_l) {
    w1.type = WaveType::kShock;
    w1.left_speed = w1.right_speed = a * (v_l - c * std::sqrt(rho_m / rho_l));
  } else {
    w1.type = WaveType::kRarefaction;
    w1.left_speed = a * (v_l - c);
    w1.right_speed = a * (v_m - c);
  }

  Wave w2;
  w2.family = 2;
  w2.left_state = middle;
  w2.right_state = right;
  if (rho_m > rho_r) {
    w2.type = WaveType::kShock;
    w2.left_speed = w2.right_speed = a * (v_r + c * std::sqrt(rho_m / rho_r));
  } else {
    w2.type = WaveType::kRarefaction;
    w2.left_speed = a * (v_m + c);
    w2.right_speed = a * (v_r + c);
  }

  // Lax inequalities: characteristics enter each shock from both sides.
  const double lax_slack = 1e-12 * a * (std::abs(v_l) + std::abs(v_r) + std::abs(v_m) + c);
  auto lax_ok = [&](double upstream, double speed, double downstream) {
    return upstream + lax_slack >= speed && speed + lax_slack >= downstream;
  };
  if (w1.type == WaveType::kShock && !lax_ok(a * (v_l - c), w1.left_speed, a * (v_m - c))) {
    throw RiemannError(RiemannError::Kind::kNoIntersection, "1-shock violates Lax entropy");
  }
  if (w2.type == WaveType::kShock && !lax_ok(a * (v_m + c), w2.left_speed, a * (v_r + c))) {
    throw RiemannError(RiemannError::Kind::kNoIntersection, "2-shock violates Lax entropy");
  }

  fan.push_wave(w1);
  fan.push_wave(w2);
  return fan;
}

}  // namespace ligm
