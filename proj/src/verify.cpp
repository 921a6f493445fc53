#include "ligm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "ligm/errors.hpp"

namespace ligm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_time(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// A half cell on which the pre-ODE solution is either a single interface fan
// or the cell's own constant value.
struct HalfCell {
  double lo = 0.0;
  double hi = 0.0;
  const RiemannFan* fan = nullptr;
  ConservedState constant;

  ConservedState value(double x, double tau) const {
    if (!fan) return constant;
    return fan->sample((x - fan->origin().x0) / tau);
  }
};

// Gauss points on [lo, hi] split at every break strictly inside it, so
// piecewise-polynomial integrands are handled piece by piece.
template <class Visit>
void apply_split(double lo, double hi, std::span<const double> breaks, Visit&& visit) {
  if (std::none_of(breaks.begin(), breaks.end(), [&](double b) { return b > lo && b < hi; })) {
    GaussRule::apply(lo, hi, visit);
    return;
  }
  double a = lo;
  std::vector<double> inner;
  for (double b : breaks) {
    if (b > lo && b < hi) inner.push_back(b);
  }
  std::sort(inner.begin(), inner.end());
  for (double b : inner) {
    if (b > a) GaussRule::apply(a, b, visit);
    a = std::max(a, b);
  }
  GaussRule::apply(a, hi, visit);
}

// Calls visit(x, weight, u_rp) on Gauss points of the smooth pieces of the
// half cell at time tau after the fan origin. `breaks` are extra split
// points, such as test-function support edges.
template <class Visit>
void integrate_half(const HalfCell& half, double tau, std::size_t max_pieces,
                    std::span<const double> breaks, std::vector<double>& cuts, Visit&& visit) {
  cuts.clear();
  cuts.push_back(half.lo);
  for (double x : breaks) {
    if (x > half.lo && x < half.hi) cuts.push_back(x);
  }
  if (half.fan) {
    const double x0 = half.fan->origin().x0;
    for (const Wave& w : half.fan->waves()) {
      for (double s : {w.left_speed, w.right_speed}) {
        const double x = x0 + s * tau;
        if (x > half.lo && x < half.hi) cuts.push_back(x);
      }
    }
  }
  cuts.push_back(half.hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (cuts.size() - 1 > max_pieces) {
    std::ostringstream os;
    os << "quadrature budget exceeded: " << cuts.size() - 1 << " pieces on [" << half.lo << ", "
       << half.hi << "]";
    throw CoverageError(os.str());
  }
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    GaussRule::apply(cuts[p], cuts[p + 1], [&](double x, double w) {
      visit(x, w, half.value(x, tau));
    });
  }
}

// Total variation of the fan over ξ ∈ [xi_a, xi_b]; rarefactions are sampled
// densely since their components need not be monotone.
double fan_variation(const RiemannFan& fan, double xi_a, double xi_b) {
  constexpr int kRarefactionSamples = 64;
  std::vector<ConservedState> seq;
  seq.push_back(fan.sample(xi_a));
  for (const Wave& w : fan.waves()) {
    if (w.type == WaveType::kRarefaction) {
      const double lo = std::max(w.left_speed, xi_a);
      const double hi = std::min(w.right_speed, xi_b);
      if (hi <= lo) continue;
      for (int k = 0; k <= kRarefactionSamples; ++k) {
        seq.push_back(fan.sample(lo + (hi - lo) * k / kRarefactionSamples));
      }
    } else if (w.left_speed > xi_a && w.left_speed < xi_b) {
      seq.push_back(w.left_state);
      seq.push_back(w.right_state);
    }
  }
  seq.push_back(fan.sample(xi_b));
  return total_variation(seq);
}

RiemannFan interface_fan(const Model& model, const Mesh& mesh, const GridState& state,
                         std::size_t k) {
  const MetricState frozen = (state.metric[k] + state.metric[k + 1]) * 0.5;
  return solve_riemann(model, frozen, state.u[k], state.u[k + 1], {state.time, mesh.edge(k + 1)});
}

std::size_t cell_of(const Mesh& mesh, double x) {
  const double s = std::floor((x - mesh.r_min()) / mesh.dx());
  if (s <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(s), mesh.cell_count() - 1);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return kNaN;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double relative_spread(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return (*hi - *lo) / *lo;
}

}  // namespace

// ---------------------------------------------------------------------------
// Test functions

TestFunction::TestFunction(SupportBox support, Evaluator evaluate, double sup_norm,
                           std::string name)
    : support_(support), evaluate_(std::move(evaluate)), sup_norm_(sup_norm),
      name_(std::move(name)) {
  if (!(support_.t_a < support_.t_b) || !(support_.x_a < support_.x_b)) {
    throw ConfigError("test_function", "support box must have t_a < t_b and x_a < x_b");
  }
  if (!evaluate_) throw ConfigError("test_function", "no evaluator");
  time_breaks_ = {support_.t_a, support_.t_b};
  space_breaks_ = {support_.x_a, support_.x_b};
}

TestFunction TestFunction::bump(const SupportBox& box, std::string name) {
  const double lt = box.t_b - box.t_a;
  const double lx = box.x_b - box.x_a;
  const double peak = (0.25 * lt * lt) * (0.25 * lx * lx);
  const double norm = 1.0 / (peak * peak * peak);
  auto eval = [box, norm](double t, double x) {
    const double pt = (t - box.t_a) * (box.t_b - t);
    const double px = (x - box.x_a) * (box.x_b - x);
    const double p = pt * px;
    const double dp = 3.0 * norm * p * p;
    return TestValue{norm * p * p * p, dp * px * (box.t_a + box.t_b - 2.0 * t),
                     dp * pt * (box.x_a + box.x_b - 2.0 * x)};
  };
  return TestFunction(box, eval, 1.0, std::move(name));
}

TestValue TestFunction::operator()(double t, double x) const {
  if (!support_.contains_time(t) || !support_.contains_x(x)) return {};
  return evaluate_(t, x);
}

TestFunction linear_combination(double alpha, const TestFunction& phi, double beta,
                                const TestFunction& psi) {
  const SupportBox& a = phi.support();
  const SupportBox& b = psi.support();
  SupportBox box{std::min(a.t_a, b.t_a), std::max(a.t_b, b.t_b), std::min(a.x_a, b.x_a),
                 std::max(a.x_b, b.x_b)};
  auto eval = [alpha, beta, phi, psi](double t, double x) {
    const TestValue p = phi(t, x);
    const TestValue q = psi(t, x);
    return TestValue{alpha * p.value + beta * q.value, alpha * p.dt + beta * q.dt,
                     alpha * p.dx + beta * q.dx};
  };
  TestFunction out(box, eval, std::abs(alpha) * phi.sup_norm() + std::abs(beta) * psi.sup_norm(),
                   phi.name() + "+" + psi.name());
  // Keep both sets of kinks so quadrature splits exactly where either term does.
  out.time_breaks_ = phi.time_breaks_;
  out.time_breaks_.insert(out.time_breaks_.end(), psi.time_breaks_.begin(), psi.time_breaks_.end());
  out.space_breaks_ = phi.space_breaks_;
  out.space_breaks_.insert(out.space_breaks_.end(), psi.space_breaks_.begin(),
                           psi.space_breaks_.end());
  return out;
}

std::vector<TestFunction> make_test_functions(std::span<const SupportBox> boxes,
                                              const Domain& domain) {
  std::vector<TestFunction> out;
  out.reserve(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const SupportBox& b = boxes[k];
    const std::string field = "study.test_functions[" + std::to_string(k) + "]";
    if (!(b.t_a > domain.t0 && b.t_a < b.t_b && b.t_b < domain.t_end)) {
      throw ConfigError(field, "time support must satisfy t0 < t_a < t_b < t_end");
    }
    if (!(b.x_a > domain.r_min && b.x_a < b.x_b && b.x_b < domain.r_max)) {
      throw ConfigError(field, "space support must satisfy r_min < x_a < x_b < r_max");
    }
    out.push_back(TestFunction::bump(b, "box" + std::to_string(k)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Total variation

double total_variation(std::span<const ConservedState> cells) {
  double tv = 0.0;
  for (std::size_t k = 1; k < cells.size(); ++k) tv += (cells[k] - cells[k - 1]).norm1();
  return tv;
}

void VariationRecorder::operator()(const Snapshot& snapshot) {
  const double tv = total_variation(snapshot.state.u);
  history_.times.push_back(snapshot.state.time);
  history_.values.push_back(tv);
  history_.max_value = std::max(history_.max_value, tv);
}

VariationHistory total_variation_history(const Trajectory& trajectory) {
  VariationRecorder recorder;
  for (const Snapshot& s : trajectory.snapshots) recorder(s);
  return recorder.history();
}

// ---------------------------------------------------------------------------
// Residuals

ResidualAccumulator::ResidualAccumulator(const Model& model, const Mesh& mesh, bool correction,
                                         std::vector<TestFunction> functions,
                                         ResidualOptions options)
    : model_(model), mesh_(mesh), correction_(correction), functions_(std::move(functions)),
      options_(options) {
  ConservedState zero(model_.state_dim());
  terms_.assign(functions_.size(), ResidualTerms{zero, zero, zero, zero, zero});
}

bool ResidualAccumulator::active_in(std::size_t f, double t_lo, double t_hi, double x_lo,
                                    double x_hi) const {
  return functions_[f].support().overlaps(t_lo, t_hi, x_lo, x_hi);
}

void ResidualAccumulator::consume(const Snapshot& snapshot) {
  if (finished_) throw Error("residual: snapshot consumed after the final one");
  Level level{snapshot.state, snapshot.dt};
  if (!first_time_) {
    first_time_ = level.state.time;
    add_initial(level);
  } else {
    const double expected = pending_->state.time + pending_->dt;
    const bool contiguous = pending_->dt > 0.0 && same_time(expected, level.state.time);
    if (contiguous) {
      add_slab(*pending_, &level);
    } else {
      const double gap_lo = pending_->state.time;
      const double gap_hi = level.state.time;
      for (const TestFunction& fn : functions_) {
        if (fn.support().t_a < gap_hi && fn.support().t_b > gap_lo && !gap_) {
          std::ostringstream os;
          os << "snapshots between t=" << gap_lo << " and t=" << gap_hi
             << " are not contiguous inside the support of " << fn.name()
             << " (record every step)";
          gap_ = os.str();
        }
      }
    }
  }
  if (level.dt == 0.0) finished_ = true;
  pending_ = std::move(level);
}

void ResidualAccumulator::add_initial(const Level& level) {
  const double t0 = level.state.time;
  for (std::size_t f = 0; f < functions_.size(); ++f) {
    const TestFunction& fn = functions_[f];
    if (!fn.support().contains_time(t0)) continue;
    const std::size_t first = cell_of(mesh_, fn.support().x_a);
    const std::size_t last = cell_of(mesh_, fn.support().x_b);
    for (std::size_t i = first; i <= last; ++i) {
      const double lo = std::max(mesh_.edge(i), fn.support().x_a);
      const double hi = std::min(mesh_.edge(i + 1), fn.support().x_b);
      if (!(hi > lo)) continue;
      apply_split(lo, hi, fn.space_breaks(), [&](double x, double w) {
        terms_[f].initial += level.state.u[i] * (fn(t0, x).value * w);
      });
    }
  }
}

void ResidualAccumulator::add_boundary(const Level& level, const std::vector<std::size_t>& active) {
  const GridState& s = level.state;
  const std::size_t last = mesh_.cell_count() - 1;
  const ConservedState flux_left = model_.flux(s.metric[0], s.u[0]);
  const ConservedState flux_right = model_.flux(s.metric[last], s.u[last]);
  for (std::size_t f : active) {
    const TestFunction& fn = functions_[f];
    const bool left = fn.support().contains_x(mesh_.r_min());
    const bool right = fn.support().contains_x(mesh_.r_max());
    if (!left && !right) continue;
    std::vector<double> breaks;
    for (double t : fn.time_breaks()) breaks.push_back(t - s.time);
    apply_split(0.0, level.dt, breaks, [&](double tau, double w) {
      const double t = s.time + tau;
      if (left) terms_[f].boundary += flux_left * (fn(t, mesh_.r_min()).value * w);
      if (right) terms_[f].boundary -= flux_right * (fn(t, mesh_.r_max()).value * w);
    });
  }
}

void ResidualAccumulator::add_slab(const Level& level, const Level* next) {
  const GridState& s = level.state;
  const double t0 = s.time;
  const double dt = level.dt;
  const double t1 = next ? next->state.time : t0 + dt;

  std::vector<std::size_t> bulk_fns;
  std::vector<std::size_t> jump_fns;
  double x_lo = mesh_.r_max();
  double x_hi = mesh_.r_min();
  for (std::size_t f = 0; f < functions_.size(); ++f) {
    const SupportBox& b = functions_[f].support();
    const bool bulk = b.t_a < t1 && b.t_b > t0;
    const bool jump = next && b.contains_time(t1);
    if (bulk) bulk_fns.push_back(f);
    if (jump) jump_fns.push_back(f);
    if (bulk || jump) {
      x_lo = std::min(x_lo, b.x_a);
      x_hi = std::max(x_hi, b.x_b);
    }
  }
  if (bulk_fns.empty() && jump_fns.empty()) return;
  if (!bulk_fns.empty()) add_boundary(level, bulk_fns);

  const std::size_t n = mesh_.interior_points();
  const std::size_t first = cell_of(mesh_, x_lo);
  const std::size_t last = cell_of(mesh_, x_hi);
  // Fans at interfaces first-1 .. last, stored at offset first.
  std::vector<RiemannFan> fans;
  const std::size_t k_lo = first > 0 ? first - 1 : 0;
  const std::size_t k_hi = std::min(last, n - 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) fans.push_back(interface_fan(model_, mesh_, s, k));
  auto fan_at = [&](std::size_t k) -> const RiemannFan* { return &fans[k - k_lo]; };

  std::vector<double> time_breaks;
  for (std::size_t f : bulk_fns) {
    for (double t : functions_[f].time_breaks()) time_breaks.push_back(t - t0);
  }

  std::vector<std::size_t> cell_bulk;
  std::vector<std::size_t> cell_jump;
  std::vector<double> bulk_breaks;
  std::vector<double> jump_breaks;
  std::vector<double> cuts;
  for (std::size_t i = first; i <= last; ++i) {
    const double left_edge = mesh_.edge(i);
    const double right_edge = mesh_.edge(i + 1);
    cell_bulk.clear();
    cell_jump.clear();
    for (std::size_t f : bulk_fns) {
      if (active_in(f, t0, t1, left_edge, right_edge)) cell_bulk.push_back(f);
    }
    for (std::size_t f : jump_fns) {
      const SupportBox& b = functions_[f].support();
      if (left_edge < b.x_b && right_edge > b.x_a) cell_jump.push_back(f);
    }
    if (cell_bulk.empty() && cell_jump.empty()) continue;
    bulk_breaks.clear();
    for (std::size_t f : cell_bulk) {
      const auto& b = functions_[f].space_breaks();
      bulk_breaks.insert(bulk_breaks.end(), b.begin(), b.end());
    }
    jump_breaks.clear();
    for (std::size_t f : cell_jump) {
      const auto& b = functions_[f].space_breaks();
      jump_breaks.insert(jump_breaks.end(), b.begin(), b.end());
    }

    const MetricState& metric = s.metric[i];
    const MetricState& slope = s.metric_slope[i];
    const double x_center = mesh_.center(i);
    const bool interior = i >= 1 && i + 1 < mesh_.cell_count();
    auto evolve = [&](const ConservedState& u, double tau) {
      if (!interior) return u;
      return ode_step(model_, u, metric, slope, x_center, tau, correction_, options_.ode_substeps);
    };
    const HalfCell halves[2] = {
        {left_edge, x_center, i >= 1 ? fan_at(i - 1) : nullptr, s.u[i]},
        {x_center, right_edge, i < n ? fan_at(i) : nullptr, s.u[i]},
    };

    if (!cell_bulk.empty()) {
      apply_split(0.0, dt, time_breaks, [&](double tau, double wt) {
        const double t = t0 + tau;
        for (const HalfCell& half : halves) {
          integrate_half(half, tau, options_.max_subintervals, bulk_breaks, cuts,
                         [&](double x, double wx, const ConservedState& rp) {
                           const ConservedState u = evolve(rp, tau);
                           const ConservedState flux = model_.flux(metric, u);
                           const ConservedState source = model_.source(metric, u, x);
                           const double w = wt * wx;
                           for (std::size_t f : cell_bulk) {
                             const TestValue v = functions_[f](t, x);
                             terms_[f].bulk += (u * (-v.dt) - flux * v.dx - source * v.value) * w;
                           }
                         });
        }
      });
    }

    if (!cell_jump.empty()) {
      const ConservedState& after = next->state.u[i];
      for (const HalfCell& half : halves) {
        integrate_half(half, dt, options_.max_subintervals, jump_breaks, cuts,
                       [&](double x, double wx, const ConservedState& rp) {
                         const ConservedState diff = after - evolve(rp, dt);
                         for (std::size_t f : cell_jump) {
                           terms_[f].jump += diff * (functions_[f](t1, x).value * wx);
                         }
                       });
      }
    }
  }
}

std::vector<ResidualTerms> ResidualAccumulator::finish() const {
  if (!first_time_) throw CoverageError("residual: no snapshots");
  if (gap_) throw CoverageError(*gap_);
  const double t_first = *first_time_;
  const double t_last = pending_->state.time;
  const double tol = 1e-12 * std::max({1.0, std::abs(t_first), std::abs(t_last)});
  const double x_tol = 1e-12 * std::max({1.0, std::abs(mesh_.r_min()), std::abs(mesh_.r_max())});
  for (const TestFunction& fn : functions_) {
    const SupportBox& b = fn.support();
    if (b.t_a < t_first - tol || b.t_b > t_last + tol || b.x_a < mesh_.r_min() - x_tol ||
        b.x_b > mesh_.r_max() + x_tol) {
      std::ostringstream os;
      os << "trajectory covers [" << t_first << ", " << t_last << "] x [" << mesh_.r_min() << ", "
         << mesh_.r_max() << "] but " << fn.name() << " is supported on [" << b.t_a << ", "
         << b.t_b << "] x [" << b.x_a << ", " << b.x_b << "]";
      throw CoverageError(os.str());
    }
  }
  std::vector<ResidualTerms> out = terms_;
  for (ResidualTerms& r : out) r.epsilon = r.bulk - r.initial - r.boundary;
  return out;
}

std::vector<ResidualTerms> residuals(const Model& model, const Trajectory& trajectory,
                                     std::span<const TestFunction> functions,
                                     ResidualOptions options) {
  ResidualAccumulator acc(model, trajectory.mesh, trajectory.correction,
                          {functions.begin(), functions.end()}, options);
  for (const Snapshot& s : trajectory.snapshots) acc.consume(s);
  return acc.finish();
}

ConservedState residual(const Model& model, const Trajectory& trajectory, const TestFunction& phi) {
  return residuals(model, trajectory, std::span(&phi, 1)).front().epsilon;
}

ConservedState jump_residual(const Model& model, const Trajectory& trajectory,
                             const TestFunction& phi) {
  return residuals(model, trajectory, std::span(&phi, 1)).front().jump;
}

// ---------------------------------------------------------------------------
// Averaging lemmas

AverageBoundResult check_average_bound(std::span<const ConservedState> samples,
                                       bool corrupt_average) {
  if (samples.empty()) throw ConfigError("samples", "need at least one sample");
  const std::size_t n = samples.size();
  AverageBoundResult result;

  const ConservedState& base = samples[0];
  ConservedState sum(base.size());
  double scale = 0.0;
  for (const ConservedState& u : samples) {
    sum += u - base;
    scale = std::max(scale, u.norm1());
  }
  result.average = base + sum * (1.0 / static_cast<double>(n));
  if (corrupt_average) {
    ConservedState hi = base;
    ConservedState lo = base;
    for (const ConservedState& u : samples) {
      for (std::size_t c = 0; c < u.size(); ++c) {
        hi[c] = std::max(hi[c], u[c]);
        lo[c] = std::min(lo[c], u[c]);
      }
    }
    result.average = hi * 2.0 - lo;
  }

  for (std::size_t k = 0; k < n; ++k) {
    const double d = (result.average - samples[k]).norm1();
    if (d > result.deviation) {
      result.deviation = d;
      result.witness = k;
    }
  }
  if (base.size() == 1) {
    const auto [lo, hi] = std::minmax_element(
        samples.begin(), samples.end(),
        [](const ConservedState& a, const ConservedState& b) { return a[0] < b[0]; });
    result.oscillation = (*hi)[0] - (*lo)[0];
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l) {
        result.oscillation = std::max(result.oscillation, (samples[k] - samples[l]).norm1());
      }
    }
  }
  result.total_variation = total_variation(samples);

  const double slack = 16.0 * std::numeric_limits<double>::epsilon() * scale;
  result.pass = result.deviation <= result.oscillation + slack &&
                result.oscillation <= result.total_variation + slack;
  return result;
}

OdeAverageMeasurement measure_ode_average(const Model& model, const CellProblem& p,
                                          const std::function<double(double)>& phi,
                                          double phi_sup, bool correction, int ode_substeps) {
  if (!(p.dx > 0.0) || !(p.dt > 0.0)) throw ConfigError("cell", "need dx > 0 and dt > 0");
  const double half = 0.5 * p.dx;
  const RiemannFan left = solve_riemann(model, (p.metric[0] + p.metric[1]) * 0.5, p.left, p.center,
                                        {0.0, p.x_center - half});
  const RiemannFan right = solve_riemann(model, (p.metric[1] + p.metric[2]) * 0.5, p.center,
                                         p.right, {0.0, p.x_center + half});
  if (left.max_speed() * p.dt > half * (1.0 + 1e-12) ||
      -right.min_speed() * p.dt > half * (1.0 + 1e-12)) {
    throw CflViolation("cell problem: a fan leaves its half cell within dt");
  }

  const double xi_half = half / p.dt;
  const ConservedState average =
      (left.integrate_xi(0.0, xi_half) + right.integrate_xi(-xi_half, 0.0)) * (p.dt / p.dx);
  auto evolve = [&](const ConservedState& u) {
    return ode_step(model, u, p.metric[1], p.metric_slope, p.x_center, p.dt, correction,
                    ode_substeps);
  };
  const ConservedState evolved_average = evolve(average);

  ConservedState integral(model.state_dim());
  std::vector<double> cuts;
  const HalfCell halves[2] = {{p.x_center - half, p.x_center, &left, p.center},
                              {p.x_center, p.x_center + half, &right, p.center}};
  for (const HalfCell& h : halves) {
    integrate_half(h, p.dt, 16, {}, cuts, [&](double x, double w, const ConservedState& rp) {
      integral += (evolved_average - evolve(rp)) * (phi(x) * w);
    });
  }

  OdeAverageMeasurement m;
  m.lhs = integral.norm1();
  m.phi_sup = phi_sup;
  m.variation = fan_variation(left, 0.0, xi_half) + fan_variation(right, -xi_half, 0.0) +
                (left.sample(xi_half) - right.sample(-xi_half)).norm1();
  m.constant = m.variation > 0.0 ? m.lhs / (phi_sup * p.dx * p.dt * m.variation) : 0.0;
  return m;
}

OdeAverageStudy ode_average_study(const Model& model, const ShockedCellSetup& setup,
                                  std::span<const double> dx_levels) {
  constexpr double kPhiHalfWidth = 0.25;
  auto phi = [&](double x) {
    const double s = (x - setup.x_center) / kPhiHalfWidth;
    return std::abs(s) < 1.0 ? (1.0 - s * s) * (1.0 - s * s) : 0.0;
  };

  OdeAverageStudy study;
  for (double dx : dx_levels) {
    CellProblem p;
    p.left = setup.left;
    p.center = setup.center;
    p.right = setup.right;
    p.metric = {setup.metric - setup.metric_slope * dx, setup.metric,
                setup.metric + setup.metric_slope * dx};
    p.metric_slope = setup.metric_slope;
    p.x_center = setup.x_center;
    p.dx = dx;
    double max_speed = 0.0;
    const ConservedState* cells[3] = {&p.left, &p.center, &p.right};
    for (int k = 0; k < 3; ++k) {
      for (double s : model.wave_speeds(p.metric[k], *cells[k])) {
        max_speed = std::max(max_speed, std::abs(s));
      }
    }
    if (!(max_speed > 0.0)) throw ConfigError("cell", "all wave speeds vanish");
    p.dt = setup.cfl * dx / max_speed;
    study.dx.push_back(dx);
    study.measurements.push_back(measure_ode_average(model, p, phi, 1.0, setup.correction));
  }

  std::vector<double> c;
  for (const auto& m : study.measurements) c.push_back(m.constant);
  if (c.empty()) return study;
  const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
  study.max_over_min = *lo > 0.0 ? *hi / *lo : (*hi > 0.0 ? INFINITY : 1.0);
  const double med = median(c);
  study.max_over_median = med > 0.0 ? *hi / med : (*hi > 0.0 ? INFINITY : 1.0);
  bool increasing = c.size() > 1;
  for (std::size_t k = 1; k < c.size(); ++k) increasing = increasing && c[k] > c[k - 1];
  // Increments that shrink geometrically mean convergence to a finite limit,
  // not a growth trend.
  const bool decelerating =
      c.size() > 2 && (c.back() - c[c.size() - 2]) <
                          OdeAverageStudy::kDecelerationRatio * (c[c.size() - 2] - c[c.size() - 3]);
  study.monotone_growth = increasing && !decelerating &&
                          c.back() > OdeAverageStudy::kGrowthFactor * c.front();
  return study;
}

// ---------------------------------------------------------------------------
// Convergence study

double student_t_975(std::size_t dof) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                     2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                     2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                     2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof == 0) return kNaN;
  if (dof <= std::size(table)) return table[dof - 1];
  return 1.960;
}

SlopeFit fit_log2_slope(std::span<const double> dx, std::span<const double> values,
                        std::size_t count) {
  if (dx.size() != values.size()) throw ConfigError("fit", "dx and values differ in length");
  SlopeFit fit;
  const std::size_t n = std::min(count, dx.size());
  fit.points = n;
  fit.slope = fit.intercept = fit.std_error = fit.ci_low = fit.ci_high = kNaN;
  if (n < 2) return fit;
  const std::size_t offset = dx.size() - n;
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double v = std::abs(values[offset + k]);
    if (!(v > 0.0) || !std::isfinite(v) || !(dx[offset + k] > 0.0)) return fit;
    x[k] = std::log2(dx[offset + k]);
    y[k] = std::log2(v);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = y[k] - (fit.intercept + fit.slope * x[k]);
      ss += r * r;
    }
    fit.std_error = std::sqrt(ss / static_cast<double>(n - 2) / sxx);
    const double t = student_t_975(n - 2);
    fit.ci_low = fit.slope - t * fit.std_error;
    fit.ci_high = fit.slope + t * fit.std_error;
  }
  return fit;
}

std::vector<ConservedState> project_cells(const Mesh& fine, std::span<const ConservedState> values,
                                          const Mesh& coarse) {
  if (fine.r_min() != coarse.r_min() || fine.r_max() != coarse.r_max()) {
    throw ConfigError("mesh", "projection needs meshes on the same interval");
  }
  if (values.size() != fine.cell_count()) throw ConfigError("mesh", "value count != cell count");
  std::vector<ConservedState> out;
  out.reserve(coarse.cell_count());
  std::size_t j = 0;
  for (std::size_t c = 0; c < coarse.cell_count(); ++c) {
    const double a = coarse.edge(c);
    const double b = coarse.edge(c + 1);
    ConservedState acc(values.empty() ? 0 : values[0].size());
    while (j < fine.cell_count() && fine.edge(j + 1) <= a) ++j;
    for (std::size_t k = j; k < fine.cell_count() && fine.edge(k) < b; ++k) {
      const double overlap = std::min(b, fine.edge(k + 1)) - std::max(a, fine.edge(k));
      if (overlap > 0.0) acc += values[k] * overlap;
    }
    out.push_back(acc * (1.0 / (b - a)));
  }
  return out;
}

double l1_difference(const Mesh& coarse, std::span<const ConservedState> coarse_values,
                     const Mesh& fine, std::span<const ConservedState> fine_values) {
  if (coarse_values.size() != coarse.cell_count()) {
    throw ConfigError("mesh", "value count != cell count");
  }
  const std::vector<ConservedState> projected = project_cells(fine, fine_values, coarse);
  double sum = 0.0;
  for (std::size_t c = 0; c < coarse.cell_count(); ++c) {
    sum += (coarse_values[c] - projected[c]).norm1() * (coarse.edge(c + 1) - coarse.edge(c));
  }
  return sum;
}

std::vector<ConservedState> cells_at(const Trajectory& trajectory, double t) {
  const auto& snaps = trajectory.snapshots;
  if (snaps.empty()) throw CoverageError("trajectory has no snapshots");
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    if (snaps[k].state.time == t) return snaps[k].state.u;
    if (k + 1 < snaps.size() && snaps[k].state.time < t && t < snaps[k + 1].state.time) {
      const double t0 = snaps[k].state.time;
      const double t1 = snaps[k + 1].state.time;
      const double w = (t - t0) / (t1 - t0);
      std::vector<ConservedState> out(snaps[k].state.u.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = snaps[k].state.u[i] * (1.0 - w) + snaps[k + 1].state.u[i] * w;
      }
      return out;
    }
  }
  std::ostringstream os;
  os << "t=" << t << " outside the recorded range [" << snaps.front().state.time << ", "
     << snaps.back().state.time << "]";
  throw CoverageError(os.str());
}

ResidualReport convergence_study(const LevelFactory& factory, std::span<const std::size_t> levels,
                                 std::span<const TestFunction> functions,
                                 ResidualOptions options) {
  if (levels.size() < 4) throw ConfigError("study.levels", "need at least 4 refinement levels");
  std::vector<std::pair<Solver, GridState>> setups;
  setups.reserve(levels.size());
  for (std::size_t k = 0; k < levels.size(); ++k) {
    setups.push_back(factory(levels[k]));
    if (k > 0) {
      const double ratio = setups[k - 1].first.mesh().dx() / setups[k].first.mesh().dx();
      if (!(ratio >= 1.9 && ratio <= 2.1)) {
        std::ostringstream os;
        os << "level " << k << " refines dx by " << ratio << ", expected about 2";
        throw ConfigError("study.levels", os.str());
      }
    }
  }

  ResidualReport report;
  for (const TestFunction& fn : functions) report.function_names.push_back(fn.name());
  std::vector<Mesh> meshes;
  for (auto& [solver, initial] : setups) {
    ResidualOptions level_options = options;
    level_options.ode_substeps = solver.options().ode_substeps;
    ResidualAccumulator acc(solver.model(), solver.mesh(), solver.options().correction,
                            {functions.begin(), functions.end()}, level_options);
    VariationRecorder variation;
    RunOptions run_options;
    run_options.store_snapshots = false;
    run_options.observer = [&](const Snapshot& s) {
      acc.consume(s);
      variation(s);
    };
    Trajectory traj;
    try {
      traj = run(solver, initial, run_options);
    } catch (const RunAborted& e) {
      throw RunAborted("level n=" + std::to_string(solver.mesh().interior_points()) + ": " +
                           e.what(),
                       e.partial());
    }

    StudyLevel level;
    level.n = solver.mesh().interior_points();
    level.dx = solver.mesh().dx();
    level.stats = traj.stats;
    level.final_state = traj.final_snapshot().state;
    level.variation = variation.history();
    level.residuals = acc.finish();
    report.levels.push_back(std::move(level));
    meshes.push_back(solver.mesh());
  }

  std::vector<double> dx;
  for (const StudyLevel& l : report.levels) dx.push_back(l.dx);
  for (std::size_t f = 0; f < functions.size(); ++f) {
    std::vector<double> eps;
    std::vector<double> jump;
    for (const StudyLevel& l : report.levels) {
      eps.push_back(l.residuals[f].epsilon.norm1());
      jump.push_back(l.residuals[f].jump.norm1());
    }
    report.epsilon_fits.push_back(fit_log2_slope(dx, eps));
    report.jump_fits.push_back(fit_log2_slope(dx, jump));
  }

  std::vector<double> coarse_dx;
  for (std::size_t k = 0; k + 1 < report.levels.size(); ++k) {
    const GridState& a = report.levels[k].final_state;
    const GridState& b = report.levels[k + 1].final_state;
    if (!same_time(a.time, b.time)) {
      throw CoverageError("levels ended at different times; cannot compare");
    }
    report.l1_differences.push_back(l1_difference(meshes[k], a.u, meshes[k + 1], b.u));
    coarse_dx.push_back(report.levels[k].dx);
  }
  for (std::size_t k = 0; k + 1 < report.l1_differences.size(); ++k) {
    report.cauchy_ratios.push_back(report.l1_differences[k] / report.l1_differences[k + 1]);
  }
  report.l1_fit = fit_log2_slope(coarse_dx, report.l1_differences);

  std::vector<double> tv;
  std::vector<double> dt_dx;
  for (const StudyLevel& l : report.levels) {
    tv.push_back(l.variation.max_value);
    dt_dx.push_back(l.stats.dt_min / l.dx);
  }
  report.variation_spread = relative_spread(tv);
  report.dt_dx_spread = relative_spread(dt_dx);
  return report;
}

StudyVerdict judge_study(const ResidualReport& report, double threshold) {
  auto all_reach = [&](const std::vector<SlopeFit>& fits) {
    return !fits.empty() && std::all_of(fits.begin(), fits.end(), [&](const SlopeFit& f) {
      return f.slope >= threshold;
    });
  };
  StudyVerdict v;
  v.epsilon_ok = all_reach(report.epsilon_fits);
  v.jump_ok = all_reach(report.jump_fits);
  v.l1_ok = report.l1_fit.slope >= threshold;
  v.pass = v.epsilon_ok && v.jump_ok && v.l1_ok;
  return v;
}

}  // namespace ligm
