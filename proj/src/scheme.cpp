#include "ligm/scheme.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace ligm {

Mesh::Mesh(double r_min, double r_max, std::size_t interior_points)
    : r_min_(r_min), r_max_(r_max), n_(interior_points) {
  if (!(r_min < r_max) || !std::isfinite(r_min) || !std::isfinite(r_max)) {
    throw ConfigError("mesh.r_min", "need finite r_min < r_max");
  }
  if (interior_points < 2) throw ConfigError("mesh.n", "need at least 2 interior gridpoints");
  dx_ = (r_max - r_min) / static_cast<double>(interior_points + 1);
}

double Mesh::edge(std::size_t k) const {
  if (k >= n_ + 1) return r_max_;
  return r_min_ + static_cast<double>(k) * dx_;
}

ConservedState ode_step(const Model& model, const ConservedState& u, const MetricState& metric,
                        const MetricState& metric_slope, double x, double dt, bool correction,
                        int substeps) {
  const double h = dt / substeps;
  auto rhs = [&](const ConservedState& v) {
    return model.ode_rhs(metric, metric_slope, v, x, correction);
  };
  ConservedState v = u;
  for (int s = 0; s < substeps; ++s) {
    const ConservedState k1 = rhs(v);
    const ConservedState k2 = rhs(v + k1 * (0.5 * h));
    const ConservedState k3 = rhs(v + k2 * (0.5 * h));
    const ConservedState k4 = rhs(v + k3 * h);
    v += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
  }
  if (!model.admissible(v)) {
    std::ostringstream os;
    os << "ODE step left the admissible set: " << u << " -> " << v;
    throw InadmissibleState(os.str());
  }
  return v;
}

Solver::Solver(std::shared_ptr<const Model> model, Mesh mesh, SchemeOptions options)
    : model_(std::move(model)), mesh_(mesh), options_(std::move(options)) {
  if (!model_) throw ConfigError("model", "no model given");
  if (!(options_.cfl > 0.0 && options_.cfl < 1.0)) {
    throw ConfigError("cfl", "must lie in (0, 1)");
  }
  if (options_.ode_substeps < 1) throw ConfigError("ode_substeps", "must be positive");
  if (!model_->admissible(options_.boundary_metric)) {
    throw ConfigError("metric.boundary", "inadmissible boundary metric");
  }
}

GridState Solver::initial_state(std::vector<ConservedState> u, double t0) const {
  if (u.size() != mesh_.cell_count()) {
    throw ConfigError("initial", "expected " + std::to_string(mesh_.cell_count()) +
                                     " cell values, got " + std::to_string(u.size()));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i].size() != model_->state_dim() || !model_->admissible(u[i])) {
      std::ostringstream os;
      os << "inadmissible initial value " << u[i] << " in cell " << i;
      throw InadmissibleState(os.str());
    }
  }
  GridState state;
  state.time = t0;
  state.u = std::move(u);
  metric_update(state);
  return state;
}

double Solver::cfl_limit(const GridState& state) const {
  double max_speed = 0.0;
  for (std::size_t i = 0; i < state.u.size(); ++i) {
    const WaveSpeeds speeds = model_->wave_speeds(state.metric[i], state.u[i]);
    for (double s : speeds) max_speed = std::max(max_speed, std::abs(s));
  }
  if (max_speed == 0.0) return std::numeric_limits<double>::infinity();
  return options_.cfl * mesh_.dx() / max_speed;
}

double Solver::cfl_time_step(const GridState& state) const {
  return std::min(cfl_limit(state), options_.t_end - state.time);
}

InterfaceSweep sweep_interfaces(const Model& model, const Mesh& mesh, const GridState& state) {
  const std::size_t interfaces = mesh.interior_points();
  InterfaceSweep sweep;
  sweep.fans.reserve(interfaces);
  sweep.traces.reserve(interfaces);
  for (std::size_t k = 0; k < interfaces; ++k) {
    const MetricState frozen = (state.metric[k] + state.metric[k + 1]) * 0.5;
    try {
      sweep.fans.push_back(solve_riemann(model, frozen, state.u[k], state.u[k + 1],
                                         {state.time, mesh.edge(k + 1)}));
    } catch (const RiemannError& e) {
      std::ostringstream os;
      os << "interface " << k << " (x=" << mesh.edge(k + 1) << ", step " << state.step
         << "): " << e.what();
      throw RiemannError(e.kind(), os.str());
    }
    sweep.traces.push_back(sweep.fans.back().sample(0.0));
  }
  return sweep;
}

InterfaceSweep Solver::riemann_sweep(const GridState& state) const {
  return sweep_interfaces(*model_, mesh_, state);
}

std::vector<ConservedState> Solver::godunov_average(const GridState& state,
                                                    const InterfaceSweep& sweep,
                                                    double dt) const {
  const std::size_t cells = mesh_.cell_count();
  std::vector<ConservedState> averages = state.u;
  const double ratio = dt / mesh_.dx();
  for (std::size_t i = 1; i + 1 < cells; ++i) {
    const MetricState& metric = state.metric[i];
    const ConservedState flux_right = model_->flux(metric, sweep.traces[i]);
    const ConservedState flux_left = model_->flux(metric, sweep.traces[i - 1]);
    averages[i] = state.u[i] - (flux_right - flux_left) * ratio;
    if (!model_->admissible(averages[i])) {
      std::ostringstream os;
      os << "Godunov average left the admissible set in cell " << i << " at step " << state.step
         << " (t=" << state.time << "): " << averages[i];
      throw InadmissibleState(os.str());
    }
  }
  return averages;
}

void Solver::metric_update(GridState& state) const {
  const std::size_t cells = mesh_.cell_count();
  const double half = 0.5 * mesh_.dx();
  state.metric.assign(cells, MetricState());
  state.metric_edges.assign(cells + 1, MetricState());
  state.metric_slope.assign(cells, MetricState());

  auto rk4 = [&](const MetricState& a, double x, const ConservedState& u) {
    const MetricState k1 = model_->metric_rhs(a, u, x);
    const MetricState k2 = model_->metric_rhs(a + k1 * (0.5 * half), u, x + 0.5 * half);
    const MetricState k3 = model_->metric_rhs(a + k2 * (0.5 * half), u, x + 0.5 * half);
    const MetricState k4 = model_->metric_rhs(a + k3 * half, u, x + half);
    return a + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (half / 6.0);
  };
  auto require = [&](const MetricState& a, std::size_t cell) {
    if (!model_->admissible(a)) {
      std::ostringstream os;
      os << "metric " << a << " inadmissible in cell " << cell << " at step " << state.step;
      throw InadmissibleState(os.str());
    }
  };

  MetricState a = options_.boundary_metric;
  state.metric_edges[0] = a;
  for (std::size_t i = 0; i < cells; ++i) {
    const double x_left = mesh_.edge(i);
    const MetricState center = rk4(a, x_left, state.u[i]);
    require(center, i);
    const MetricState right = rk4(center, x_left + half, state.u[i]);
    require(right, i);
    state.metric[i] = center;
    state.metric_edges[i + 1] = right;
    state.metric_slope[i] = (right - a) * (1.0 / mesh_.dx());
    a = right;
  }
}

void Solver::check_containment(const InterfaceSweep& sweep, double dt, std::size_t step) const {
  const double reach = 0.5 * mesh_.dx();
  for (std::size_t k = 0; k < sweep.fans.size(); ++k) {
    const RiemannFan& fan = sweep.fans[k];
    const double extent = std::max(std::abs(fan.min_speed()), std::abs(fan.max_speed())) * dt;
    if (extent > reach * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "fan at interface " << k << " reaches " << extent << " > half cell " << reach
         << " at step " << step;
      throw CflViolation(os.str());
    }
  }
}

StepResult Solver::advance(const GridState& state) const {
  const double limit = cfl_limit(state);
  const double remaining = options_.t_end - state.time;
  const bool clipped = remaining <= limit;
  const double dt = clipped ? remaining : limit;
  if (!(dt > 0.0)) throw Error("advance called at or beyond t_end");

  InterfaceSweep sweep = riemann_sweep(state);
  check_containment(sweep, dt, state.step);
  std::vector<ConservedState> averages = godunov_average(state, sweep, dt);

  GridState next;
  next.time = clipped ? options_.t_end : state.time + dt;
  next.step = state.step + 1;
  next.u = averages;
  const std::size_t cells = mesh_.cell_count();
  for (std::size_t i = 1; i + 1 < cells; ++i) {
    try {
      next.u[i] = ode_step(*model_, averages[i], state.metric[i], state.metric_slope[i],
                           mesh_.center(i), dt, options_.correction, options_.ode_substeps);
    } catch (const InadmissibleState& e) {
      std::ostringstream os;
      os << "cell " << i << ", step " << state.step << ": " << e.what();
      throw InadmissibleState(os.str());
    }
  }
  metric_update(next);

  StepResult result;
  result.next = std::move(next);
  result.snapshot.state = state;
  result.snapshot.dt = dt;
  result.snapshot.averages = std::move(averages);
  result.snapshot.traces = std::move(sweep.traces);
  result.clipped = clipped;
  return result;
}

namespace {

void finalize_stats(Trajectory& trajectory) {
  RunStats& stats = trajectory.stats;
  stats.steps = trajectory.step_sizes.size();
  stats.dt_min = std::numeric_limits<double>::infinity();
  stats.dt_min_all = std::numeric_limits<double>::infinity();
  stats.dt_max = 0.0;
  for (std::size_t j = 0; j < trajectory.step_sizes.size(); ++j) {
    const double dt = trajectory.step_sizes[j];
    stats.dt_max = std::max(stats.dt_max, dt);
    stats.dt_min_all = std::min(stats.dt_min_all, dt);
    if (!trajectory.step_clipped[j]) stats.dt_min = std::min(stats.dt_min, dt);
  }
  if (!std::isfinite(stats.dt_min)) stats.dt_min = stats.dt_min_all;
  if (stats.steps == 0) {
    stats.dt_min = stats.dt_min_all = 0.0;
    stats.dilation_constant = 0.0;
  } else {
    stats.dilation_constant = stats.dt_max / stats.dt_min;
  }
}

}  // namespace

void continue_run(const Solver& solver, GridState state, Trajectory& trajectory,
                  const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t cadence = std::max<std::size_t>(options.cadence, 1);
  if (!trajectory.snapshots.empty() && trajectory.snapshots.back().dt == 0.0) {
    trajectory.snapshots.pop_back();
  }
  auto record_final = [&] {
    Snapshot last{state, 0.0, {}, {}};
    const bool complete = state.time >= solver.options().t_end;
    if (options.observer && complete) options.observer(last);
    trajectory.snapshots.push_back(std::move(last));
    finalize_stats(trajectory);
    trajectory.stats.wall_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  std::size_t taken = 0;
  while (state.time < solver.options().t_end &&
         (options.max_steps == 0 || taken < options.max_steps)) {
    StepResult result;
    try {
      result = solver.advance(state);
    } catch (const Error& e) {
      record_final();
      throw RunAborted(e.what(), trajectory);
    }
    trajectory.step_sizes.push_back(result.snapshot.dt);
    trajectory.step_clipped.push_back(result.clipped);
    if (state.step % cadence == 0) {
      if (options.observer) options.observer(result.snapshot);
      if (options.store_snapshots) trajectory.snapshots.push_back(std::move(result.snapshot));
    }
    state = std::move(result.next);
    ++taken;
  }
  record_final();
}

Trajectory run(const Solver& solver, const GridState& initial, const RunOptions& options) {
  Trajectory trajectory;
  trajectory.mesh = solver.mesh();
  trajectory.correction = solver.options().correction;
  continue_run(solver, initial, trajectory, options);
  return trajectory;
}

}  // namespace ligm
