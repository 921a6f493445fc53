#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ligm/components.hpp"
#include "ligm/errors.hpp"
#include "ligm/model.hpp"
#include "ligm/riemann.hpp"

namespace ligm {

/// Uniform grid on [r_min, r_max] with n interior gridpoints and n+1 cells of
/// width Δx = (r_max − r_min)/(n+1). Cell i spans [edge(i), edge(i+1)].
class Mesh {
 public:
  Mesh() = default;
  Mesh(double r_min, double r_max, std::size_t interior_points);

  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  std::size_t interior_points() const { return n_; }
  std::size_t cell_count() const { return n_ + 1; }
  double dx() const { return dx_; }
  double edge(std::size_t k) const;
  double center(std::size_t i) const { return r_min_ + (static_cast<double>(i) + 0.5) * dx_; }

  bool operator==(const Mesh&) const = default;

 private:
  double r_min_ = 0.0;
  double r_max_ = 1.0;
  std::size_t n_ = 2;
  double dx_ = 1.0 / 3.0;
};

/// Solution at one time level: per-cell conserved states, frozen metric at
/// cell centers, metric at cell edges and its per-cell slope (the Lipschitz
/// piecewise-linear reconstruction).
struct GridState {
  double time = 0.0;
  std::size_t step = 0;
  std::vector<ConservedState> u;
  std::vector<MetricState> metric;
  std::vector<MetricState> metric_edges;
  std::vector<MetricState> metric_slope;

  bool operator==(const GridState&) const = default;
};

/// GridState at t_j together with what the step t_j → t_j + dt produced
/// before the ODE step. The last snapshot of a run has dt == 0 and no
/// averages or traces.
struct Snapshot {
  GridState state;
  double dt = 0.0;
  std::vector<ConservedState> averages;  // ū_i, one per cell
  std::vector<ConservedState> traces;    // u*_{k+½}, one per interior interface

  bool operator==(const Snapshot&) const = default;
};

struct SchemeOptions {
  double cfl = 0.45;
  double t_end = 1.0;
  /// Include −A'·∇_A f in the ODE step. Off only for the ablation study.
  bool correction = true;
  /// Metric value at r_min; the spatial metric ODE is integrated from here.
  MetricState boundary_metric;
  int ode_substeps = 4;
};

/// Interface Riemann fans and their traces at ξ = 0.
struct InterfaceSweep {
  std::vector<RiemannFan> fans;
  std::vector<ConservedState> traces;
};

struct StepResult {
  GridState next;
  Snapshot snapshot;
  /// The step was shortened to land on t_end rather than set by the CFL rule.
  bool clipped = false;
};

/// Frozen-metric Riemann fans at every interior interface k (between cells k
/// and k+1) with metric ½(A_k + A_{k+1}), and their traces at ξ = 0.
InterfaceSweep sweep_interfaces(const Model& model, const Mesh& mesh, const GridState& state);

/// Integrates û_t = G(A, û, x) from `u` over `dt` with classical RK4 and
/// `substeps` equal substeps. Throws InadmissibleState if a stage leaves the
/// admissible set.
ConservedState ode_step(const Model& model, const ConservedState& u, const MetricState& metric,
                        const MetricState& metric_slope, double x, double dt, bool correction,
                        int substeps = 4);

/// Locally inertial Godunov method with dynamical time dilation.
class Solver {
 public:
  Solver(std::shared_ptr<const Model> model, Mesh mesh, SchemeOptions options);

  const Model& model() const { return *model_; }
  std::shared_ptr<const Model> model_ptr() const { return model_; }
  const Mesh& mesh() const { return mesh_; }
  const SchemeOptions& options() const { return options_; }

  /// Builds the state at t0 from cell data, integrating the metric.
  GridState initial_state(std::vector<ConservedState> u, double t0) const;

  /// cfl·Δx / max wave speed; +∞ when every speed is zero.
  double cfl_limit(const GridState& state) const;
  /// min(cfl_limit, t_end − t).
  double cfl_time_step(const GridState& state) const;

  /// One frozen-metric Riemann problem per interior interface with metric
  /// ½(A_k + A_{k+1}).
  InterfaceSweep riemann_sweep(const GridState& state) const;

  /// ū_i = u_i − (Δt/Δx)·(f(A_i, u*_{i+½}) − f(A_i, u*_{i−½})) on interior
  /// cells; boundary cells are returned unchanged.
  std::vector<ConservedState> godunov_average(const GridState& state, const InterfaceSweep& sweep,
                                              double dt) const;

  /// Recomputes metric, edge values and slopes from state.u, integrating
  /// A' = h left to right with RK4 on half cells.
  void metric_update(GridState& state) const;

  StepResult advance(const GridState& state) const;

 private:
  void check_containment(const InterfaceSweep& sweep, double dt, std::size_t step) const;

  std::shared_ptr<const Model> model_;
  Mesh mesh_;
  SchemeOptions options_;
};

struct RunOptions {
  /// Record every `cadence`-th step (the final state is always recorded).
  std::size_t cadence = 1;
  /// Stop after this many steps even before t_end; 0 means no limit.
  std::size_t max_steps = 0;
  /// Called with every recorded snapshot, in time order. The closing dt == 0
  /// snapshot is only reported once t_end is reached.
  std::function<void(const Snapshot&)> observer;
  /// Keep recorded snapshots in the trajectory. Streaming consumers that only
  /// use the observer can turn this off; the final snapshot is always kept.
  bool store_snapshots = true;
};

struct RunStats {
  std::size_t steps = 0;
  /// min_j Δt_j over steps set by the CFL rule (a final step clipped to land
  /// on t_end is excluded), and the largest step.
  double dt_min = 0.0;
  double dt_max = 0.0;
  /// Smallest step including a clipped final step.
  double dt_min_all = 0.0;
  /// C = max_j Δt_j / Δt.
  double dilation_constant = 0.0;
  double wall_seconds = 0.0;
};

struct Trajectory {
  Mesh mesh;
  bool correction = true;
  std::vector<Snapshot> snapshots;
  std::vector<double> step_sizes;
  std::vector<bool> step_clipped;
  RunStats stats;

  const Snapshot& final_snapshot() const { return snapshots.back(); }
};

/// Thrown when a run aborts; carries everything recorded up to the failure.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, Trajectory partial)
      : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

Trajectory run(const Solver& solver, const GridState& initial, const RunOptions& options = {});

/// Continues `trajectory` from `state` (e.g. after restore).
void continue_run(const Solver& solver, GridState state, Trajectory& trajectory,
                  const RunOptions& options = {});

}  // namespace ligm
