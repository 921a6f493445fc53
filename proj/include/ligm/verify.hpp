#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ligm/components.hpp"
#include "ligm/model.hpp"
#include "ligm/scheme.hpp"

namespace ligm {

/// Gauss-Legendre rule with four nodes, exact for polynomials of degree 7.
struct GaussRule {
  static constexpr std::size_t kNodes = 4;
  static constexpr std::array<double, kNodes> nodes{-0.8611363115940526, -0.3399810435848563,
                                                    0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, kNodes> weights{0.3478548451374538, 0.6521451548625461,
                                                      0.6521451548625461, 0.3478548451374538};

  /// Calls visit(point, weight) for the rule mapped to [a, b].
  template <class Visit>
  static void apply(double a, double b, Visit&& visit) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (std::size_t k = 0; k < kNodes; ++k) visit(mid + half * nodes[k], half * weights[k]);
  }
};

/// Closed space-time rectangle [t_a, t_b] × [x_a, x_b].
struct SupportBox {
  double t_a = 0.0;
  double t_b = 0.0;
  double x_a = 0.0;
  double x_b = 0.0;

  bool overlaps(double t_lo, double t_hi, double x_lo, double x_hi) const {
    return t_lo < t_b && t_hi > t_a && x_lo < x_b && x_hi > x_a;
  }
  bool contains_time(double t) const { return t >= t_a && t <= t_b; }
  bool contains_x(double x) const { return x >= x_a && x <= x_b; }

  bool operator==(const SupportBox&) const = default;
};

struct TestValue {
  double value = 0.0;
  double dt = 0.0;
  double dx = 0.0;
};

/// Lipschitz test function with compact support and analytic derivatives.
class TestFunction {
 public:
  using Evaluator = std::function<TestValue(double t, double x)>;

  /// `evaluate` is only called inside `support`; outside, φ and its
  /// derivatives are zero.
  TestFunction(SupportBox support, Evaluator evaluate, double sup_norm, std::string name = {});

  /// N·[(t−t_a)(t_b−t)(x−x_a)(x_b−x)]³ normalized to sup norm 1.
  static TestFunction bump(const SupportBox& support, std::string name = {});

  TestValue operator()(double t, double x) const;
  const SupportBox& support() const { return support_; }
  double sup_norm() const { return sup_norm_; }
  const std::string& name() const { return name_; }
  /// Times and positions where φ may fail to be smooth (support edges, and
  /// those of every term of a linear combination). Quadrature splits there.
  const std::vector<double>& time_breaks() const { return time_breaks_; }
  const std::vector<double>& space_breaks() const { return space_breaks_; }

 private:
  friend TestFunction linear_combination(double, const TestFunction&, double,
                                         const TestFunction&);

  SupportBox support_;
  Evaluator evaluate_;
  double sup_norm_ = 0.0;
  std::string name_;
  std::vector<double> time_breaks_;
  std::vector<double> space_breaks_;
};

/// α·φ + β·ψ on the bounding box of both supports. The sup norm is the
/// triangle-inequality bound |α|‖φ‖ + |β|‖ψ‖.
TestFunction linear_combination(double alpha, const TestFunction& phi, double beta,
                                const TestFunction& psi);

/// Space-time domain a trajectory covers.
struct Domain {
  double t0 = 0.0;
  double t_end = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
};

/// Bump functions on `boxes`. Each box must lie strictly inside the domain;
/// throws ConfigError otherwise.
std::vector<TestFunction> make_test_functions(std::span<const SupportBox> boxes,
                                              const Domain& domain);

/// Σ_k ‖u_{k+1} − u_k‖₁.
double total_variation(std::span<const ConservedState> cells);

struct VariationHistory {
  std::vector<double> times;
  std::vector<double> values;
  double max_value = 0.0;
};

/// Collects TV(t_j) as snapshots arrive; usable as a run observer.
class VariationRecorder {
 public:
  void operator()(const Snapshot& snapshot);
  const VariationHistory& history() const { return history_; }

 private:
  VariationHistory history_;
};

VariationHistory total_variation_history(const Trajectory& trajectory);

/// Terms of the weak-form residual for one test function.
///   bulk     = ∫∫ −u φ_t − f(A,u) φ_x − g(A,u,x) φ
///   initial  = ∫ u(t0,x) φ(t0,x) dx
///   boundary = ∫ f(A,u)φ|_{r_min} − f(A,u)φ|_{r_max} dt
///   epsilon  = bulk − initial − boundary
///   jump     = Σ_{j≥1} ∫ φ(t_j,x)(u(t_j⁺,x) − u(t_j⁻,x)) dx
struct ResidualTerms {
  ConservedState bulk;
  ConservedState initial;
  ConservedState boundary;
  ConservedState epsilon;
  ConservedState jump;
};

struct ResidualOptions {
  /// Upper bound on quadrature sub-intervals per half cell and time node;
  /// exceeding it raises CoverageError.
  std::size_t max_subintervals = 16;
  int ode_substeps = 4;
};

/// Streams snapshots of one run and accumulates residual terms for many test
/// functions at once. Between t_j and t_{j+1} the approximate solution in the
/// half cells of cell i is û(t − t_j, u^RP(t, x)), where u^RP is the
/// frozen-metric fan of the adjacent interface and û solves the cell ODE.
class ResidualAccumulator {
 public:
  ResidualAccumulator(const Model& model, const Mesh& mesh, bool correction,
                      std::vector<TestFunction> functions, ResidualOptions options = {});

  /// Feed snapshots in time order; the last one must have dt == 0.
  void consume(const Snapshot& snapshot);
  /// Throws CoverageError if the consumed snapshots do not cover every
  /// support contiguously.
  std::vector<ResidualTerms> finish() const;

  std::size_t function_count() const { return functions_.size(); }

 private:
  struct Level {
    GridState state;
    double dt = 0.0;
  };

  void add_initial(const Level& level);
  void add_slab(const Level& level, const Level* next);
  void add_boundary(const Level& level, const std::vector<std::size_t>& active);
  bool active_in(std::size_t f, double t_lo, double t_hi, double x_lo, double x_hi) const;

  const Model& model_;
  Mesh mesh_;
  bool correction_;
  std::vector<TestFunction> functions_;
  ResidualOptions options_;
  std::vector<ResidualTerms> terms_;
  std::optional<Level> pending_;
  std::optional<double> first_time_;
  bool finished_ = false;
  std::optional<std::string> gap_;
};

std::vector<ResidualTerms> residuals(const Model& model, const Trajectory& trajectory,
                                     std::span<const TestFunction> functions,
                                     ResidualOptions options = {});
ConservedState residual(const Model& model, const Trajectory& trajectory, const TestFunction& phi);
ConservedState jump_residual(const Model& model, const Trajectory& trajectory,
                             const TestFunction& phi);

// ---------------------------------------------------------------------------
// Averaging lemmas

struct AverageBoundResult {
  bool pass = true;
  ConservedState average;
  double deviation = 0.0;    // max_k ‖ū − u_k‖₁
  double oscillation = 0.0;  // sup_{k,l} ‖u_k − u_l‖₁
  double total_variation = 0.0;
  std::size_t witness = 0;   // sample attaining the deviation
};

/// Checks max_k ‖ū − u_k‖ ≤ sup_{k,l} ‖u_k − u_l‖ ≤ TV for the arithmetic
/// mean of `samples`, up to a rounding allowance of 16·eps·max‖u_k‖. With
/// `corrupt_average` the mean is replaced by 2·max − min (fault injection).
AverageBoundResult check_average_bound(std::span<const ConservedState> samples,
                                       bool corrupt_average = false);

/// One interior cell with its two neighbours, as seen by a single step.
struct CellProblem {
  ConservedState left;
  ConservedState center;
  ConservedState right;
  /// Metric at the three cell centers; interface fans use their means.
  std::array<MetricState, 3> metric;
  MetricState metric_slope;  // A'_i in the center cell
  double x_center = 0.0;
  double dx = 0.0;
  double dt = 0.0;
};

struct OdeAverageMeasurement {
  double lhs = 0.0;        // |∫ φ (û(Δt, ū) − û(Δt, u^RP)) dx|, 1-norm
  double variation = 0.0;  // TV of u^RP(t_j + Δt, ·) over the cell
  double phi_sup = 0.0;
  double constant = 0.0;   // lhs / (‖φ‖∞ Δx Δt TV)
};

/// Measures how far the ODE step commutes with cell averaging for the fans
/// of one cell at t_j + Δt. `phi` is evaluated on x at that time level.
OdeAverageMeasurement measure_ode_average(const Model& model, const CellProblem& problem,
                                          const std::function<double(double)>& phi,
                                          double phi_sup, bool correction = true,
                                          int ode_substeps = 4);

struct OdeAverageStudy {
  std::vector<double> dx;
  std::vector<OdeAverageMeasurement> measurements;
  double max_over_min = 0.0;
  double max_over_median = 0.0;
  /// Constants strictly increase with refinement, the finest exceeds the
  /// coarsest by more than kGrowthFactor, and the last increment is at least
  /// kDecelerationRatio times the one before (no sign of levelling off).
  bool monotone_growth = false;
  static constexpr double kGrowthFactor = 1.25;
  static constexpr double kDecelerationRatio = 0.75;
};

/// Shocked-cell refinement: neighbours (left, center, right) around a fixed
/// x_center, metric A(x) = A0 + slope·(x − x_center), Δt from `cfl`. The
/// test function is the fixed bump (1 − s²)², s = (x − x_center)/0.25.
struct ShockedCellSetup {
  ConservedState left;
  ConservedState center;
  ConservedState right;
  double x_center = 0.5;
  MetricState metric;
  MetricState metric_slope;
  double cfl = 0.45;
  bool correction = true;
};

OdeAverageStudy ode_average_study(const Model& model, const ShockedCellSetup& setup,
                                  std::span<const double> dx_levels);

// ---------------------------------------------------------------------------
// Convergence study

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log2|value| against log2(dx) over the last `count`
/// entries (the finest levels when dx decreases), with a 95% Student-t
/// interval. Non-positive values make the slope NaN.
SlopeFit fit_log2_slope(std::span<const double> dx, std::span<const double> values,
                        std::size_t count = 4);

/// Two-sided 97.5% Student-t quantile for `dof` degrees of freedom.
double student_t_975(std::size_t dof);

/// Exact conservative average of `fine` onto the cells of `coarse`.
std::vector<ConservedState> project_cells(const Mesh& fine, std::span<const ConservedState> values,
                                          const Mesh& coarse);

/// ∫|u_coarse − P u_fine|₁ dx on the coarse mesh.
double l1_difference(const Mesh& coarse, std::span<const ConservedState> coarse_values,
                     const Mesh& fine, std::span<const ConservedState> fine_values);

/// Cell values at time t, linearly interpolated between the recorded
/// snapshots that bracket it.
std::vector<ConservedState> cells_at(const Trajectory& trajectory, double t);

struct StudyLevel {
  std::size_t n = 0;
  double dx = 0.0;
  RunStats stats;
  GridState final_state;
  VariationHistory variation;
  std::vector<ResidualTerms> residuals;
};

struct ResidualReport {
  std::vector<std::string> function_names;
  std::vector<StudyLevel> levels;
  std::vector<SlopeFit> epsilon_fits;  // one per test function
  std::vector<SlopeFit> jump_fits;
  std::vector<double> l1_differences;  // ‖u_{k} − u_{k+1}‖ between successive levels
  std::vector<double> cauchy_ratios;   // successive ratios of l1_differences
  SlopeFit l1_fit;
  double variation_spread = 0.0;  // (max − min)/min over levels of max_j TV(t_j)
  double dt_dx_spread = 0.0;      // (max − min)/min over levels of Δt/Δx
};

/// Slope thresholds applied to a report: every ε fit, every ε₁ fit and the
/// L¹ self-convergence fit must reach `threshold`.
struct StudyVerdict {
  bool epsilon_ok = false;
  bool jump_ok = false;
  bool l1_ok = false;
  bool pass = false;
};

StudyVerdict judge_study(const ResidualReport& report, double threshold);

/// Builds the solver and initial state for a level with n interior points.
using LevelFactory = std::function<std::pair<Solver, GridState>(std::size_t n)>;

/// Runs every level, evaluating residuals on the fly. Levels must be given
/// coarse to fine, at least four, each halving Δx (ratio in [1.9, 2.1]).
ResidualReport convergence_study(const LevelFactory& factory, std::span<const std::size_t> levels,
                                 std::span<const TestFunction> functions,
                                 ResidualOptions options = {});

}  // namespace ligm
