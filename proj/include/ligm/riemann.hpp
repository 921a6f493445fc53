#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "ligm/components.hpp"
#include "ligm/model.hpp"

namespace ligm {

enum class WaveType { kShock, kRarefaction, kContact };

struct Wave {
  WaveType type = WaveType::kShock;
  int family = 1;
  double left_speed = 0.0;
  double right_speed = 0.0;
  ConservedState left_state;
  ConservedState right_state;
};

/// Space-time point the fan emanates from.
struct FanOrigin {
  double t0 = 0.0;
  double x0 = 0.0;
};

/// Exact self-similar solution of u_t + f(A,u)_x = 0 with constant A and
/// piecewise-constant data. Immutable once built by solve_riemann.
class RiemannFan {
 public:
  static constexpr std::size_t kMaxWaves = 3;

  const ConservedState& left_state() const { return left_; }
  const ConservedState& right_state() const { return right_; }
  const MetricState& frozen_metric() const { return metric_; }
  const FanOrigin& origin() const { return origin_; }
  std::span<const Wave> waves() const { return {waves_.data(), count_}; }
  bool is_constant() const { return count_ == 0; }

  /// Slowest and fastest wave edge; zero for a constant fan.
  double min_speed() const;
  double max_speed() const;

  /// Fan value at similarity coordinate ξ = (x − x₀)/(t − t₀). Shocks are
  /// taken from the right at ξ equal to the shock speed.
  ConservedState sample(double xi) const;

  /// Exact cell average over [x_a, x_b] at time `t` after the origin,
  /// integrating constant regions and rarefaction interiors in closed form.
  /// Throws CflViolation if a wave has left the interval.
  ConservedState average(double x_a, double x_b, double t) const;

  /// Exact integral of the fan value over ξ ∈ [xi_a, xi_b].
  ConservedState integrate_xi(double xi_a, double xi_b) const;

 private:
  friend RiemannFan solve_riemann(const Model&, const MetricState&, const ConservedState&,
                                  const ConservedState&, FanOrigin);

  void push_wave(const Wave& wave);
  ConservedState region_state(std::size_t region) const;
  ConservedState rarefaction_value(const Wave& wave, double xi) const;
  ConservedState rarefaction_antiderivative(const Wave& wave, double xi) const;

  ConservedState left_;
  ConservedState right_;
  MetricState metric_;
  FanOrigin origin_;
  WaveStructure structure_ = WaveStructure::kScalarConvex;
  double sound_speed_ = 0.0;
  std::array<Wave, kMaxWaves> waves_{};
  std::size_t count_ = 0;
};

/// System waves whose adjacent states differ by at most this (componentwise)
/// are dropped; scalar waves are always kept.
inline constexpr double kZeroStrength = 1e-14;

/// Tolerance and iteration cap for the middle-state root find.
inline constexpr double kIntersectionTolerance = 1e-12;
inline constexpr int kIntersectionMaxIterations = 200;

/// Solves the frozen-coefficient Riemann problem. Shocks satisfy the Lax
/// entropy inequalities. Throws RiemannError when the wave curves do not
/// intersect in the admissible set or the root find does not converge.
RiemannFan solve_riemann(const Model& model, const MetricState& metric,
                         const ConservedState& left, const ConservedState& right,
                         FanOrigin origin = {});

inline ConservedState sample_fan(const RiemannFan& fan, double xi) { return fan.sample(xi); }

inline ConservedState fan_average(const RiemannFan& fan, double x_a, double x_b, double t) {
  return fan.average(x_a, x_b, t);
}

}  // namespace ligm
