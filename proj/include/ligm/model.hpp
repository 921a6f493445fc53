#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "ligm/components.hpp"

namespace ligm {

/// Which exact Riemann solver applies to a model's wave structure.
enum class WaveStructure {
  kScalarConvex,  // one genuinely nonlinear field, flux A·u²/2
  kIsothermal,    // two genuinely nonlinear fields, isothermal gas
};

struct ModelParams {
  /// Isothermal sound speed σ (isothermal model only).
  double sound_speed = 1.0;
  /// Metric coupling κ in h.
  double kappa = 0.0;
  /// Source coupling: multiplies g. Zero gives the homogeneous limit g ≡ 0.
  double source_coupling = 1.0;
  /// Metric admissibility: every metric component must exceed this floor.
  double metric_floor = 0.0;

  bool operator==(const ModelParams&) const = default;
};

/// Balance law u_t + f(A,u)_x = g(A,u,x) with spatial metric law A' = h(A,u,x).
///
/// Public members check admissibility of their arguments and throw
/// InadmissibleState on violation; derived classes implement the protected
/// hooks on already-validated input. All members are pure.
class Model {
 public:
  explicit Model(ModelParams params) : params_(params) {}
  virtual ~Model() = default;

  virtual std::string_view id() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t metric_dim() const = 0;
  virtual WaveStructure wave_structure() const = 0;

  virtual bool admissible(const ConservedState& u) const = 0;
  virtual bool admissible(const MetricState& metric) const;

  const ModelParams& params() const { return params_; }

  ConservedState flux(const MetricState& metric, const ConservedState& u) const;
  FluxGradient flux_grad_metric(const MetricState& metric, const ConservedState& u) const;
  ConservedState source(const MetricState& metric, const ConservedState& u, double x) const;
  MetricState metric_rhs(const MetricState& metric, const ConservedState& u, double x) const;
  StateJacobian flux_jacobian(const MetricState& metric, const ConservedState& u) const;
  /// Eigenvalues of ∂f/∂u, sorted ascending. Throws NonHyperbolic if complex.
  WaveSpeeds wave_speeds(const MetricState& metric, const ConservedState& u) const;

  /// Fractional-step right-hand side G = g − A'·∇_A f. With `correction`
  /// false the metric-gradient term is dropped (ablation only).
  ConservedState ode_rhs(const MetricState& metric, const MetricState& metric_slope,
                         const ConservedState& u, double x, bool correction) const;

  void require_admissible(const MetricState& metric, const ConservedState& u) const;

 protected:
  virtual ConservedState do_flux(const MetricState& metric, const ConservedState& u) const = 0;
  virtual FluxGradient do_flux_grad_metric(const MetricState& metric,
                                           const ConservedState& u) const = 0;
  virtual ConservedState do_source(const MetricState& metric, const ConservedState& u,
                                   double x) const = 0;
  virtual MetricState do_metric_rhs(const MetricState& metric, const ConservedState& u,
                                    double x) const = 0;
  virtual StateJacobian do_flux_jacobian(const MetricState& metric,
                                         const ConservedState& u) const = 0;
  virtual WaveSpeeds do_wave_speeds(const MetricState& metric, const ConservedState& u) const = 0;

 private:
  ModelParams params_;
};

/// Scalar test model: f = A·u²/2, h = κ·A·u², g = −c·u·h (c = source_coupling).
class SyntheticModel final : public Model {
 public:
  explicit SyntheticModel(ModelParams params);

  std::string_view id() const override { return "synthetic"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t metric_dim() const override { return 1; }
  WaveStructure wave_structure() const override { return WaveStructure::kScalarConvex; }
  bool admissible(const ConservedState& u) const override;

 protected:
  ConservedState do_flux(const MetricState& metric, const ConservedState& u) const override;
  FluxGradient do_flux_grad_metric(const MetricState& metric,
                                   const ConservedState& u) const override;
  ConservedState do_source(const MetricState& metric, const ConservedState& u,
                           double x) const override;
  MetricState do_metric_rhs(const MetricState& metric, const ConservedState& u,
                            double x) const override;
  StateJacobian do_flux_jacobian(const MetricState& metric,
                                 const ConservedState& u) const override;
  WaveSpeeds do_wave_speeds(const MetricState& metric, const ConservedState& u) const override;
};

/// Isothermal Euler-type system u = (ρ, m):
///   f = a(A)·(m, m²/ρ + σ²ρ) with a(A) = A,
///   g = c·(0, −ρ/x), h = κ·A·ρ.
class IsothermalModel final : public Model {
 public:
  explicit IsothermalModel(ModelParams params);

  std::string_view id() const override { return "isothermal"; }
  std::size_t state_dim() const override { return 2; }
  std::size_t metric_dim() const override { return 1; }
  WaveStructure wave_structure() const override { return WaveStructure::kIsothermal; }
  bool admissible(const ConservedState& u) const override;

  double sound_speed() const { return params().sound_speed; }

 protected:
  ConservedState do_flux(const MetricState& metric, const ConservedState& u) const override;
  FluxGradient do_flux_grad_metric(const MetricState& metric,
                                   const ConservedState& u) const override;
  ConservedState do_source(const MetricState& metric, const ConservedState& u,
                           double x) const override;
  MetricState do_metric_rhs(const MetricState& metric, const ConservedState& u,
                            double x) const override;
  StateJacobian do_flux_jacobian(const MetricState& metric,
                                 const ConservedState& u) const override;
  WaveSpeeds do_wave_speeds(const MetricState& metric, const ConservedState& u) const override;
};

/// Builds a model by id ("synthetic" or "isothermal"). Throws ConfigError
/// for unknown ids or invalid parameters.
std::shared_ptr<const Model> make_model(std::string_view id, const ModelParams& params);

}  // namespace ligm
