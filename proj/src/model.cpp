#include "ligm/model.hpp"

#include <cmath>
#include <sstream>

#include "ligm/errors.hpp"

namespace ligm {

namespace {

[[noreturn]] void throw_inadmissible(std::string_view model, const MetricState& metric,
                                     const ConservedState& u) {
  std::ostringstream os;
  os << model << ": inadmissible state u=" << u << " A=" << metric;
  throw InadmissibleState(os.str());
}

void require_dims(const Model& model, const MetricState& metric, const ConservedState& u) {
  if (u.size() != model.state_dim() || metric.size() != model.metric_dim()) {
    std::ostringstream os;
    os << model.id() << ": dimension mismatch (u has " << u.size() << ", expected "
       << model.state_dim() << "; A has " << metric.size() << ", expected "
       << model.metric_dim() << ")";
    throw InadmissibleState(os.str());
  }
}

}  // namespace

bool Model::admissible(const MetricState& metric) const {
  if (metric.size() != metric_dim() || !metric.all_finite()) return false;
  for (double a : metric) {
    if (!(a > params_.metric_floor)) return false;
  }
  return true;
}

void Model::require_admissible(const MetricState& metric, const ConservedState& u) const {
  require_dims(*this, metric, u);
  if (!admissible(metric) || !admissible(u)) throw_inadmissible(id(), metric, u);
}

ConservedState Model::flux(const MetricState& metric, const ConservedState& u) const {
  require_admissible(metric, u);
  return do_flux(metric, u);
}

FluxGradient Model::flux_grad_metric(const MetricState& metric, const ConservedState& u) const {
  require_admissible(metric, u);
  return do_flux_grad_metric(metric, u);
}

ConservedState Model::source(const MetricState& metric, const ConservedState& u,
                             double x) const {
  require_admissible(metric, u);
  return do_source(metric, u, x);
}

MetricState Model::metric_rhs(const MetricState& metric, const ConservedState& u,
                              double x) const {
  require_admissible(metric, u);
  return do_metric_rhs(metric, u, x);
}

StateJacobian Model::flux_jacobian(const MetricState& metric, const ConservedState& u) const {
  require_admissible(metric, u);
  return do_flux_jacobian(metric, u);
}

WaveSpeeds Model::wave_speeds(const MetricState& metric, const ConservedState& u) const {
  require_admissible(metric, u);
  return do_wave_speeds(metric, u);
}

ConservedState Model::ode_rhs(const MetricState& metric, const MetricState& metric_slope,
                              const ConservedState& u, double x, bool correction) const {
  require_admissible(metric, u);
  ConservedState rhs = do_source(metric, u, x);
  if (correction) rhs -= do_flux_grad_metric(metric, u).contract(metric_slope);
  return rhs;
}

// ---------------------------------------------------------------------------
// Synthetic scalar model

SyntheticModel::SyntheticModel(ModelParams params) : Model(params) {}

bool SyntheticModel::admissible(const ConservedState& u) const {
  return u.size() == 1 && u.all_finite();
}

ConservedState SyntheticModel::do_flux(const MetricState& metric, const ConservedState& u) const {
  return {0.5 * metric[0] * u[0] * u[0]};
}

FluxGradient SyntheticModel::do_flux_grad_metric(const MetricState&,
                                                 const ConservedState& u) const {
  FluxGradient grad(1, 1);
  grad.column(0)[0] = 0.5 * u[0] * u[0];
  return grad;
}

ConservedState SyntheticModel::do_source(const MetricState& metric, const ConservedState& u,
                                         double x) const {
  const double h = do_metric_rhs(metric, u, x)[0];
  return {-params().source_coupling * u[0] * h};
}

MetricState SyntheticModel::do_metric_rhs(const MetricState& metric, const ConservedState& u,
                                          double) const {
  return {params().kappa * metric[0] * u[0] * u[0]};
}

StateJacobian SyntheticModel::do_flux_jacobian(const MetricState& metric,
                                               const ConservedState& u) const {
  StateJacobian jac(1);
  jac(0, 0) = metric[0] * u[0];
  return jac;
}

WaveSpeeds SyntheticModel::do_wave_speeds(const MetricState& metric,
                                          const ConservedState& u) const {
  return {metric[0] * u[0]};
}

// ---------------------------------------------------------------------------
// Isothermal Euler-type model

IsothermalModel::IsothermalModel(ModelParams params) : Model(params) {}

bool IsothermalModel::admissible(const ConservedState& u) const {
  return u.size() == 2 && u.all_finite() && u[0] > 0.0;
}

ConservedState IsothermalModel::do_flux(const MetricState& metric,
                                        const ConservedState& u) const {
  const double a = metric[0];
  const double rho = u[0];
  const double m = u[1];
  const double c2 = sound_speed() * sound_speed();
  return {a * m, a * (m * m / rho + c2 * rho)};
}

FluxGradient IsothermalModel::do_flux_grad_metric(const MetricState&,
                                                  const ConservedState& u) const {
  const double rho = u[0];
  const double m = u[1];
  const double c2 = sound_speed() * sound_speed();
  FluxGradient grad(2, 1);
  grad.column(0)[0] = m;
  grad.column(0)[1] = m * m / rho + c2 * rho;
  return grad;
}

ConservedState IsothermalModel::do_source(const MetricState&, const ConservedState& u,
                                          double x) const {
  const double c = params().source_coupling;
  if (c == 0.0) return {0.0, 0.0};
  if (!(x > 0.0)) {
    throw InadmissibleState("isothermal: geometric source needs x > 0, got x=" +
                            std::to_string(x));
  }
  return {0.0, -c * u[0] / x};
}

MetricState IsothermalModel::do_metric_rhs(const MetricState& metric, const ConservedState& u,
                                           double) const {
  return {params().kappa * metric[0] * u[0]};
}

StateJacobian IsothermalModel::do_flux_jacobian(const MetricState& metric,
                                                const ConservedState& u) const {
  const double a = metric[0];
  const double v = u[1] / u[0];
  const double c2 = sound_speed() * sound_speed();
  StateJacobian jac(2);
  jac(0, 0) = 0.0;
  jac(0, 1) = a;
  jac(1, 0) = a * (c2 - v * v);
  jac(1, 1) = a * 2.0 * v;
  return jac;
}

WaveSpeeds IsothermalModel::do_wave_speeds(const MetricState& metric,
                                           const ConservedState& u) const {
  const double a = metric[0];
  const double v = u[1] / u[0];
  const double c = sound_speed();
  return {a * (v - c), a * (v + c)};
}

std::shared_ptr<const Model> make_model(std::string_view id, const ModelParams& params) {
  if (!std::isfinite(params.kappa)) throw ConfigError("model.kappa", "must be finite");
  if (!std::isfinite(params.source_coupling)) {
    throw ConfigError("model.source_coupling", "must be finite");
  }
  if (!std::isfinite(params.metric_floor)) {
    throw ConfigError("model.metric_floor", "must be finite");
  }
  if (id == "synthetic") return std::make_shared<SyntheticModel>(params);
  if (id == "isothermal") {
    if (!(params.sound_speed > 0.0 && params.sound_speed <= 1.0)) {
      throw ConfigError("model.sound_speed", "must lie in (0, 1]");
    }
    return std::make_shared<IsothermalModel>(params);
  }
  throw ConfigError("model.id", "unknown model '" + std::string(id) + "'");
}

}  // namespace ligm
