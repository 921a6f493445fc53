#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <stdexcept>

namespace ligm {

inline constexpr std::size_t kMaxComponents = 4;

/// Fixed-capacity vector of reals with a runtime size.
///
/// The tag makes conserved states, metric states and speed lists distinct
/// types so they cannot be mixed up at call sites. Storage is inline; unused
/// slots stay zero so defaulted equality is meaningful.
template <class Tag>
class Components {
 public:
  Components() = default;

  explicit Components(std::size_t size) : size_(size) {
    if (size > kMaxComponents) {
      throw std::length_error("component count exceeds kMaxComponents");
    }
  }

  Components(std::initializer_list<double> values) : Components(values.size()) {
    std::copy(values.begin(), values.end(), data_.begin());
  }

  static Components filled(std::size_t size, double value) {
    Components out(size);
    std::fill_n(out.data_.begin(), size, value);
    return out;
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* begin() { return data_.data(); }
  double* end() { return data_.data() + size_; }
  const double* begin() const { return data_.data(); }
  const double* end() const { return data_.data() + size_; }

  Components& operator+=(const Components& other) {
    for (std::size_t i = 0; i < size_; ++i) data_[i] += other.data_[i];
    return *this;
  }
  Components& operator-=(const Components& other) {
    for (std::size_t i = 0; i < size_; ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Components& operator*=(double s) {
    for (std::size_t i = 0; i < size_; ++i) data_[i] *= s;
    return *this;
  }

  friend Components operator+(Components a, const Components& b) { return a += b; }
  friend Components operator-(Components a, const Components& b) { return a -= b; }
  friend Components operator*(Components a, double s) { return a *= s; }
  friend Components operator*(double s, Components a) { return a *= s; }
  friend Components operator-(Components a) { return a *= -1.0; }

  bool operator==(const Components&) const = default;

  double norm1() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < size_; ++i) sum += std::abs(data_[i]);
    return sum;
  }

  double norm_inf() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size_; ++i) m = std::max(m, std::abs(data_[i]));
    return m;
  }

  bool all_finite() const {
    return std::all_of(begin(), end(), [](double v) { return std::isfinite(v); });
  }

  friend std::ostream& operator<<(std::ostream& os, const Components& c) {
    os << '(';
    for (std::size_t i = 0; i < c.size_; ++i) os << (i ? ", " : "") << c.data_[i];
    return os << ')';
  }

 private:
  std::array<double, kMaxComponents> data_{};
  std::size_t size_ = 0;
};

struct ConservedTag;
struct MetricTag;
struct SpeedTag;

/// The vector u of conserved quantities in one cell.
using ConservedState = Components<ConservedTag>;
/// The vector A of metric components frozen in one cell.
using MetricState = Components<MetricTag>;
/// Characteristic speeds, sorted ascending.
using WaveSpeeds = Components<SpeedTag>;

/// Partial derivatives of the flux with respect to each metric component.
/// Column k holds df/dA_k.
class FluxGradient {
 public:
  FluxGradient(std::size_t state_dim, std::size_t metric_dim)
      : metric_dim_(metric_dim) {
    if (metric_dim > kMaxComponents) throw std::length_error("metric_dim");
    columns_.fill(ConservedState(state_dim));
  }

  std::size_t metric_dim() const { return metric_dim_; }
  ConservedState& column(std::size_t k) { return columns_[k]; }
  const ConservedState& column(std::size_t k) const { return columns_[k]; }

  /// A'·∇_A f for a metric derivative A'.
  ConservedState contract(const MetricState& metric_slope) const {
    ConservedState out = columns_[0] * 0.0;
    for (std::size_t k = 0; k < metric_dim_; ++k) out += columns_[k] * metric_slope[k];
    return out;
  }

 private:
  std::array<ConservedState, kMaxComponents> columns_;
  std::size_t metric_dim_;
};

/// Dense d×d Jacobian ∂f/∂u.
class StateJacobian {
 public:
  explicit StateJacobian(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const { return dim_; }
  double& operator()(std::size_t r, std::size_t c) { return a_[r][c]; }
  double operator()(std::size_t r, std::size_t c) const { return a_[r][c]; }

 private:
  std::array<std::array<double, kMaxComponents>, kMaxComponents> a_{};
  std::size_t dim_;
};

}  // namespace ligm
