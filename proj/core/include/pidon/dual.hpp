#pragma once

#include <cmath>
#include <ostream>

namespace pidon {

/// Forward-mode dual number: a value and its derivative along one direction.
struct Dual {
  double value{0.0};
  double tangent{0.0};

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: implicit promotion of constants
  constexpr Dual(double v, double t) : value(v), tangent(t) {}

  static constexpr Dual variable(double v) { return {v, 1.0}; }

  constexpr Dual& operator+=(const Dual& o) {
    value += o.value;
    tangent += o.tangent;
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    value -= o.value;
    tangent -= o.tangent;
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    tangent = tangent * o.value + value * o.tangent;
    value *= o.value;
    return *this;
  }
  constexpr Dual& operator/=(const Dual& o) {
    tangent = (tangent * o.value - value * o.tangent) / (o.value * o.value);
    value /= o.value;
    return *this;
  }
};

constexpr Dual operator-(const Dual& a) { return {-a.value, -a.tangent}; }
constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
constexpr Dual operator/(Dual a, const Dual& b) { return a /= b; }

inline Dual sin(const Dual& a) { return {std::sin(a.value), std::cos(a.value) * a.tangent}; }
inline Dual cos(const Dual& a) { return {std::cos(a.value), -std::sin(a.value) * a.tangent}; }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.tangent};
}
inline Dual tanh(const Dual& a) {
  const double th = std::tanh(a.value);
  return {th, (1.0 - th * th) * a.tangent};
}
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  return {s, 0.5 * a.tangent / s};
}

inline std::ostream& operator<<(std::ostream& os, const Dual& d) {
  return os << d.value << " + " << d.tangent << "e";
}

}  // namespace pidon
