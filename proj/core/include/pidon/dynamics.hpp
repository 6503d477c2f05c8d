#pragma once

// Fourth-order (two-axis) synchronous machine connected to a bus whose voltage
// magnitude and phase vary in time.
//
// The right-hand side and the stator current solve are written once as
// templates over the scalar type so the same physics serves plain doubles,
// forward-mode duals and batched reverse-mode tape columns.

#include <array>
#include <cmath>
#include <string_view>

#include "pidon/errors.hpp"

namespace pidon {

/// Reactance used in the first row of the stator algebraic equations.
enum class AlgebraicReactance {
  AsPrinted,  ///< (Xq + Xe), as in the reference case study
  Transient,  ///< (X'q + Xe), the textbook two-axis model
};

/// Sign convention of the electrical-power terms in the swing equation.
enum class ElectricalPowerSign {
  AsPrinted,  ///< Pm - E'd Id + E'q Iq + (X'q - X'd) Id Iq - D w
  Textbook,   ///< Pm - E'd Id - E'q Iq - (X'q - X'd) Id Iq - D w
};

std::string_view to_string(AlgebraicReactance r);
std::string_view to_string(ElectricalPowerSign s);
AlgebraicReactance parse_algebraic_reactance(std::string_view s);
ElectricalPowerSign parse_electrical_power_sign(std::string_view s);

struct SmParams {
  double D{2.0};
  double H{5.06};
  double Rs{0.0};
  double Tdo_p{4.75};
  double Tqo_p{1.6};
  double Xd{1.25};
  double Xd_p{0.232};
  double Xq{1.22};
  double Xq_p{0.715};
  double Xe{0.1};
  double Re{0.0};
  double Omega_b{314.159};
  AlgebraicReactance algebraic_reactance{AlgebraicReactance::AsPrinted};
  ElectricalPowerSign power_sign{ElectricalPowerSign::AsPrinted};

  /// Machine and line constants of the case study.
  static SmParams case_study() { return {}; }

  /// Case-study constants with the textbook two-axis stator/swing conventions.
  static SmParams textbook() {
    SmParams p;
    p.algebraic_reactance = AlgebraicReactance::Transient;
    p.power_sign = ElectricalPowerSign::Textbook;
    return p;
  }

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;
};

template <class T>
struct StateOf {
  T delta{};
  T omega{};
  T Eq_p{};
  T Ed_p{};
};

using SmState = StateOf<double>;

/// Exogenous quantities held constant over a trajectory. Only Pm and Efd enter
/// the fourth-order right-hand side; Rf, Vr and Psv are carried along because
/// the initial-condition layout includes them.
struct ExogenousInputs {
  double Pm{0.7048};
  double Efd{1.08};
  double Rf{1.0};
  double Vr{1.105};
  double Psv{0.7048};
};

struct BusVoltage {
  double Vs{1.0};
  double theta_vs{0.0};
};

template <class T>
struct CurrentsOf {
  T Id{};
  T Iq{};
};

using Currents = CurrentsOf<double>;

/// Entries of [[a, -bq], [bd, a]] for the stator equations.
struct StatorMatrix {
  double a;
  double bq;
  double bd;

  static StatorMatrix from(const SmParams& p) {
    const double xq = p.algebraic_reactance == AlgebraicReactance::AsPrinted ? p.Xq : p.Xq_p;
    return {p.Rs + p.Re, xq + p.Xe, p.Xd_p + p.Xe};
  }
  double determinant() const { return a * a + bq * bd; }
};

inline constexpr double kSingularThreshold = 1e-12;

template <class T>
CurrentsOf<T> solve_currents(const StateOf<T>& x, const T& Vs, const T& theta_vs,
                             const SmParams& p) {
  using std::cos;
  using std::sin;
  const StatorMatrix m = StatorMatrix::from(p);
  const double det = m.determinant();
  if (std::abs(det) < kSingularThreshold) {
    throw SingularSystem("stator algebraic matrix is singular");
  }
  const T angle = x.delta - theta_vs;
  const T r1 = x.Ed_p - Vs * sin(angle);
  const T r2 = x.Eq_p - Vs * cos(angle);
  const double inv = 1.0 / det;
  return {(m.a * r1 + m.bq * r2) * inv, (m.a * r2 - m.bd * r1) * inv};
}

inline Currents solve_currents(const SmState& x, const BusVoltage& bus, const SmParams& p) {
  return solve_currents<double>(x, bus.Vs, bus.theta_vs, p);
}

/// Time derivative of (delta, omega, E'q, E'd).
template <class T>
StateOf<T> sm_rhs(const StateOf<T>& x, const T& Pm, const T& Efd, const T& Vs, const T& theta_vs,
                  const SmParams& p) {
  const CurrentsOf<T> i = solve_currents(x, Vs, theta_vs, p);
  const T id_iq = i.Id * i.Iq;
  T electrical = x.Ed_p * i.Id;
  if (p.power_sign == ElectricalPowerSign::AsPrinted) {
    electrical = electrical - x.Eq_p * i.Iq - (p.Xq_p - p.Xd_p) * id_iq;
  } else {
    electrical = electrical + x.Eq_p * i.Iq + (p.Xq_p - p.Xd_p) * id_iq;
  }
  StateOf<T> dx;
  dx.delta = x.omega;
  dx.omega = (Pm - electrical - p.D * x.omega) * (p.Omega_b / (2.0 * p.H));
  dx.Eq_p = (Efd - x.Eq_p - (p.Xd - p.Xd_p) * i.Id) * (1.0 / p.Tdo_p);
  dx.Ed_p = ((p.Xq - p.Xq_p) * i.Iq - x.Ed_p) * (1.0 / p.Tqo_p);
  return dx;
}

inline SmState sm_rhs(const SmState& x, const ExogenousInputs& u, const BusVoltage& bus,
                      const SmParams& p) {
  return sm_rhs<double>(x, u.Pm, u.Efd, bus.Vs, bus.theta_vs, p);
}

inline std::array<double, 4> to_array(const SmState& s) { return {s.delta, s.omega, s.Eq_p, s.Ed_p}; }
inline SmState state_from(const double* v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace pidon
