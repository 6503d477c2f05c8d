#include "pidon/dynamics.hpp"

#include <cmath>
#include <string>

namespace pidon {

std::string_view to_string(AlgebraicReactance r) {
  return r == AlgebraicReactance::AsPrinted ? "as_printed" : "transient";
}

std::string_view to_string(ElectricalPowerSign s) {
  return s == ElectricalPowerSign::AsPrinted ? "as_printed" : "textbook";
}

AlgebraicReactance parse_algebraic_reactance(std::string_view s) {
  if (s == "as_printed") return AlgebraicReactance::AsPrinted;
  if (s == "transient") return AlgebraicReactance::Transient;
  throw InvalidArgument("algebraic_reactance must be 'as_printed' or 'transient', got '" +
                        std::string(s) + "'");
}

ElectricalPowerSign parse_electrical_power_sign(std::string_view s) {
  if (s == "as_printed") return ElectricalPowerSign::AsPrinted;
  if (s == "textbook") return ElectricalPowerSign::Textbook;
  throw InvalidArgument("electrical_power_sign must be 'as_printed' or 'textbook', got '" +
                        std::string(s) + "'");
}

void SmParams::validate() const {
  const double all[] = {D, H, Rs, Tdo_p, Tqo_p, Xd, Xd_p, Xq, Xq_p, Xe, Re, Omega_b};
  for (double v : all) {
    if (!std::isfinite(v)) throw InvalidArgument("machine parameters must be finite");
  }
  if (!(H > 0)) throw InvalidArgument("H must be > 0");
  if (!(Tdo_p > 0)) throw InvalidArgument("Tdo_p must be > 0");
  if (!(Tqo_p > 0)) throw InvalidArgument("Tqo_p must be > 0");
  if (!(Omega_b > 0)) throw InvalidArgument("Omega_b must be > 0");
  if (!(Xd_p > 0 && Xd >= Xd_p)) throw InvalidArgument("require Xd >= Xd_p > 0");
  if (!(Xq_p > 0 && Xq >= Xq_p)) throw InvalidArgument("require Xq >= Xq_p > 0");
}

}  // namespace pidon
