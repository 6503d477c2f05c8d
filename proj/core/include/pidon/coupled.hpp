#pragma once

#include <array>
#include <span>
#include <vector>

#include "pidon/dynamics.hpp"
#include "pidon/signal.hpp"

namespace pidon {

/// Machine plus both bus-voltage channels integrated as one ODE system.
///
/// Layout: [delta, omega, E'q, E'd, <Vs channel states>, <theta channel states>].
/// The closed-form signal evaluators are the production path; this system
/// exists so the channels can be cross-checked against numerical integration.
class CoupledSystem {
 public:
  CoupledSystem(std::array<SignalDescriptor, 2> channels, ExogenousInputs inputs, SmParams params);

  std::size_t dim() const { return 4 + offsets_[2] - offsets_[0]; }

  void rhs(double t, std::span<const double> x, std::span<double> dxdt) const;

  /// Stacks the machine state with the channels' initial states.
  std::vector<double> initial_state(const SmState& x0) const;

  /// Bus voltage read from the channel states of an augmented vector.
  BusVoltage bus_from(std::span<const double> x) const;

 private:
  std::array<SignalDescriptor, 2> channels_;
  ExogenousInputs inputs_;
  SmParams params_;
  std::array<std::size_t, 3> offsets_{};
};

}  // namespace pidon
