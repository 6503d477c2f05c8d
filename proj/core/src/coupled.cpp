#include "pidon/coupled.hpp"

#include <vector>

#include "pidon/errors.hpp"

namespace pidon {

CoupledSystem::CoupledSystem(std::array<SignalDescriptor, 2> channels, ExogenousInputs inputs,
                             SmParams params)
    : channels_(channels), inputs_(inputs), params_(params) {
  offsets_[0] = 4;
  offsets_[1] = offsets_[0] + static_cast<std::size_t>(channels_[0].state_dim());
  offsets_[2] = offsets_[1] + static_cast<std::size_t>(channels_[1].state_dim());
}

BusVoltage CoupledSystem::bus_from(std::span<const double> x) const {
  return {x[offsets_[0]], x[offsets_[1]]};
}

void CoupledSystem::rhs(double t, std::span<const double> x, std::span<double> dxdt) const {
  if (x.size() != dim() || dxdt.size() != dim()) {
    throw DimensionMismatch("coupled state has wrong dimension");
  }
  const SmState dm = sm_rhs(state_from(x.data()), inputs_, bus_from(x), params_);
  dxdt[0] = dm.delta;
  dxdt[1] = dm.omega;
  dxdt[2] = dm.Eq_p;
  dxdt[3] = dm.Ed_p;
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t n = offsets_[c + 1] - offsets_[c];
    signal_rhs(channels_[c], t, x.subspan(offsets_[c], n), dxdt.subspan(offsets_[c], n));
  }
}

std::vector<double> CoupledSystem::initial_state(const SmState& x0) const {
  std::vector<double> x(dim());
  x[0] = x0.delta;
  x[1] = x0.omega;
  x[2] = x0.Eq_p;
  x[3] = x0.Ed_p;
  for (std::size_t c = 0; c < 2; ++c) {
    signal_initial_state(channels_[c],
                         std::span<double>(x).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]));
  }
  return x;
}

}  // namespace pidon
