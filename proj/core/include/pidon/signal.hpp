#pragma once

#include <array>
#include <span>
#include <string_view>

namespace pidon {

enum class SignalKind { FirstOrder = 0, SecondOrder = 1 };

/// Parametric external input channel.
///
/// FirstOrder:  y' = -k (y - y_ref) + A_noise sin(w_noise t)
/// SecondOrder: y'' + 2 zeta w_n y' + w_n^2 (y - y_ref) = 0   (underdamped)
struct SignalDescriptor {
  SignalKind kind{SignalKind::FirstOrder};
  double k{1.0};
  double y_ref{0.0};
  double A_noise{0.0};
  double w_noise{0.0};
  double zeta{0.5};
  double w_n{1.0};
  double y0{0.0};
  double ydot0{0.0};

  static SignalDescriptor first_order(double k, double y_ref, double A_noise, double w_noise,
                                      double y0);
  static SignalDescriptor second_order(double zeta, double w_n, double y_ref, double y0,
                                       double ydot0);

  /// Throws InvalidArgument when the kind-specific ranges are violated.
  void validate() const;

  /// Number of ODE states the channel contributes when integrated numerically.
  int state_dim() const { return kind == SignalKind::FirstOrder ? 1 : 2; }

  /// Flat encoding used by the on-disk format: kind, k, y_ref, A_noise,
  /// w_noise, zeta, w_n, y0, ydot0.
  static constexpr std::size_t kPackedSize = 9;
  std::array<double, kPackedSize> pack() const;
  static SignalDescriptor unpack(std::span<const double> v);

  bool operator==(const SignalDescriptor&) const = default;
};

struct SignalSample {
  double y;
  double dydt;
};

/// Closed-form value and first derivative at t >= 0.
SignalSample eval_signal(const SignalDescriptor& desc, double t);

/// Closed-form second derivative (used to verify the second-order ODE).
double eval_signal_d2(const SignalDescriptor& desc, double t);

/// Right-hand side of the channel ODE for numerical integration. `y` holds
/// state_dim() entries; derivatives are written to `dy`.
void signal_rhs(const SignalDescriptor& desc, double t, std::span<const double> y,
                std::span<double> dy);

/// Initial ODE state of the channel (y0, or y0 and ydot0).
void signal_initial_state(const SignalDescriptor& desc, std::span<double> y);

std::string_view to_string(SignalKind k);

}  // namespace pidon
