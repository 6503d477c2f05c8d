#include "pidon/signal.hpp"

#include <cmath>
#include <string>

#include "pidon/errors.hpp"

namespace pidon {

SignalDescriptor SignalDescriptor::first_order(double k, double y_ref, double A_noise,
                                               double w_noise, double y0) {
  SignalDescriptor d;
  d.kind = SignalKind::FirstOrder;
  d.k = k;
  d.y_ref = y_ref;
  d.A_noise = A_noise;
  d.w_noise = w_noise;
  d.y0 = y0;
  return d;
}

SignalDescriptor SignalDescriptor::second_order(double zeta, double w_n, double y_ref, double y0,
                                                double ydot0) {
  SignalDescriptor d;
  d.kind = SignalKind::SecondOrder;
  d.zeta = zeta;
  d.w_n = w_n;
  d.y_ref = y_ref;
  d.y0 = y0;
  d.ydot0 = ydot0;
  return d;
}

void SignalDescriptor::validate() const {
  const std::array<double, kPackedSize> v = pack();
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument("signal descriptor has a non-finite field");
  }
  if (kind == SignalKind::FirstOrder) {
    if (!(k > 0.0)) throw InvalidArgument("first-order signal requires k > 0");
  } else {
    if (!(zeta > 0.0 && zeta < 1.0)) {
      throw InvalidArgument("second-order signal requires 0 < zeta < 1");
    }
    if (!(w_n > 0.0)) throw InvalidArgument("second-order signal requires w_n > 0");
  }
}

std::array<double, SignalDescriptor::kPackedSize> SignalDescriptor::pack() const {
  return {static_cast<double>(kind), k, y_ref, A_noise, w_noise, zeta, w_n, y0, ydot0};
}

SignalDescriptor SignalDescriptor::unpack(std::span<const double> v) {
  if (v.size() != kPackedSize) throw InvalidArgument("packed signal descriptor has wrong size");
  SignalDescriptor d;
  if (v[0] == 0.0) {
    d.kind = SignalKind::FirstOrder;
  } else if (v[0] == 1.0) {
    d.kind = SignalKind::SecondOrder;
  } else {
    throw InvalidArgument("unknown signal kind code " + std::to_string(v[0]));
  }
  d.k = v[1];
  d.y_ref = v[2];
  d.A_noise = v[3];
  d.w_noise = v[4];
  d.zeta = v[5];
  d.w_n = v[6];
  d.y0 = v[7];
  d.ydot0 = v[8];
  return d;
}

namespace {

// Forced response A (k sin wt - w cos wt) / (k^2 + w^2) and its derivative.
SignalSample first_order_particular(const SignalDescriptor& d, double t) {
  const double denom = d.k * d.k + d.w_noise * d.w_noise;
  const double s = std::sin(d.w_noise * t);
  const double c = std::cos(d.w_noise * t);
  return {d.A_noise * (d.k * s - d.w_noise * c) / denom,
          d.A_noise * d.w_noise * (d.k * c + d.w_noise * s) / denom};
}

}  // namespace

SignalSample eval_signal(const SignalDescriptor& d, double t) {
  if (d.kind == SignalKind::FirstOrder) {
    const SignalSample p = first_order_particular(d, t);
    const double p0 = first_order_particular(d, 0.0).y;
    const double decay = std::exp(-d.k * t);
    const double c = d.y0 - d.y_ref - p0;
    return {d.y_ref + p.y + c * decay, p.dydt - d.k * c * decay};
  }
  // e(t) = exp(-a t) (e0 cos wd t + (e'0 + a e0)/wd sin wd t), a = zeta w_n
  const double a = d.zeta * d.w_n;
  const double wd = d.w_n * std::sqrt(1.0 - d.zeta * d.zeta);
  const double e0 = d.y0 - d.y_ref;
  const double b = (d.ydot0 + a * e0) / wd;
  const double decay = std::exp(-a * t);
  const double c = std::cos(wd * t);
  const double s = std::sin(wd * t);
  const double e = decay * (e0 * c + b * s);
  const double de = decay * ((b * wd - a * e0) * c - (e0 * wd + a * b) * s);
  return {d.y_ref + e, de};
}

double eval_signal_d2(const SignalDescriptor& d, double t) {
  const SignalSample s = eval_signal(d, t);
  if (d.kind == SignalKind::FirstOrder) {
    return -d.k * s.dydt + d.A_noise * d.w_noise * std::cos(d.w_noise * t);
  }
  return -2.0 * d.zeta * d.w_n * s.dydt - d.w_n * d.w_n * (s.y - d.y_ref);
}

void signal_rhs(const SignalDescriptor& d, double t, std::span<const double> y,
                std::span<double> dy) {
  if (d.kind == SignalKind::FirstOrder) {
    dy[0] = -d.k * (y[0] - d.y_ref) + d.A_noise * std::sin(d.w_noise * t);
  } else {
    dy[0] = y[1];
    dy[1] = -2.0 * d.zeta * d.w_n * y[1] - d.w_n * d.w_n * (y[0] - d.y_ref);
  }
}

void signal_initial_state(const SignalDescriptor& d, std::span<double> y) {
  y[0] = d.y0;
  if (d.kind == SignalKind::SecondOrder) y[1] = d.ydot0;
}

std::string_view to_string(SignalKind k) {
  return k == SignalKind::FirstOrder ? "first_order" : "second_order";
}

}  // namespace pidon
