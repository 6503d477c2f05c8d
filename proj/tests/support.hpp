#pragma once

// Independent oracles and fixtures shared by the test binaries.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pidon/dataset.hpp"
#include "pidon/dynamics.hpp"
#include "pidon/mlp.hpp"

namespace pidon::test {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// Machine rows (omega, E'q, E'd) of sm_rhs with omega = 0 as a function of z = (delta, E'q, E'd).
inline Eigen::Vector3d equilibrium_residual(const Eigen::Vector3d& z, const ExogenousInputs& u,
                                            const BusVoltage& bus, const SmParams& p) {
  const SmState d = sm_rhs(SmState{z(0), 0.0, z(1), z(2)}, u, bus, p);
  return {d.omega, d.Eq_p, d.Ed_p};
}

/// Damped Newton with a central-difference Jacobian.
inline SmState newton_equilibrium(const ExogenousInputs& u, const BusVoltage& bus, const SmParams& p,
                                  Eigen::Vector3d z = {0.5, 1.0, 0.0}) {
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector3d f = equilibrium_residual(z, u, bus, p);
    if (f.norm() < 1e-14) break;
    Eigen::Matrix3d jac;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d zp = z;
      Eigen::Vector3d zm = z;
      zp(j) += 1e-7;
      zm(j) -= 1e-7;
      jac.col(j) = (equilibrium_residual(zp, u, bus, p) - equilibrium_residual(zm, u, bus, p)) / 2e-7;
    }
    const Eigen::Vector3d step = jac.fullPivLu().solve(-f);
    double alpha = 1.0;
    while (alpha > 1e-6 && equilibrium_residual(z + alpha * step, u, bus, p).norm() >= f.norm()) alpha *= 0.5;
    z += alpha * step;
  }
  return {z(0), 0.0, z(1), z(2)};
}

/// Equilibrium with a prescribed rotor angle: Newton on the flux rows, then
/// the mechanical power that balances the swing row.
inline SmState balanced_equilibrium(double delta, ExogenousInputs& u, const BusVoltage& bus, const SmParams& p) {
  Eigen::Vector2d z{1.0, 0.0};
  auto rows = [&](const Eigen::Vector2d& v) {
    const SmState d = sm_rhs(SmState{delta, 0.0, v(0), v(1)}, u, bus, p);
    return Eigen::Vector2d{d.Eq_p, d.Ed_p};
  };
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector2d f = rows(z);
    if (f.norm() < 1e-15) break;
    Eigen::Matrix2d jac;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d zp = z;
      Eigen::Vector2d zm = z;
      zp(j) += 1e-7;
      zm(j) -= 1e-7;
      jac.col(j) = (rows(zp) - rows(zm)) / 2e-7;
    }
    z -= jac.fullPivLu().solve(f);
  }
  const SmState x{delta, 0.0, z(0), z(1)};
  u.Pm = 0.0;
  u.Pm = -sm_rhs(x, u, bus, p).omega * 2.0 * p.H / p.Omega_b;
  return x;
}

inline SmParams random_params(Rng& rng) {
  SmParams p;
  p.Rs = rng.uniform(0.0, 0.05);
  p.Re = rng.uniform(0.0, 0.05);
  p.Xd_p = rng.uniform(0.1, 0.5);
  p.Xd = p.Xd_p + rng.uniform(0.0, 1.5);
  p.Xq_p = rng.uniform(0.1, 0.9);
  p.Xq = p.Xq_p + rng.uniform(0.0, 1.0);
  p.Xe = rng.uniform(0.0, 0.5);
  p.algebraic_reactance = rng.uniform(0, 1) < 0.5 ? AlgebraicReactance::AsPrinted : AlgebraicReactance::Transient;
  return p;
}

inline SmState random_state(Rng& rng) {
  return {rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5)};
}

/// Residual norm of the two algebraic stator/network equations.
inline double algebraic_residual(const SmState& x, const BusVoltage& bus, const SmParams& p, const Currents& c) {
  const double xq = p.algebraic_reactance == AlgebraicReactance::AsPrinted ? p.Xq : p.Xq_p;
  const double r1 = (p.Rs + p.Re) * c.Id - (xq + p.Xe) * c.Iq - (x.Ed_p - bus.Vs * std::sin(x.delta - bus.theta_vs));
  const double r2 = (p.Xd_p + p.Xe) * c.Id + (p.Rs + p.Re) * c.Iq - (x.Eq_p - bus.Vs * std::cos(x.delta - bus.theta_vs));
  return std::hypot(r1, r2);
}

/// Constant channel holding `value`.
inline SignalDescriptor constant_signal(double value) {
  return SignalDescriptor::first_order(1.0, value, 0.0, 0.0, value);
}

/// Plain loop implementation of an Mlp forward pass.
inline std::vector<double> reference_mlp(const Mlp& net, std::vector<double> a) {
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Eigen::MatrixXd& w = layers[l].weight;
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = layers[l].bias(0, r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = l + 1 < layers.size() ? std::tanh(acc) : acc;
    }
    a = std::move(z);
  }
  return a;
}

/// Central-difference gradient of f with respect to every entry of `param`.
inline Eigen::MatrixXd fd_gradient(Eigen::MatrixXd& param, const std::function<double()>& f, double h) {
  Eigen::MatrixXd g(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double keep = param.data()[i];
    param.data()[i] = keep + h;
    const double fp = f();
    param.data()[i] = keep - h;
    const double fm = f();
    param.data()[i] = keep;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Fourth-order central-difference gradient; allows a larger h, so round-off stays
/// below the relative error of tiny gradient entries.
inline Eigen::MatrixXd fd4_gradient(Eigen::MatrixXd& param, const std::function<double()>& f, double h) {
  Eigen::MatrixXd g(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double keep = param.data()[i];
    double v[4];
    const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
    for (int k = 0; k < 4; ++k) {
      param.data()[i] = keep + offsets[k] * h;
      v[k] = f();
    }
    param.data()[i] = keep;
    g.data()[i] = (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * h);
  }
  return g;
}

/// max |a - b| / max(|b|, floor).
inline double max_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(b.data()[i]), floor);
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / denom);
  }
  return worst;
}

/// Small domain for fast dataset tests.
inline DomainSpec small_domain(std::uint64_t seed = 11) {
  DomainSpec d;
  d.params = SmParams::textbook();
  d.n_train = 6;
  d.n_val = 3;
  d.n_test = 3;
  d.n_colloc = 4;
  d.colloc_times = 7;
  d.sensors = 5;
  d.solver.eval_dt = 0.05;
  d.seed = seed;
  return d;
}

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("pidon_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pidon::test
