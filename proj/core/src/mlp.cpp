#include "pidon/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pidon/errors.hpp"
#include "pidon/sampling.hpp"
#include "activation.hpp"

namespace pidon {

void MlpSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw InvalidArgument("network dimensions must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw InvalidArgument("hidden layer widths must be >= 1");
  }
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t count = 0;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    count += h * in + h;
    in = h;
  }
  return count + output_dim * in + output_dim;
}

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(mix_seed(spec.init_seed, 0x6d6c70));
  std::size_t in = spec.input_dim;
  std::vector<std::size_t> widths = spec.hidden;
  widths.push_back(spec.output_dim);
  for (std::size_t out : widths) {
    Layer layer;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = limit * (2.0 * uniform01(rng) - 1.0);
      }
    }
    layer.bias = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(out));
    layers_.push_back(std::move(layer));
    in = out;
  }
}

Eigen::VectorXd Mlp::forward(std::span<const double> input) const {
  if (input.size() != spec_.input_dim) {
    throw DimensionMismatch("network expects " + std::to_string(spec_.input_dim) + " inputs, got " +
                            std::to_string(input.size()));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias.transpose();
    a = l + 1 < layers_.size() ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.cols() != static_cast<Eigen::Index>(spec_.input_dim)) {
    throw DimensionMismatch("network expects " + std::to_string(spec_.input_dim) + " input columns");
  }
  Eigen::MatrixXd a = x;
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    z.noalias() = a * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.row(0);
    if (l + 1 < layers_.size()) {
      a = detail::fast_tanh(z);
    } else {
      a.swap(z);
    }
  }
  return a;
}

void Mlp::forward_tangent(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xdot, Eigen::MatrixXd& y,
                          Eigen::MatrixXd& ydot) const {
  if (x.cols() != static_cast<Eigen::Index>(spec_.input_dim) || xdot.rows() != x.rows() ||
      xdot.cols() != x.cols()) {
    throw DimensionMismatch("forward_tangent: input/tangent shape mismatch");
  }
  Eigen::MatrixXd a = x;
  Eigen::MatrixXd adot = xdot;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = a * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.row(0);
    Eigen::MatrixXd zdot = adot * layers_[l].weight.transpose();
    if (l + 1 < layers_.size()) {
      a = detail::fast_tanh(z);
      adot = ((1.0 - a.array().square()) * zdot.array()).matrix();
    } else {
      a = std::move(z);
      adot = std::move(zdot);
    }
  }
  y = std::move(a);
  ydot = std::move(adot);
}

std::vector<Dual> Mlp::forward_dual(std::span<const Dual> input) const {
  if (input.size() != spec_.input_dim) throw DimensionMismatch("forward_dual: wrong input size");
  std::vector<Dual> a(input.begin(), input.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    std::vector<Dual> z(static_cast<std::size_t>(layer.weight.rows()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      Dual acc(layer.bias(0, r));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        acc += layer.weight(r, c) * a[static_cast<std::size_t>(c)];
      }
      z[static_cast<std::size_t>(r)] = l + 1 < layers_.size() ? tanh(acc) : acc;
    }
    a = std::move(z);
  }
  return a;
}

MlpVars bind(ad::Tape& tape, const Mlp& net, bool trainable) {
  MlpVars vars;
  for (const Mlp::Layer& layer : net.layers()) {
    vars.weights.push_back(trainable ? tape.variable(layer.weight) : tape.constant(layer.weight));
    vars.biases.push_back(trainable ? tape.variable(layer.bias) : tape.constant(layer.bias));
  }
  return vars;
}

ad::Var forward(const MlpVars& net, const ad::Var& x) {
  ad::Var a = x;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    a = ad::affine(a, net.weights[l], net.biases[l]);
    if (l + 1 < net.weights.size()) a = ad::tanh(a);
  }
  return a;
}

VarPair forward_tangent(const MlpVars& net, const ad::Var& x, const ad::Var& xdot) {
  ad::Var a = x;
  ad::Var adot = xdot;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const ad::Var z = ad::affine(a, net.weights[l], net.biases[l]);
    const ad::Var zdot = ad::matmul_nt(adot, net.weights[l]);
    if (l + 1 < net.weights.size()) {
      a = ad::tanh(z);
      adot = ad::tanh_tangent(a, zdot);
    } else {
      a = z;
      adot = zdot;
    }
  }
  return {a, adot};
}

}  // namespace pidon
