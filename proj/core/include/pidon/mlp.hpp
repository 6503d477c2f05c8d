#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pidon/autodiff.hpp"
#include "pidon/dual.hpp"

namespace pidon {

struct MlpSpec {
  std::size_t input_dim{1};
  std::vector<std::size_t> hidden{64, 64, 64};
  std::size_t output_dim{1};
  std::uint64_t init_seed{0};

  void validate() const;
  /// Weights plus biases.
  std::size_t parameter_count() const;
  bool operator==(const MlpSpec&) const = default;
};

/// Fully connected network: affine + tanh on every hidden layer, affine output.
///
/// Weights are (out x in), biases (1 x out). Batched evaluation takes one
/// sample per row.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weight;
    Eigen::MatrixXd bias;
  };

  Mlp() = default;
  /// Glorot-uniform weights and zero biases drawn from spec.init_seed.
  explicit Mlp(const MlpSpec& spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t output_dim() const { return spec_.output_dim; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t parameter_count() const { return spec_.parameter_count(); }

  /// Single-sample forward pass. Throws DimensionMismatch.
  Eigen::VectorXd forward(std::span<const double> input) const;
  /// Batched forward pass (rows are samples).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  /// Batched forward mode: outputs and their derivative along `xdot`.
  void forward_tangent(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xdot, Eigen::MatrixXd& y,
                       Eigen::MatrixXd& ydot) const;
  /// Scalar forward mode over dual numbers.
  std::vector<Dual> forward_dual(std::span<const Dual> input) const;

 private:
  MlpSpec spec_;
  std::vector<Layer> layers_;
};

/// Parameters of one Mlp bound to a tape as variables (or constants).
struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

MlpVars bind(ad::Tape& tape, const Mlp& net, bool trainable = true);

ad::Var forward(const MlpVars& net, const ad::Var& x);

struct VarPair {
  ad::Var value;
  ad::Var tangent;
};

/// Forward mode recorded on the tape, so the tangent itself is differentiable.
VarPair forward_tangent(const MlpVars& net, const ad::Var& x, const ad::Var& xdot);

}  // namespace pidon
