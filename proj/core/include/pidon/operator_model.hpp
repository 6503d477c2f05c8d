#pragma once

// Operator surrogates mapping (initial condition, sampled bus voltage, t) to
// the machine state. Three layouts share one container:
//   Unstacked  one branch on [x0; sensors], one trunk on t
//   StackedN   branch A on x0 times (elementwise) branch B on sensors, one trunk
//   Pinn       a single network on [x0; sensors; t]
// DeepONet outputs split the latent dimension into kStateDim contiguous blocks;
// state j is the inner product of block j of the branch and trunk outputs plus
// a bias. Everything is computed in normalized units and mapped back with the
// stored statistics.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pidon/autodiff.hpp"
#include "pidon/dataset.hpp"
#include "pidon/mlp.hpp"

namespace pidon {

enum class Arch { Unstacked, StackedN, Pinn };
std::string_view to_string(Arch a);
Arch parse_arch(std::string_view s);

struct ModelSpec {
  Arch arch{Arch::Unstacked};
  std::size_t sensors{100};  ///< m, samples per channel
  std::size_t latent{64};    ///< p
  std::vector<std::size_t> hidden{64, 64, 64};
  /// Hidden width of the Pinn network; 0 picks the width whose parameter
  /// count is closest to the Unstacked model with the same settings.
  std::size_t pinn_width{0};
  std::uint64_t seed{0};

  void validate() const;
  std::size_t branch_input_dim() const { return kX0Dim + 2 * sensors; }
  bool operator==(const ModelSpec&) const = default;
};

/// Parameter count of the Unstacked model described by `spec`.
std::size_t unstacked_parameter_count(const ModelSpec& spec);
/// Pinn hidden width matched to the Unstacked parameter count.
std::size_t matched_pinn_width(const ModelSpec& spec);

/// Standardization statistics fitted on a training set.
struct Normalization {
  Eigen::RowVectorXd input_mean;  ///< 9 + 2m
  Eigen::RowVectorXd input_std;
  Eigen::RowVectorXd state_mean;  ///< 4
  Eigen::RowVectorXd state_std;
  double horizon{1.0};  ///< t is divided by this

  /// Population statistics; a standard deviation below 1e-12 is stored as 1.
  static Normalization fit(const LabeledDataset& train);

  Eigen::MatrixXd normalize_inputs(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd normalize_states(const Eigen::MatrixXd& physical) const;
  Eigen::MatrixXd denormalize_states(const Eigen::MatrixXd& normalized) const;
  bool operator==(const Normalization&) const = default;
};

struct OperatorModel {
  ModelSpec spec;
  Mlp branch;    ///< Unstacked branch, or branch A of StackedN
  Mlp branch_b;  ///< StackedN only
  Mlp trunk;     ///< DeepONet layouts only
  Mlp pinn;      ///< Pinn only
  Eigen::MatrixXd out_bias;  ///< 1 x 4, DeepONet layouts only
  std::optional<Normalization> norm;

  /// Freshly initialized networks; normalization is left unset.
  static OperatorModel create(const ModelSpec& spec);

  Arch arch() const { return spec.arch; }
  bool is_deeponet() const { return spec.arch != Arch::Pinn; }
  /// Trainable tensors in a fixed order.
  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
  std::size_t parameter_count() const;
  /// Throws NotFitted when normalization statistics are missing.
  void check_fitted() const;
};

struct StateRate {
  std::array<double, 4> state;
  std::array<double, 4> rate;  ///< d state / dt in physical units per second
};

/// Single-point prediction in physical units. Throws DimensionMismatch or NotFitted.
std::array<double, 4> operator_forward(const OperatorModel& model, std::span<const double> x0,
                                       std::span<const double> sensors, double t);
/// Prediction and its time derivative; forward mode through the time input only.
StateRate operator_forward_dt(const OperatorModel& model, std::span<const double> x0,
                              std::span<const double> sensors, double t);
/// operator_forward restricted to Pinn models (InvalidArgument otherwise).
std::array<double, 4> pinn_forward(const OperatorModel& model, std::span<const double> x0,
                                   std::span<const double> sensors, double t);

/// Predictions for every input row at every time: n x n_t x 4 row-major,
/// the layout of LabeledDataset::states. DeepONet layouts evaluate each
/// branch row and each trunk time once.
std::vector<double> predict_grid(const OperatorModel& model, const InputBlock& inputs,
                                 std::span<const double> times);

/// A set of query points with shared branch rows and times factored out.
struct PointBatch {
  Eigen::MatrixXd branch_in;  ///< u x (9 + 2m) raw [x0; sensors]
  Eigen::VectorXd times;      ///< v distinct raw times
  std::vector<int> branch_idx;
  std::vector<int> time_idx;

  std::size_t size() const { return branch_idx.size(); }
};

/// Groups (row, t) query points into a PointBatch; rows and times keep
/// first-appearance order.
PointBatch make_point_batch(const InputBlock& inputs, std::span<const int> rows,
                            std::span<const double> times);

/// Model parameters bound to a tape, in OperatorModel::parameters() order.
struct OperatorVars {
  ad::Tape* tape{nullptr};
  MlpVars branch;
  MlpVars branch_b;
  MlpVars trunk;
  MlpVars pinn;
  ad::Var out_bias;
  std::vector<ad::Var> params;
};

OperatorVars bind(ad::Tape& tape, const OperatorModel& model, bool trainable = true);

struct TapePrediction {
  ad::Var state;  ///< N x 4 physical units
  ad::Var rate;   ///< N x 4 per second; unset unless requested
};

/// Records the batched prediction on the tape of `vars`.
TapePrediction forward(const OperatorVars& vars, const OperatorModel& model,
                       const PointBatch& batch, bool with_rate);

/// Plain batched prediction (N x 4) of a PointBatch, optionally with rates.
Eigen::MatrixXd predict_points(const OperatorModel& model, const PointBatch& batch,
                               Eigen::MatrixXd* rate = nullptr);

}  // namespace pidon
