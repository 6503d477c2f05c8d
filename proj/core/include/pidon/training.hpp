#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pidon/dataset.hpp"
#include "pidon/operator_model.hpp"

namespace pidon {

struct TrainConfig {
  double lr{3e-3};
  double weight_decay{0.01};
  std::size_t epochs{10000};
  std::size_t patience{200};
  double min_delta{1e-6};
  std::size_t batch_size{4096};
  double lambda_d{1.0};
  double lambda_pd{1e-3};
  double lambda_pc{1e-4};
  std::uint64_t seed{0};
  bool use_physics{true};

  void validate() const;
};

/// Labeled query points flattened from a dataset, with the quantities the
/// losses need precomputed per point.
struct LabeledPoints {
  const InputBlock* inputs{nullptr};
  std::vector<int> rows;
  std::vector<double> times;
  Eigen::MatrixXd target;  ///< N x 4 true states
  Eigen::MatrixXd source;  ///< N x 4 right-hand side at the true states
  Eigen::MatrixXd drive;   ///< N x 4 columns Pm, Efd, Vs, theta_vs
  SmParams params;

  std::size_t size() const { return rows.size(); }
};

/// Unlabeled query points.
struct CollocationPoints {
  const InputBlock* inputs{nullptr};
  std::vector<int> rows;
  std::vector<double> times;
  Eigen::MatrixXd drive;  ///< N x 4 columns Pm, Efd, Vs, theta_vs
  SmParams params;

  std::size_t size() const { return rows.size(); }
};

/// Every (trajectory, grid time) pair. The dataset must outlive the result.
LabeledPoints labeled_points(const LabeledDataset& ds, const SmParams& params);
CollocationPoints collocation_points(const CollocationDataset& ds, const SmParams& params);
/// The label-free view of a labeled dataset (its inputs at its grid times).
CollocationPoints collocation_points(const LabeledDataset& ds, const SmParams& params);

struct LossComponents {
  double data{0.0};
  double phys_data{0.0};
  double phys_colloc{0.0};
  double total{0.0};
  std::size_t skipped{0};  ///< collocation points with a singular stator system
};

/// Loss graph of one step, recorded on the tape of `vars`. Index spans select
/// points; an empty collocation span (or null set) drops the collocation term.
struct LossGraph {
  ad::Var data;
  ad::Var phys_data;
  ad::Var phys_colloc;
  ad::Var total;
  std::size_t skipped{0};
};

ad::Var loss_data(const OperatorVars& vars, const OperatorModel& model, const LabeledPoints& pts,
                  std::span<const int> idx);
ad::Var loss_phys_data(const OperatorVars& vars, const OperatorModel& model, const LabeledPoints& pts,
                       std::span<const int> idx);
/// Singular points are skipped and counted in `skipped`; a fully skipped
/// batch contributes a constant zero.
ad::Var loss_phys_colloc(const OperatorVars& vars, const OperatorModel& model, const CollocationPoints& pts,
                         std::span<const int> idx, std::size_t* skipped = nullptr);
LossGraph total_loss(const OperatorVars& vars, const OperatorModel& model, const LabeledPoints& labeled,
                     std::span<const int> labeled_idx, const CollocationPoints* colloc,
                     std::span<const int> colloc_idx, const TrainConfig& cfg);

/// Value-only losses over every point of a set. Throw EmptyBatch when empty.
double loss_data(const OperatorModel& model, const LabeledPoints& pts);
double loss_phys_data(const OperatorModel& model, const LabeledPoints& pts);
double loss_phys_colloc(const OperatorModel& model, const CollocationPoints& pts, std::size_t* skipped = nullptr);
LossComponents total_loss(const OperatorModel& model, const LabeledPoints& labeled,
                          const CollocationPoints* colloc, const TrainConfig& cfg);

/// Adaptive-moment state with decoupled weight decay.
struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  std::size_t step{0};
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// theta <- theta (1 - lr wd), then the bias-corrected moment update.
/// Throws ShapeMismatch when a gradient does not match its parameter.
void optimizer_step(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd> grads,
                    AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch{0};  ///< 1-based
  LossComponents train;  ///< batch-size weighted mean over the epoch's steps
  LossComponents val;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t stopped_epoch{0};
  std::size_t best_epoch{0};
  double best_val{0.0};
  double wall_time{0.0};
  std::size_t skipped_collocation{0};
  bool use_physics{true};
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  /// epoch,L_data[,L_pd,L_pc],total,val_total
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainingData {
  const LabeledDataset* train{nullptr};
  const LabeledDataset* validation{nullptr};
  const CollocationDataset* collocation{nullptr};  ///< required when physics is on
  SmParams params{};
};

struct TrainResult {
  OperatorModel model;  ///< best on validation
  TrainReport report;
};

/// Minibatch training with early stopping. Fits the normalization on the
/// training set when the model has none. Throws NonFiniteLoss.
TrainResult train(OperatorModel model, const TrainingData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace pidon
