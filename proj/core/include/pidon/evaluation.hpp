#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pidon/dataset.hpp"
#include "pidon/operator_model.hpp"

namespace pidon {

/// Predicts n x n_t x 4 states (LabeledDataset::states layout) for every
/// input row at every time.
using GridPredictor = std::function<std::vector<double>(const InputBlock&, std::span<const double>)>;

GridPredictor model_predictor(const OperatorModel& model);
/// Re-integrates every trajectory; the exact reference for data from the same solver.
GridPredictor solver_predictor(const SmParams& params, const SolverConfig& solver);

struct AccuracyReport {
  double mse{0.0};
  double mae{0.0};
  double maxae{0.0};
  std::size_t n_points{0};  ///< trajectories x grid times
  std::vector<double> times;
  std::vector<double> curve_mae;    ///< per time, mean over trajectories and states
  std::vector<double> curve_maxae;  ///< per time, max over trajectories and states
  std::array<double, 4> state_mse{};
  std::array<double, 4> state_mae{};
  std::array<double, 4> state_maxae{};

  nlohmann::json to_json() const;
  /// t,mae,maxae
  void write_curve_csv(const std::filesystem::path& path) const;
};

/// Metrics of `pred` (physical units, all states jointly) against the labels.
AccuracyReport accuracy_from_predictions(const LabeledDataset& truth, std::span<const double> pred);

/// Throws EmptyDataset. Trajectory chunks run on up to `threads` workers and
/// are reduced in index order.
AccuracyReport evaluate_accuracy(const GridPredictor& predict, const LabeledDataset& test, unsigned threads = 1);
AccuracyReport evaluate_accuracy(const OperatorModel& model, const LabeledDataset& test, unsigned threads = 1);

/// Rows of trajectories [first, first + count).
InputBlock slice(const InputBlock& in, std::size_t first, std::size_t count);

struct TimingSample {
  double median_ms{0.0};
  std::vector<double> runs_ms;  ///< timed runs only
  std::size_t warmup_runs{0};
};

/// Runs `fn` `warmup` times untimed, then `repetitions` times timed.
TimingSample time_median(const std::function<void()>& fn, std::size_t warmup, std::size_t repetitions);

struct TimingRow {
  std::string method;
  std::size_t batch{0};
  double ms{0.0};
  double speedup{0.0};  ///< solver ms / method ms at the same batch
  std::size_t timed_runs{0};
  std::size_t warmup_runs{0};
};

struct TimingReport {
  std::vector<TimingRow> rows;
  std::string hardware;
  std::size_t n_times{0};

  nlohmann::json to_json() const;
  /// method,batch,ms,speedup
  void write_csv(const std::filesystem::path& path) const;
};

struct BenchOptions {
  std::vector<std::size_t> batch_sizes{1, 10, 1000};
  std::size_t warmup{3};
  std::size_t repetitions{10};
  /// Also time one single-point operator_forward per model ("<name>/point").
  bool single_point{true};
};

struct NamedModel {
  std::string name;
  const OperatorModel* model{nullptr};
};

/// Solver timed sequentially per trajectory on the solver grid; each model
/// timed as one batched grid prediction. A batch larger than the input block
/// reuses rows cyclically.
TimingReport benchmark_time(const std::vector<NamedModel>& models, const InputBlock& inputs, const SmParams& params,
                            const SolverConfig& solver, const BenchOptions& opt = {});

struct ComparisonRow {
  std::string model;
  double mse{0.0};
  double mae{0.0};
  double maxae{0.0};
  std::size_t seeds{0};
};

struct ModelGroup {
  std::string name;
  std::vector<AccuracyReport> reports;  ///< one per seed
};

/// Seed-averaged rows ordered by (mae, mse, maxae).
std::vector<ComparisonRow> rank_reports(const std::vector<ModelGroup>& groups);

struct ModelFiles {
  std::string name;
  std::vector<std::filesystem::path> paths;  ///< one per seed
};

std::vector<ComparisonRow> compare_models(const std::vector<ModelFiles>& models, const LabeledDataset& test,
                                          unsigned threads = 1);

/// model,mse,mae,maxae
void write_table2(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path);

}  // namespace pidon
