#include "pidon/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "pidon/errors.hpp"
#include "pidon/model_io.hpp"
#include "pidon/parallel.hpp"

namespace pidon {

using nlohmann::json;

GridPredictor model_predictor(const OperatorModel& model) {
  return [&model](const InputBlock& in, std::span<const double> times) { return predict_grid(model, in, times); };
}

GridPredictor solver_predictor(const SmParams& params, const SolverConfig& solver) {
  return [params, solver](const InputBlock& in, std::span<const double> times) {
    const std::vector<double> grid = make_grid(solver);
    if (!std::equal(grid.begin(), grid.end(), times.begin(), times.end())) {
      throw InvalidArgument("solver replay needs the solver's own evaluation grid");
    }
    std::vector<double> out;
    out.reserve(in.n * grid.size() * kStateDim);
    for (std::size_t i = 0; i < in.n; ++i) {
      const SolutionGrid sol = simulate_trajectory(in.x0_row(i), in.descriptors(i), params, solver);
      out.insert(out.end(), sol.states.begin(), sol.states.end());
    }
    return out;
  };
}

InputBlock slice(const InputBlock& in, std::size_t first, std::size_t count) {
  if (first + count > in.n) throw InvalidArgument("trajectory slice out of range");
  InputBlock out;
  out.n = count;
  out.m = in.m;
  out.sensor_times = in.sensor_times;
  auto take = [&](const std::vector<double>& src, std::size_t width) {
    return std::vector<double>(src.begin() + static_cast<std::ptrdiff_t>(first * width),
                               src.begin() + static_cast<std::ptrdiff_t>((first + count) * width));
  };
  out.x0 = take(in.x0, kX0Dim);
  out.signals = take(in.signals, 2 * 9);
  out.sensors = take(in.sensors, 2 * in.m);
  return out;
}

AccuracyReport accuracy_from_predictions(const LabeledDataset& truth, std::span<const double> pred) {
  if (truth.n_points() == 0) throw EmptyDataset("accuracy needs at least one labeled point");
  if (pred.size() != truth.states.size()) throw DimensionMismatch("prediction does not match the dataset shape");
  const std::size_t n = truth.n_traj();
  const std::size_t nt = truth.n_times();
  AccuracyReport r;
  r.n_points = n * nt;
  r.times = truth.times;
  r.curve_mae.assign(nt, 0.0);
  r.curve_maxae.assign(nt, 0.0);
  double se = 0.0;
  double ae = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < nt; ++k) {
      for (std::size_t j = 0; j < kStateDim; ++j) {
        const std::size_t p = (i * nt + k) * kStateDim + j;
        const double e = std::abs(pred[p] - truth.states[p]);
        se += e * e;
        ae += e;
        r.curve_mae[k] += e;
        r.curve_maxae[k] = std::max(r.curve_maxae[k], e);
        r.state_mse[j] += e * e;
        r.state_mae[j] += e;
        r.state_maxae[j] = std::max(r.state_maxae[j], e);
        if (!std::isfinite(e)) r.curve_maxae[k] = e;
      }
    }
  }
  const auto count = static_cast<double>(r.n_points * kStateDim);
  r.mse = se / count;
  r.mae = ae / count;
  for (double& c : r.curve_mae) c /= static_cast<double>(n * kStateDim);
  for (std::size_t j = 0; j < kStateDim; ++j) {
    r.state_mse[j] /= static_cast<double>(r.n_points);
    r.state_mae[j] /= static_cast<double>(r.n_points);
  }
  r.maxae = *std::max_element(r.curve_maxae.begin(), r.curve_maxae.end());
  return r;
}

AccuracyReport evaluate_accuracy(const GridPredictor& predict, const LabeledDataset& test, unsigned threads) {
  if (test.n_points() == 0) throw EmptyDataset("test dataset is empty");
  const std::size_t n = test.n_traj();
  // Fixed chunks keep every prediction independent of the thread count.
  constexpr std::size_t per = 16;
  const std::size_t chunks = (n + per - 1) / per;
  std::vector<std::vector<double>> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t first = c * per;
    const std::size_t count = std::min(per, n - std::min(n, first));
    if (count > 0) parts[c] = predict(slice(test.inputs, first, count), test.times);
  });
  std::vector<double> pred;
  pred.reserve(test.states.size());
  for (const auto& p : parts) pred.insert(pred.end(), p.begin(), p.end());
  return accuracy_from_predictions(test, pred);
}

AccuracyReport evaluate_accuracy(const OperatorModel& model, const LabeledDataset& test, unsigned threads) {
  return evaluate_accuracy(model_predictor(model), test, threads);
}

json AccuracyReport::to_json() const {
  return {{"mse", mse},
          {"mae", mae},
          {"maxae", maxae},
          {"n_points", n_points},
          {"state_columns", kStateColumns},
          {"state_mse", state_mse},
          {"state_mae", state_mae},
          {"state_maxae", state_maxae}};
}

void AccuracyReport::write_curve_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(17);
  os << "t,mae,maxae\n";
  for (std::size_t k = 0; k < times.size(); ++k) os << times[k] << ',' << curve_mae[k] << ',' << curve_maxae[k] << '\n';
  if (!os) throw IoError("cannot write " + path.string());
}

TimingSample time_median(const std::function<void()>& fn, std::size_t warmup, std::size_t repetitions) {
  TimingSample s;
  for (std::size_t i = 0; i < warmup; ++i) {
    fn();
    ++s.warmup_runs;
  }
  for (std::size_t i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    s.runs_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  if (!s.runs_ms.empty()) {
    std::vector<double> sorted = s.runs_ms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    s.median_ms = sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  }
  return s;
}

namespace {

InputBlock cyclic_rows(const InputBlock& in, std::size_t count) {
  if (in.n == 0) throw EmptyDataset("benchmark needs at least one input row");
  if (count <= in.n) return slice(in, 0, count);
  InputBlock out = slice(in, 0, 0);
  out.n = count;
  for (std::size_t i = 0; i < count; ++i) {
    const InputBlock one = slice(in, i % in.n, 1);
    out.x0.insert(out.x0.end(), one.x0.begin(), one.x0.end());
    out.signals.insert(out.signals.end(), one.signals.begin(), one.signals.end());
    out.sensors.insert(out.sensors.end(), one.sensors.begin(), one.sensors.end());
  }
  return out;
}

// Keeps results observable so the timed work is not elided.
volatile double g_sink = 0.0;

}  // namespace

TimingReport benchmark_time(const std::vector<NamedModel>& models, const InputBlock& inputs, const SmParams& params,
                            const SolverConfig& solver, const BenchOptions& opt) {
  solver.validate();
  TimingReport report;
  const std::vector<double> grid = make_grid(solver);
  report.n_times = grid.size();
  report.hardware = std::to_string(std::thread::hardware_concurrency()) + " hardware threads; timing on one thread";
  for (std::size_t b : opt.batch_sizes) {
    if (b == 0) throw InvalidArgument("benchmark batch sizes must be >= 1");
    const InputBlock block = cyclic_rows(inputs, b);
    const TimingSample base = time_median(
        [&] {
          for (std::size_t i = 0; i < block.n; ++i) {
            g_sink = simulate_trajectory(block.x0_row(i), block.descriptors(i), params, solver).states.back();
          }
        },
        opt.warmup, opt.repetitions);
    report.rows.push_back({"solver", b, base.median_ms, 1.0, base.runs_ms.size(), base.warmup_runs});
    for (const NamedModel& nm : models) {
      const TimingSample s = time_median([&] { g_sink = predict_grid(*nm.model, block, grid).back(); }, opt.warmup,
                                         opt.repetitions);
      report.rows.push_back({nm.name, b, s.median_ms, base.median_ms / s.median_ms, s.runs_ms.size(), s.warmup_runs});
    }
  }
  if (opt.single_point) {
    const TimingSample base = time_median(
        [&] { g_sink = simulate_trajectory(inputs.x0_row(0), inputs.descriptors(0), params, solver).states.back(); },
        opt.warmup, opt.repetitions);
    for (const NamedModel& nm : models) {
      const double t = grid.back();
      const TimingSample s = time_median(
          [&] { g_sink = operator_forward(*nm.model, inputs.x0_row(0), inputs.sensor_row(0), t)[0]; }, opt.warmup,
          opt.repetitions);
      report.rows.push_back(
          {nm.name + "/point", 1, s.median_ms, base.median_ms / s.median_ms, s.runs_ms.size(), s.warmup_runs});
    }
  }
  return report;
}

json TimingReport::to_json() const {
  json rows_json = json::array();
  for (const TimingRow& r : rows) {
    rows_json.push_back({{"method", r.method},
                         {"batch", r.batch},
                         {"ms", r.ms},
                         {"speedup", r.speedup},
                         {"timed_runs", r.timed_runs},
                         {"warmup_runs", r.warmup_runs}});
  }
  return {{"rows", rows_json}, {"hardware", hardware}, {"n_times", n_times}};
}

void TimingReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(17);
  os << "method,batch,ms,speedup\n";
  for (const TimingRow& r : rows) os << r.method << ',' << r.batch << ',' << r.ms << ',' << r.speedup << '\n';
  if (!os) throw IoError("cannot write " + path.string());
}

std::vector<ComparisonRow> rank_reports(const std::vector<ModelGroup>& groups) {
  std::vector<ComparisonRow> rows;
  for (const ModelGroup& g : groups) {
    if (g.reports.empty()) throw InvalidArgument("model group '" + g.name + "' has no reports");
    ComparisonRow row{g.name, 0.0, 0.0, 0.0, g.reports.size()};
    for (const AccuracyReport& r : g.reports) {
      row.mse += r.mse;
      row.mae += r.mae;
      row.maxae += r.maxae;
    }
    const auto k = static_cast<double>(g.reports.size());
    row.mse /= k;
    row.mae /= k;
    row.maxae /= k;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    if (a.mae != b.mae) return a.mae < b.mae;
    if (a.mse != b.mse) return a.mse < b.mse;
    return a.maxae < b.maxae;
  });
  return rows;
}

std::vector<ComparisonRow> compare_models(const std::vector<ModelFiles>& models, const LabeledDataset& test,
                                          unsigned threads) {
  std::vector<ModelGroup> groups;
  for (const ModelFiles& mf : models) {
    ModelGroup g{mf.name, {}};
    for (const auto& path : mf.paths) g.reports.push_back(evaluate_accuracy(load_model(path), test, threads));
    groups.push_back(std::move(g));
  }
  return rank_reports(groups);
}

void write_table2(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(17);
  os << "model,mse,mae,maxae\n";
  for (const ComparisonRow& r : rows) os << r.model << ',' << r.mse << ',' << r.mae << ',' << r.maxae << '\n';
  if (!os) throw IoError("cannot write " + path.string());
}

}  // namespace pidon
