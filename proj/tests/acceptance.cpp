// Acceptance suite: one PASS/FAIL line per criterion with the measured values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "commands.hpp"
#include "pidon/autodiff.hpp"
#include "pidon/dataset.hpp"
#include "pidon/dynamics.hpp"
#include "pidon/evaluation.hpp"
#include "pidon/mlp.hpp"
#include "pidon/model_io.hpp"
#include "pidon/operator_model.hpp"
#include "pidon/sampling.hpp"
#include "pidon/signal.hpp"
#include "pidon/solver.hpp"
#include "pidon/training.hpp"
#include "support.hpp"

using namespace pidon;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << bytes;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

// -- 1 ------------------------------------------------------------------------

double equilibrium_drift(const SmParams& p, const SmState& x, const ExogenousInputs& u) {
  const std::array<double, 9> x0{x.delta, 0.0, x.Ed_p, x.Eq_p, u.Rf, u.Vr, u.Efd, u.Psv, u.Pm};
  const SolutionGrid g =
      simulate_trajectory(x0, {test::constant_signal(1.0), test::constant_signal(0.0)}, p, SolverConfig{});
  const std::array<double, 4> start{x.delta, x.omega, x.Eq_p, x.Ed_p};
  double worst = 0.0;
  for (std::size_t i = 0; i < g.times.size(); ++i) {
    for (std::size_t j = 0; j < 4; ++j) worst = std::max(worst, std::abs(g.at(i, j) - start[j]));
  }
  return worst;
}

Verdict solver_correctness() {
  const SolutionGrid g = integrate([](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; },
                                   std::vector<double>{1.0}, SolverConfig{});
  const double decay_err = std::abs(g.at(g.times.size() - 1, 0) - std::exp(-1.0));

  const ExogenousInputs u{};
  const BusVoltage bus{1.0, 0.0};
  const SmParams textbook = SmParams::textbook();
  const double drift_textbook = equilibrium_drift(textbook, test::newton_equilibrium(u, bus, textbook), u);
  ExogenousInputs ub{};
  const SmParams printed{};
  const SmState xb = test::balanced_equilibrium(0.4, ub, bus, printed);
  const double drift_printed = equilibrium_drift(printed, xb, ub);

  return {decay_err < 1e-8 && drift_textbook < 1e-6 && drift_printed < 1e-6,
          fmt("decay endpoint error %.2e (bound 1e-8); equilibrium drift %.2e textbook, %.2e as-printed (bound 1e-6)",
              decay_err, drift_textbook, drift_printed)};
}

// -- 2 ------------------------------------------------------------------------

Verdict algebraic_correctness() {
  test::Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const SmParams p = test::random_params(rng);
    const SmState x = test::random_state(rng);
    const BusVoltage bus{rng.uniform(0.0, 1.5), rng.uniform(-3, 3)};
    worst = std::max(worst, test::algebraic_residual(x, bus, p, solve_currents(x, bus, p)));
  }
  return {worst < 1e-12, fmt("10000 calls, worst residual %.2e (bound 1e-12)", worst)};
}

// -- 3 ------------------------------------------------------------------------

Verdict signal_closed_forms() {
  SolverConfig tight;
  tight.rtol = 1e-11;
  tight.atol = 1e-13;
  double worst = 0.0;
  std::size_t count = 0;
  for (ResponseKind kind : {ResponseKind::Slow, ResponseKind::Fast}) {
    for (const ChannelRanges& ch : default_channels(kind)) {
      const std::vector<Range> ranges = ch.sampled();
      const MatrixXd rows = lhs_sample(ranges, 25, 77 + count);
      for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        std::vector<double> v(static_cast<std::size_t>(rows.cols()));
        for (Eigen::Index j = 0; j < rows.cols(); ++j) v[static_cast<std::size_t>(j)] = rows(i, j);
        const SignalDescriptor d = ch.descriptor(v);
        std::vector<double> y0(d.kind == SignalKind::SecondOrder ? 2 : 1);
        signal_initial_state(d, y0);
        const SolutionGrid g = integrate(
            [&](double t, std::span<const double> y, std::span<double> dy) { signal_rhs(d, t, y, dy); }, y0, tight);
        for (std::size_t k = 0; k < g.times.size(); ++k) {
          worst = std::max(worst, std::abs(g.at(k, 0) - eval_signal(d, g.times[k]).y));
        }
        ++count;
      }
    }
  }
  return {worst < 1e-6 && count == 100,
          fmt("%zu descriptors (slow and fast, both channels), max |closed form - RK45| %.2e (bound 1e-6)", count,
              worst)};
}

// -- 4 ------------------------------------------------------------------------

Verdict ad_correctness() {
  Mlp net(MlpSpec{9, {64, 64, 64}, 64, 5});
  test::Rng rng(6);
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = rng.uniform(-0.1, 0.1);
  }
  MatrixXd x(8, 9);
  MatrixXd target(8, 64);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform(-1, 1);
  auto loss_value = [&] {
    ad::Tape t;
    const MlpVars v = bind(t, net, false);
    return ad::mean(ad::square(forward(v, t.constant(x)) - t.constant(target))).value()(0, 0);
  };
  ad::Tape tape;
  const MlpVars vars = bind(tape, net);
  tape.backward(ad::mean(ad::square(forward(vars, tape.constant(x)) - tape.constant(target))));
  double grad_err = 0.0;
  std::size_t n_params = 0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const MatrixXd gw = tape.grad(vars.weights[l]);
    const MatrixXd gb = tape.grad(vars.biases[l]);
    grad_err = std::max(grad_err, test::max_rel_error(gw, test::fd4_gradient(net.layers()[l].weight, loss_value, 3e-3), 1e-8));
    grad_err = std::max(grad_err, test::max_rel_error(gb, test::fd4_gradient(net.layers()[l].bias, loss_value, 3e-3), 1e-8));
    n_params += static_cast<std::size_t>(gw.size() + gb.size());
  }

  double dt_err = 0.0;
  std::size_t n_tangents = 0;
  for (Arch arch : {Arch::Unstacked, Arch::StackedN, Arch::Pinn}) {
    ModelSpec spec;
    spec.arch = arch;
    spec.sensors = 10;
    spec.seed = 8 + static_cast<std::uint64_t>(arch);
    OperatorModel model = OperatorModel::create(spec);
    for (MatrixXd* p : model.parameters()) {
      for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] += rng.uniform(-0.05, 0.05);
    }
    const auto d = static_cast<Eigen::Index>(kX0Dim + 2 * spec.sensors);
    Normalization norm{Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Ones(d), Eigen::RowVectorXd::Zero(4),
                       Eigen::RowVectorXd::Ones(4), 1.0};
    for (Eigen::Index j = 0; j < 4; ++j) norm.state_std(j) = rng.uniform(0.1, 2);
    model.norm = norm;
    for (int i = 0; i < 50; ++i) {
      std::vector<double> x0(kX0Dim);
      std::vector<double> sensors(2 * spec.sensors);
      for (double& v : x0) v = rng.uniform(-1, 1);
      for (double& v : sensors) v = rng.uniform(-1, 1);
      const double t = rng.uniform(0.05, 0.95);
      const StateRate sr = operator_forward_dt(model, x0, sensors, t);
      const auto up = operator_forward(model, x0, sensors, t + 1e-5);
      const auto down = operator_forward(model, x0, sensors, t - 1e-5);
      for (std::size_t j = 0; j < 4; ++j) {
        const double fd = (up[j] - down[j]) / 2e-5;
        dt_err = std::max(dt_err, std::abs(sr.rate[j] - fd) / std::max(std::abs(fd), 1e-3));
        ++n_tangents;
      }
    }
  }
  return {grad_err < 1e-5 && dt_err < 1e-5,
          fmt("%zu parameter gradients of 9-64-64-64-64: max rel err %.2e (fourth-order stencil, h 3e-3); %zu time tangents over 3 "
              "architectures: max rel err %.2e (h 1e-5); bound 1e-5",
              n_params, grad_err, n_tangents, dt_err)};
}

// -- 5 ------------------------------------------------------------------------

Verdict labels_obey_physics() {
  DomainSpec d;
  d.params = SmParams::textbook();
  d.n_train = 20;
  d.n_val = 20;
  d.n_test = 20;
  d.seed = 5;
  d.solver.eval_dt = 1e-3;
  const double dt = d.solver.eval_dt;
  double worst = 0.0;
  std::size_t n_traj = 0;
  for (ResponseKind kind : {ResponseKind::Slow, ResponseKind::Fast}) {
    d.response = kind;
    d.channels = default_channels(kind);
    for (Split s : {Split::Train, Split::Validation, Split::Test}) {
      const LabeledDataset ds = generate_labeled(d, s);
      for (std::size_t i = 0; i < ds.n_traj(); ++i, ++n_traj) {
        const auto ch = ds.inputs.descriptors(i);
        const auto x0 = ds.inputs.x0_row(i);
        const ExogenousInputs u{x0[8], x0[6], x0[4], x0[5], x0[7]};
        for (std::size_t k = 2; k + 2 < ds.n_times(); ++k) {
          const double t = ds.times[k];
          const std::array<double, 4> f = to_array(sm_rhs(
              state_from(ds.state(i, k)), u, BusVoltage{eval_signal(ch[0], t).y, eval_signal(ch[1], t).y}, d.params));
          for (std::size_t j = 0; j < 4; ++j) {
            const double fd = (8.0 * (ds.state(i, k + 1)[j] - ds.state(i, k - 1)[j]) -
                               (ds.state(i, k + 2)[j] - ds.state(i, k - 2)[j])) / (12.0 * dt);
            worst = std::max(worst, std::abs(fd - f[j]));
          }
        }
      }
    }
  }
  return {worst < 1e-3,
          fmt("%zu labeled trajectories on the 1 ms grid (slow and fast, all splits), worst |fourth-order "
              "difference - sm_rhs| %.2e (bound 1e-3)",
              n_traj, worst)};
}

// -- 6 and 7 ------------------------------------------------------------------

struct DeskRun {
  AccuracyReport acc;
  double residual{0.0};
  TrainReport report;
  double seconds{0.0};
};

struct Desk {
  DomainSpec domain;
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
  CollocationDataset colloc;
  DeskRun pi;
  DeskRun data_only;
  OperatorModel pi_model;
};

DomainSpec desk_domain() {
  DomainSpec d;
  d.params = SmParams::textbook();
  d.response = ResponseKind::Slow;
  d.channels = default_channels(ResponseKind::Slow);
  d.n_train = 200;
  d.n_val = 20;
  d.n_test = 20;
  d.n_colloc = 1000;
  d.colloc_times = 101;
  d.sensors = 100;
  d.solver.eval_dt = 0.01;
  d.seed = 7;
  return d;
}

TrainConfig desk_train_config(bool physics) {
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 512;
  cfg.weight_decay = 0.1;
  cfg.use_physics = physics;
  return cfg;
}

DeskRun desk_train(Desk& desk, bool physics, OperatorModel* keep) {
  ModelSpec spec;
  spec.sensors = desk.domain.sensors;
  spec.latent = 32;
  spec.hidden = {32, 32};
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(OperatorModel::create(spec),
                        {&desk.train, &desk.val, physics ? &desk.colloc : nullptr, desk.domain.params},
                        desk_train_config(physics));
  DeskRun run;
  run.seconds = seconds_since(t0);
  run.acc = evaluate_accuracy(r.model, desk.test);
  run.residual = loss_phys_colloc(r.model, collocation_points(desk.colloc, desk.domain.params));
  run.report = std::move(r.report);
  if (keep) *keep = std::move(r.model);
  return run;
}

Verdict desk_learning(const Desk& desk) {
  const DeskRun& r = desk.pi;
  return {r.acc.mae < 2e-2,
          fmt("PI Unstacked 2x32, p=32, wd 0.1, 200x101 labeled, m=100, slow: test MAE %.4e over 20 trajectories (bound 2e-2); MSE %.3e, "
              "MaxAE %.3e; stopped at epoch %zu (best %zu) of 2000, %.0f s",
              r.acc.mae, r.acc.mse, r.acc.maxae, r.report.stopped_epoch, r.report.best_epoch, r.seconds)};
}

Verdict physics_benefit(const Desk& desk) {
  const DeskRun& pi = desk.pi;
  const DeskRun& dd = desk.data_only;
  const bool lower = pi.residual < dd.residual;
  const bool maxae = pi.acc.maxae <= 1.1 * dd.acc.maxae;
  return {lower && maxae,
          fmt("collocation residual PI %.4e vs data-only %.4e; MaxAE PI %.4e vs data-only %.4e (limit %.4e); "
              "MAE PI %.4e vs data-only %.4e",
              pi.residual, dd.residual, pi.acc.maxae, dd.acc.maxae, 1.1 * dd.acc.maxae, pi.acc.mae, dd.acc.mae)};
}

// -- 8 ------------------------------------------------------------------------

Verdict overfit_sanity() {
  DomainSpec d = test::small_domain(23);
  d.n_train = 1;
  d.solver.eval_dt = 1.0 / 49.0;
  const LabeledDataset one = generate_labeled(d, Split::Train);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.patience = 2000;
  cfg.use_physics = false;
  ModelSpec spec;
  spec.sensors = d.sensors;
  const TrainResult r = train(OperatorModel::create(spec), {&one, &one, nullptr, d.params}, cfg);
  const double loss = loss_data(r.model, labeled_points(one, d.params));
  const double first = r.report.history.front().train.data;
  return {one.n_points() == 50 && loss < 1e-5,
          fmt("1 trajectory, %zu points, 2000 epochs: data loss %.3e (bound 1e-5), first epoch %.3e", one.n_points(),
              loss, first)};
}

// -- 9 ------------------------------------------------------------------------

Verdict speedup(const Desk& desk) {
  DomainSpec d = desk.domain;
  d.n_test = 100;
  d.solver.eval_dt = 1e-3;
  const InputBlock inputs = sample_inputs(d, Split::Test);
  BenchOptions opt;
  opt.batch_sizes = {100};
  opt.repetitions = 10;
  opt.single_point = false;
  const TimingReport rep =
      benchmark_time({{"unstacked", &desk.pi_model}}, inputs, d.params, d.solver, opt);
  double solver_ms = 0.0;
  double model_ms = 0.0;
  double speed = 0.0;
  for (const TimingRow& row : rep.rows) {
    if (row.batch != 100) continue;
    if (row.method == "solver") solver_ms = row.ms;
    if (row.method == "unstacked") {
      model_ms = row.ms;
      speed = row.speedup;
    }
  }
  return {speed >= 10.0,
          fmt("100 trajectories x %zu times, median of 10: operator %.1f ms, RK45 %.1f ms, speedup %.2fx (bound 10x)",
              rep.n_times, model_ms, solver_ms, speed)};
}

// -- 10 -----------------------------------------------------------------------

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "pidon");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream sink;
  std::streambuf* old_out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(sink.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

Verdict determinism(const fs::path& root) {
  const fs::path dir = root / "determinism";
  fs::create_directories(dir);
  spit(dir / "config.json", R"({
    "format_version": 1,
    "seed": 11,
    "domain": {"n_train": 20, "n_val": 5, "n_test": 5, "n_colloc": 20, "colloc_times": 21, "sensors": 20},
    "solver": {"eval_dt": 0.02},
    "machine": {"algebraic_reactance": "transient", "electrical_power_sign": "textbook"},
    "model": {"latent": 16, "hidden": [16, 16]},
    "train": {"epochs": 20, "batch_size": 128}
  })");
  const std::string cfg = (dir / "config.json").string();
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    ok &= cli_run({"generate", "--config", cfg, "--out", (dir / run / "data").string()}) == 0;
    ok &= cli_run({"train", "--config", cfg, "--data", (dir / run / "data").string(), "--out",
                   (dir / run / "model").string()}) == 0;
  }
  const auto da = tree(dir / "a" / "data");
  const auto db = tree(dir / "b" / "data");
  const bool data_same = ok && !da.empty() && da == db;
  const bool model_same = ok && slurp(dir / "a" / "model" / "model.json") == slurp(dir / "b" / "model" / "model.json") &&
                          slurp(dir / "a" / "model" / "loss.csv") == slurp(dir / "b" / "model" / "loss.csv");
  nlohmann::json ra = nlohmann::json::parse(slurp(dir / "a" / "model" / "report.json"));
  nlohmann::json rb = nlohmann::json::parse(slurp(dir / "b" / "model" / "report.json"));
  ra.erase("wall_time");
  rb.erase("wall_time");
  const bool report_same = ok && ra == rb;
  return {data_same && model_same && report_same,
          fmt("generate: %zu files %s; train: model.json and loss.csv %s, report.json without wall_time %s",
              da.size(), data_same ? "byte-identical" : "DIFFER", model_same ? "byte-identical" : "DIFFER",
              report_same ? "identical" : "DIFFERS")};
}

// -- 11 -----------------------------------------------------------------------

/// Flips one byte of `file` at each position and counts reads that still succeed.
std::size_t undetected(const fs::path& file, const std::vector<std::size_t>& positions,
                       const std::function<void()>& read) {
  const std::string original = slurp(file);
  std::size_t missed = 0;
  for (std::size_t pos : positions) {
    std::string bytes = original;
    bytes[pos] = static_cast<char>(bytes[pos] ^ 0x01);
    spit(file, bytes);
    try {
      read();
      ++missed;
    } catch (const std::exception&) {
    }
  }
  spit(file, original);
  return missed;
}

std::vector<std::size_t> all_positions(const fs::path& file) {
  std::vector<std::size_t> v(fs::file_size(file));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> sampled_positions(const fs::path& file, std::size_t count, test::Rng& rng) {
  const auto size = static_cast<double>(fs::file_size(file));
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < count; ++i) v.push_back(static_cast<std::size_t>(rng.uniform(0.0, size)));
  return v;
}

Verdict round_trips(const fs::path& root) {
  const fs::path dir = root / "roundtrip";
  fs::create_directories(dir);
  DomainSpec d = test::small_domain(31);
  d.sensors = 8;
  const LabeledDataset ds = generate_labeled(d, Split::Train);
  const CollocationDataset co = generate_collocation(d);
  write_dataset(ds, dir / "train");
  write_dataset(co, dir / "colloc");
  const bool data_rt = read_labeled(dir / "train") == ds && read_collocation(dir / "colloc") == co;
  write_dataset(read_labeled(dir / "train"), dir / "train2");
  const bool data_bytes = tree(dir / "train") == tree(dir / "train2");

  ModelSpec spec;
  spec.sensors = d.sensors;
  spec.latent = 8;
  spec.hidden = {8, 8};
  OperatorModel model = OperatorModel::create(spec);
  model.norm = Normalization::fit(ds);
  save_model(model, dir / "model.json");
  const OperatorModel back = load_model(dir / "model.json");
  bool model_rt = back.spec == model.spec && back.norm.has_value();
  const auto pa = std::as_const(model).parameters();
  const auto pb = back.parameters();
  model_rt &= pa.size() == pb.size();
  for (std::size_t i = 0; model_rt && i < pa.size(); ++i) model_rt &= *pa[i] == *pb[i];
  model_rt &= back.norm->input_mean == model.norm->input_mean && back.norm->state_std == model.norm->state_std;
  save_model(back, dir / "model2.json");
  const bool model_bytes = slurp(dir / "model.json") == slurp(dir / "model2.json");

  test::Rng rng(12);
  std::size_t tried = 0;
  std::size_t missed = 0;
  for (const fs::path& sub : {dir / "train", dir / "colloc"}) {
    for (const auto& e : fs::directory_iterator(sub)) {
      const bool json_file = e.path().extension() == ".json";
      const auto pos = json_file ? all_positions(e.path()) : sampled_positions(e.path(), 200, rng);
      tried += pos.size();
      missed += undetected(e.path(), pos, [&] { (void)read_dataset(sub); });
    }
  }
  const auto model_pos = all_positions(dir / "model.json");
  tried += model_pos.size();
  missed += undetected(dir / "model.json", model_pos, [&] { (void)load_model(dir / "model.json"); });

  return {data_rt && data_bytes && model_rt && model_bytes && missed == 0,
          fmt("dataset round trip %s, rewrite %s; model round trip %s, rewrite %s; single-byte corruptions "
              "undetected %zu of %zu",
              data_rt ? "exact" : "DIFFERS", data_bytes ? "byte-identical" : "DIFFERS", model_rt ? "exact" : "DIFFERS",
              model_bytes ? "byte-identical" : "DIFFERS", missed, tried)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number, e.g. "1 2 11".
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  const fs::path root = fs::temp_directory_path() / "pidon_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("criterion %2d %-22s %s  %s [%.1f s]\n", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "solver", solver_correctness);
  report(2, "algebraic", algebraic_correctness);
  report(3, "signals", signal_closed_forms);
  report(4, "autodiff", ad_correctness);
  report(5, "labels", labels_obey_physics);

  Desk desk;
  if (wanted(6) || wanted(7) || wanted(9)) {
    desk.domain = desk_domain();
    desk.train = generate_labeled(desk.domain, Split::Train);
    desk.val = generate_labeled(desk.domain, Split::Validation);
    desk.test = generate_labeled(desk.domain, Split::Test);
    desk.colloc = generate_collocation(desk.domain);
    desk.pi = desk_train(desk, true, &desk.pi_model);
    if (wanted(7)) desk.data_only = desk_train(desk, false, nullptr);
  }
  report(6, "desk-learning", [&] { return desk_learning(desk); });
  report(7, "physics-benefit", [&] { return physics_benefit(desk); });
  report(8, "overfit", overfit_sanity);
  report(9, "speedup", [&] { return speedup(desk); });
  report(10, "determinism", [&] { return determinism(root); });
  report(11, "round-trips", [&] { return round_trips(root); });

  fs::remove_all(root);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
