#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pidon/model_io.hpp"

namespace pidon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << "[pidon] " << msg << '\n'; }

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path labeled_dir(const fs::path& data, const char* split) {
  const fs::path sub = data / split;
  return fs::exists(sub) ? sub : data;
}

void check_machine(const RunConfig& cfg, const LabeledDataset& ds, const fs::path& where) {
  const json expected = to_json(cfg.domain)["machine"];
  if (ds.meta.contains("domain") && ds.meta["domain"].value("machine", json()) != expected) {
    log("warning: " + where.string() + " was generated with different machine settings than the config");
  }
}

}  // namespace

void cmd_generate(const RunConfig& cfg, const fs::path& out) {
  make_dir(out);
  const GenerateOptions opt{cfg.worker_threads(), {}};
  json manifest;
  manifest["config"] = to_json(cfg);
  json splits = json::object();
  const std::pair<Split, const char*> labeled[] = {
      {Split::Train, "train"}, {Split::Validation, "val"}, {Split::Test, "test"}};
  for (const auto& [split, name] : labeled) {
    const auto t0 = std::chrono::steady_clock::now();
    const LabeledDataset ds = generate_labeled(cfg.domain, split, opt);
    write_dataset(ds, out / name);
    log(std::string(name) + ": " + std::to_string(ds.n_traj()) + " trajectories x " +
        std::to_string(ds.n_times()) + " times in " +
        std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
    splits[name] = {{"dir", name}, {"seed", cfg.domain.split_seed(split)}, {"trajectories", ds.n_traj()}};
  }
  const CollocationDataset colloc = generate_collocation(cfg.domain, opt);
  write_dataset(colloc, out / "colloc");
  log("colloc: " + std::to_string(colloc.inputs.n) + " sets x " + std::to_string(colloc.times_per_set) + " times");
  splits["colloc"] = {{"dir", "colloc"},
                      {"seed", cfg.domain.split_seed(Split::Collocation)},
                      {"sets", colloc.inputs.n},
                      {"times_per_set", colloc.times_per_set}};
  manifest["splits"] = splits;
  write_json(out / "manifest.json", manifest);
}

void cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  const LabeledDataset train_ds = read_labeled(data / "train");
  const LabeledDataset val_ds = read_labeled(data / "val");
  check_machine(cfg, train_ds, data / "train");
  CollocationDataset colloc;
  if (cfg.train.use_physics) colloc = read_collocation(data / "colloc");
  make_dir(out);

  ModelSpec spec = cfg.model;
  spec.sensors = train_ds.inputs.m;
  const OperatorModel init = OperatorModel::create(spec);
  log("training " + std::string(to_string(spec.arch)) + " (" + std::to_string(init.parameter_count()) +
      " parameters), physics " + (cfg.train.use_physics ? "on" : "off"));
  const TrainingData td{&train_ds, &val_ds, cfg.train.use_physics ? &colloc : nullptr, cfg.domain.params};
  const std::size_t every = std::max<std::size_t>(1, cfg.train.epochs / 20);
  const TrainResult res = train(init, td, cfg.train, [&](const EpochRecord& r) {
    if (r.epoch == 1 || r.epoch % every == 0) {
      std::ostringstream msg;
      msg << "epoch " << r.epoch << " train " << r.train.total << " val " << r.val.total;
      log(msg.str());
    }
  });
  for (const std::string& w : res.report.warnings) log("warning: " + w);
  save_model(res.model, out / "model.json");
  json report = res.report.to_json();
  report["config"] = to_json(cfg);
  write_json(out / "report.json", report);
  res.report.write_csv(out / "loss.csv");
  log("stopped at epoch " + std::to_string(res.report.stopped_epoch) + ", best epoch " +
      std::to_string(res.report.best_epoch));
}

ModelArg parse_model_arg(const std::string& arg) {
  ModelArg m;
  std::string list = arg;
  const auto eq = arg.find('=');
  if (eq != std::string::npos) {
    m.name = arg.substr(0, eq);
    list = arg.substr(eq + 1);
  }
  std::stringstream ss(list);
  for (std::string p; std::getline(ss, p, ',');) {
    if (!p.empty()) m.paths.push_back(p);
  }
  if (m.paths.empty()) throw ConfigError("model argument '" + arg + "' names no file");
  if (m.name.empty()) m.name = m.paths.front() == "solver" ? "solver" : fs::path(m.paths.front()).stem().string();
  return m;
}

void cmd_eval(const RunConfig& cfg, const std::vector<ModelArg>& models, const fs::path& data, const fs::path& out) {
  if (models.empty()) throw ConfigError("eval needs at least one --model");
  const LabeledDataset test = read_labeled(labeled_dir(data, "test"));
  check_machine(cfg, test, data);
  make_dir(out);
  std::vector<ModelGroup> groups;
  json per_model = json::array();
  for (const ModelArg& arg : models) {
    ModelGroup g{arg.name, {}};
    for (const std::string& path : arg.paths) {
      AccuracyReport r;
      if (path == "solver") {
        r = evaluate_accuracy(solver_predictor(cfg.domain.params, cfg.domain.solver), test, cfg.worker_threads());
      } else {
        r = evaluate_accuracy(load_model(path), test, cfg.worker_threads());
      }
      per_model.push_back({{"model", arg.name}, {"path", path}, {"metrics", r.to_json()}});
      g.reports.push_back(std::move(r));
    }
    if (groups.empty()) g.reports.front().write_curve_csv(out / "accuracy_curve.csv");
    g.reports.front().write_curve_csv(out / ("accuracy_curve_" + arg.name + ".csv"));
    groups.push_back(std::move(g));
  }
  const std::vector<ComparisonRow> rows = rank_reports(groups);
  write_table2(rows, out / "table2.csv");
  write_json(out / "eval.json", {{"runs", per_model}});
  for (const ComparisonRow& r : rows) {
    std::ostringstream msg;
    msg << r.model << ": mse " << r.mse << " mae " << r.mae << " maxae " << r.maxae << " (" << r.seeds << " seeds)";
    log(msg.str());
  }
}

void cmd_bench(const RunConfig& cfg, const std::vector<ModelArg>& models, const fs::path& data, const fs::path& out) {
  const LabeledDataset test = read_labeled(labeled_dir(data, "test"));
  make_dir(out);
  std::vector<OperatorModel> loaded;
  std::vector<std::string> names;
  for (const ModelArg& arg : models) {
    if (arg.paths.front() == "solver") continue;
    loaded.push_back(load_model(arg.paths.front()));
    names.push_back(arg.name);
  }
  std::vector<NamedModel> named;
  for (std::size_t i = 0; i < loaded.size(); ++i) named.push_back({names[i], &loaded[i]});
  const TimingReport report = benchmark_time(named, test.inputs, cfg.domain.params, cfg.domain.solver, cfg.bench);
  report.write_csv(out / "table3.csv");
  write_json(out / "bench.json", report.to_json());
  for (const TimingRow& r : report.rows) {
    std::ostringstream msg;
    msg << r.method << " batch " << r.batch << ": " << r.ms << " ms (x" << r.speedup << ")";
    log(msg.str());
  }
}

namespace {

std::string reference_text() {
  std::ostringstream os;
  os << "\nConfiguration file (JSON). Keys are nested objects; every key is optional\n"
        "except format_version, and unknown keys are rejected.\n\n";
  for (const ConfigKey& k : config_reference()) {
    os << "  " << k.key << " = " << k.default_value.dump() << "\n      " << k.doc << '\n';
  }
  os << "\nExit codes: 0 ok, 2 configuration error, 3 training failure, 4 I/O or model error.\n";
  return os.str();
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Physics-informed operator surrogates of a synchronous machine"};
  app.require_subcommand(1);
  app.footer(reference_text());

  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> model_args;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file (defaults when omitted)");
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "override the configured seed");
    cmd->add_option("--threads", threads, "worker threads (default: available cores)");
  };
  CLI::App* gen = app.add_subcommand("generate", "sample inputs and integrate the train/val/test/colloc datasets");
  common(gen);
  CLI::App* tr = app.add_subcommand("train", "train a surrogate on generated datasets");
  common(tr);
  tr->add_option("--data", data_dir, "directory written by 'generate'")->required();
  CLI::App* ev = app.add_subcommand("eval", "accuracy metrics on the test set (table2.csv, accuracy_curve.csv)");
  common(ev);
  ev->add_option("--data", data_dir, "directory written by 'generate' or a labeled dataset")->required();
  ev->add_option("--model", model_args, "name=path[,path...] per model; 'solver' replays the integrator")->required();
  CLI::App* be = app.add_subcommand("bench", "inference timing against the integrator (table3.csv)");
  common(be);
  be->add_option("--data", data_dir, "directory written by 'generate' or a labeled dataset")->required();
  be->add_option("--model", model_args, "name=path per model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_run_config(config_path);
    } else {
      cfg.propagate();
    }
    CLI::App* cmd = app.get_subcommands().front();
    if (cmd->count("--seed") > 0) cfg.seed = seed;
    if (cmd->count("--threads") > 0) cfg.threads = threads;
    cfg.propagate();
    cfg.validate();

    std::vector<ModelArg> models;
    for (const std::string& a : model_args) models.push_back(parse_model_arg(a));
    if (cmd == gen) cmd_generate(cfg, out_dir);
    if (cmd == tr) cmd_train(cfg, data_dir, out_dir);
    if (cmd == ev) cmd_eval(cfg, models, data_dir, out_dir);
    if (cmd == be) cmd_bench(cfg, models, data_dir, out_dir);
    return kOk;
  } catch (const ConfigError& e) {
    log(std::string("config error: ") + e.what());
    return kConfigError;
  } catch (const NonFiniteLoss& e) {
    log(std::string("training failed: ") + e.what());
    return kTrainingError;
  } catch (const IoError& e) {
    log(std::string("I/O error: ") + e.what());
    return kIoError;
  } catch (const CorruptModel& e) {
    log(std::string("model error: ") + e.what());
    return kIoError;
  } catch (const VersionMismatch& e) {
    log(std::string("model error: ") + e.what());
    return kIoError;
  } catch (const ChecksumMismatch& e) {
    log(std::string("dataset error: ") + e.what());
    return kIoError;
  } catch (const TruncatedFile& e) {
    log(std::string("dataset error: ") + e.what());
    return kIoError;
  } catch (const FormatVersionMismatch& e) {
    log(std::string("dataset error: ") + e.what());
    return kIoError;
  } catch (const DimensionMismatch& e) {
    log(std::string("model/data mismatch: ") + e.what());
    return kIoError;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kFailure;
  }
}

}  // namespace pidon::cli
