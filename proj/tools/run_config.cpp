#include "run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "pidon/parallel.hpp"

namespace pidon::cli {

using nlohmann::json;

namespace {

struct Field {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

double as_double(const std::string& key, const json& j) {
  if (!j.is_number()) bad(key, "expected a number");
  return j.get<double>();
}

std::uint64_t as_unsigned(const std::string& key, const json& j) {
  if (!j.is_number_unsigned()) bad(key, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

bool as_bool(const std::string& key, const json& j) {
  if (!j.is_boolean()) bad(key, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const std::string& key, const json& j) {
  if (!j.is_string()) bad(key, "expected a string");
  return j.get<std::string>();
}

std::vector<std::size_t> as_sizes(const std::string& key, const json& j) {
  if (!j.is_array()) bad(key, "expected an array of non-negative integers");
  std::vector<std::size_t> out;
  for (const json& v : j) out.push_back(static_cast<std::size_t>(as_unsigned(key, v)));
  return out;
}

Range as_range(const std::string& key, const json& j) {
  if (!j.is_array() || j.size() != 2) bad(key, "expected [lo, hi]");
  return {as_double(key, j[0]), as_double(key, j[1])};
}

Field real(std::string key, std::string doc, std::function<double&(RunConfig&)> ref) {
  return {key, std::move(doc), [ref, key](RunConfig& c, const json& j) { ref(c) = as_double(key, j); },
          [ref](const RunConfig& c) { return json(ref(const_cast<RunConfig&>(c))); }};
}

Field count(std::string key, std::string doc, std::function<std::size_t&(RunConfig&)> ref) {
  return {key, std::move(doc),
          [ref, key](RunConfig& c, const json& j) { ref(c) = static_cast<std::size_t>(as_unsigned(key, j)); },
          [ref](const RunConfig& c) { return json(ref(const_cast<RunConfig&>(c))); }};
}

Field range(std::string key, std::string doc, std::function<Range&(RunConfig&)> ref) {
  return {key, std::move(doc), [ref, key](RunConfig& c, const json& j) { ref(c) = as_range(key, j); },
          [ref](const RunConfig& c) {
            const Range& r = ref(const_cast<RunConfig&>(c));
            return json::array({r.lo, r.hi});
          }};
}

void add_channel(std::vector<Field>& f, const std::string& name, std::size_t idx) {
  const std::string p = "domain.channels." + name + ".";
  auto ch = [idx](RunConfig& c) -> ChannelRanges& { return c.domain.channels[idx]; };
  f.push_back({p + "kind", "signal family: first_order | second_order",
               [ch, key = p + "kind"](RunConfig& c, const json& j) {
                 const std::string s = as_string(key, j);
                 if (s == "first_order") {
                   ch(c).kind = SignalKind::FirstOrder;
                 } else if (s == "second_order") {
                   ch(c).kind = SignalKind::SecondOrder;
                 } else {
                   bad(key, "expected first_order or second_order");
                 }
               },
               [ch](const RunConfig& c) {
                 return json(ch(const_cast<RunConfig&>(c)).kind == SignalKind::FirstOrder ? "first_order"
                                                                                          : "second_order");
               }});
  f.push_back(range(p + "k", "first-order rate k [1/s]", [ch](RunConfig& c) -> Range& { return ch(c).k; }));
  f.push_back(range(p + "A_noise", "first-order sinusoidal disturbance amplitude",
                    [ch](RunConfig& c) -> Range& { return ch(c).A_noise; }));
  f.push_back(range(p + "w_noise", "first-order disturbance frequency [rad/s]",
                    [ch](RunConfig& c) -> Range& { return ch(c).w_noise; }));
  f.push_back(range(p + "zeta", "second-order damping ratio", [ch](RunConfig& c) -> Range& { return ch(c).zeta; }));
  f.push_back(range(p + "w_n", "second-order natural frequency [rad/s]",
                    [ch](RunConfig& c) -> Range& { return ch(c).w_n; }));
  f.push_back(range(p + "y0", "initial value", [ch](RunConfig& c) -> Range& { return ch(c).y0; }));
  f.push_back(range(p + "ydot0", "second-order initial slope", [ch](RunConfig& c) -> Range& { return ch(c).ydot0; }));
  f.push_back(range(p + "y_ref", "reference (final) value", [ch](RunConfig& c) -> Range& { return ch(c).y_ref; }));
}

std::vector<Field> schema() {
  std::vector<Field> f;
  f.push_back({"format_version", "config schema version (required, must be 1)",
               [](RunConfig&, const json& j) {
                 if (!j.is_number_integer() || j.get<int>() != kConfigFormatVersion) {
                   bad("format_version", "unsupported version " + j.dump() + ", expected 1");
                 }
               },
               [](const RunConfig&) { return json(kConfigFormatVersion); }});
  f.push_back({"seed", "master seed for sampling, initialization and batching (--seed overrides)",
               [](RunConfig& c, const json& j) { c.seed = as_unsigned("seed", j); },
               [](const RunConfig& c) { return json(c.seed); }});
  f.push_back({"threads", "worker threads for generation and evaluation; 0 = all cores (--threads overrides)",
               [](RunConfig& c, const json& j) { c.threads = static_cast<unsigned>(as_unsigned("threads", j)); },
               [](const RunConfig& c) { return json(c.threads); }});

  // domain
  f.push_back({"domain.response", "input family: slow | fast (resets both channels to its ranges)",
               [](RunConfig& c, const json& j) {
                 try {
                   c.domain.response = parse_response_kind(as_string("domain.response", j));
                 } catch (const InvalidArgument& e) {
                   bad("domain.response", e.what());
                 }
                 c.domain.channels = default_channels(c.domain.response);
               },
               [](const RunConfig& c) { return json(to_string(c.domain.response)); }});
  for (std::size_t d = 0; d < kX0Dim; ++d) {
    f.push_back(range(std::string("domain.x0.") + kX0Columns[d], "initial-condition range [lo, hi]",
                      [d](RunConfig& c) -> Range& { return c.domain.x0[d]; }));
  }
  add_channel(f, "Vs", 0);
  add_channel(f, "theta_vs", 1);
  f.push_back(count("domain.n_train", "training trajectories", [](RunConfig& c) -> std::size_t& { return c.domain.n_train; }));
  f.push_back(count("domain.n_val", "validation trajectories", [](RunConfig& c) -> std::size_t& { return c.domain.n_val; }));
  f.push_back(count("domain.n_test", "test trajectories", [](RunConfig& c) -> std::size_t& { return c.domain.n_test; }));
  f.push_back(count("domain.n_colloc", "collocation input sets", [](RunConfig& c) -> std::size_t& { return c.domain.n_colloc; }));
  f.push_back(count("domain.colloc_times", "collocation times per set (LHS over [0, t_end])",
                    [](RunConfig& c) -> std::size_t& { return c.domain.colloc_times; }));
  f.push_back(count("domain.sensors", "sensor samples per input channel (m)",
                    [](RunConfig& c) -> std::size_t& { return c.domain.sensors; }));

  // solver
  f.push_back(real("solver.rtol", "relative tolerance", [](RunConfig& c) -> double& { return c.domain.solver.rtol; }));
  f.push_back(real("solver.atol", "absolute tolerance", [](RunConfig& c) -> double& { return c.domain.solver.atol; }));
  f.push_back(real("solver.h_init", "initial step [s]; 0 = automatic",
                   [](RunConfig& c) -> double& { return c.domain.solver.h_init; }));
  f.push_back(real("solver.h_max", "largest step [s]; 0 = unbounded",
                   [](RunConfig& c) -> double& { return c.domain.solver.h_max; }));
  f.push_back(real("solver.t_end", "horizon T [s]", [](RunConfig& c) -> double& { return c.domain.solver.t_end; }));
  f.push_back(real("solver.eval_dt", "output grid spacing [s]; must divide t_end",
                   [](RunConfig& c) -> double& { return c.domain.solver.eval_dt; }));

  // machine
  const std::vector<std::pair<const char*, double SmParams::*>> consts{
      {"D", &SmParams::D},       {"H", &SmParams::H},         {"Rs", &SmParams::Rs},   {"Tdo_p", &SmParams::Tdo_p},
      {"Tqo_p", &SmParams::Tqo_p}, {"Xd", &SmParams::Xd},     {"Xd_p", &SmParams::Xd_p}, {"Xq", &SmParams::Xq},
      {"Xq_p", &SmParams::Xq_p}, {"Xe", &SmParams::Xe},       {"Re", &SmParams::Re},   {"Omega_b", &SmParams::Omega_b}};
  for (const auto& [name, member] : consts) {
    f.push_back(real(std::string("machine.") + name, "machine/line constant (p.u. or s)",
                     [member](RunConfig& c) -> double& { return c.domain.params.*member; }));
  }
  f.push_back({"machine.algebraic_reactance", "stator equation reactance: as_printed (Xq) | transient (X'q)",
               [](RunConfig& c, const json& j) {
                 try {
                   c.domain.params.algebraic_reactance =
                       parse_algebraic_reactance(as_string("machine.algebraic_reactance", j));
                 } catch (const InvalidArgument& e) {
                   bad("machine.algebraic_reactance", e.what());
                 }
               },
               [](const RunConfig& c) { return json(to_string(c.domain.params.algebraic_reactance)); }});
  f.push_back({"machine.electrical_power_sign", "swing-equation power signs: as_printed | textbook",
               [](RunConfig& c, const json& j) {
                 try {
                   c.domain.params.power_sign =
                       parse_electrical_power_sign(as_string("machine.electrical_power_sign", j));
                 } catch (const InvalidArgument& e) {
                   bad("machine.electrical_power_sign", e.what());
                 }
               },
               [](const RunConfig& c) { return json(to_string(c.domain.params.power_sign)); }});

  // model
  f.push_back({"model.arch", "unstacked | stacked-n | pinn",
               [](RunConfig& c, const json& j) {
                 try {
                   c.model.arch = parse_arch(as_string("model.arch", j));
                 } catch (const InvalidArgument& e) {
                   bad("model.arch", e.what());
                 }
               },
               [](const RunConfig& c) { return json(to_string(c.model.arch)); }});
  f.push_back(count("model.latent", "latent width p (multiple of 4)",
                    [](RunConfig& c) -> std::size_t& { return c.model.latent; }));
  f.push_back({"model.hidden", "hidden layer widths of every network",
               [](RunConfig& c, const json& j) { c.model.hidden = as_sizes("model.hidden", j); },
               [](const RunConfig& c) { return json(c.model.hidden); }});
  f.push_back(count("model.pinn_width", "pinn hidden width; 0 = match the unstacked parameter count",
                    [](RunConfig& c) -> std::size_t& { return c.model.pinn_width; }));

  // train
  f.push_back(real("train.lr", "learning rate", [](RunConfig& c) -> double& { return c.train.lr; }));
  f.push_back(real("train.weight_decay", "decoupled weight decay",
                   [](RunConfig& c) -> double& { return c.train.weight_decay; }));
  f.push_back(count("train.epochs", "maximum epochs (passes over the labeled points)",
                    [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
  f.push_back(count("train.patience", "early-stopping patience [epochs]",
                    [](RunConfig& c) -> std::size_t& { return c.train.patience; }));
  f.push_back(real("train.min_delta", "minimum validation improvement",
                   [](RunConfig& c) -> double& { return c.train.min_delta; }));
  f.push_back(count("train.batch_size", "points per labeled and per collocation batch",
                    [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
  f.push_back(real("train.lambda_d", "data loss weight", [](RunConfig& c) -> double& { return c.train.lambda_d; }));
  f.push_back(real("train.lambda_pd", "labeled physics loss weight",
                   [](RunConfig& c) -> double& { return c.train.lambda_pd; }));
  f.push_back(real("train.lambda_pc", "collocation physics loss weight",
                   [](RunConfig& c) -> double& { return c.train.lambda_pc; }));
  f.push_back({"train.use_physics", "add the physics residual losses",
               [](RunConfig& c, const json& j) { c.train.use_physics = as_bool("train.use_physics", j); },
               [](const RunConfig& c) { return json(c.train.use_physics); }});

  // eval
  f.push_back({"eval.batch_sizes", "trajectories per timed batch",
               [](RunConfig& c, const json& j) { c.bench.batch_sizes = as_sizes("eval.batch_sizes", j); },
               [](const RunConfig& c) { return json(c.bench.batch_sizes); }});
  f.push_back(count("eval.warmup", "untimed runs before timing", [](RunConfig& c) -> std::size_t& { return c.bench.warmup; }));
  f.push_back(count("eval.repetitions", "timed runs (median reported)",
                    [](RunConfig& c) -> std::size_t& { return c.bench.repetitions; }));
  f.push_back({"eval.single_point", "also time single-point model evaluation",
               [](RunConfig& c, const json& j) { c.bench.single_point = as_bool("eval.single_point", j); },
               [](const RunConfig& c) { return json(c.bench.single_point); }});
  return f;
}

// Leaves of nested objects as dotted keys; arrays are leaves.
void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out.emplace_back(key, *it);
    }
  }
}

}  // namespace

void RunConfig::propagate() {
  domain.seed = seed;
  model.seed = seed;
  train.seed = seed;
  model.sensors = domain.sensors;
}

void RunConfig::validate() const {
  try {
    domain.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    domain.solver.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  try {
    domain.params.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("machine: ") + e.what());
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    train.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (bench.repetitions == 0) throw ConfigError("config key 'eval.repetitions': must be >= 1");
  for (std::size_t b : bench.batch_sizes) {
    if (b == 0) throw ConfigError("config key 'eval.batch_sizes': entries must be >= 1");
  }
}

unsigned RunConfig::worker_threads() const { return threads > 0 ? threads : default_threads(); }

std::vector<ConfigKey> config_reference() {
  RunConfig defaults;
  defaults.propagate();
  std::vector<ConfigKey> out;
  for (const Field& f : schema()) out.push_back({f.key, f.doc, f.get(defaults)});
  return out;
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (!doc.contains("format_version")) throw ConfigError("config key 'format_version' is required");
  const std::vector<Field> fields = schema();
  std::vector<std::pair<std::string, json>> leaves;
  flatten(doc, "", leaves);
  RunConfig cfg;
  // Apply domain.response first so explicit channel keys override its ranges.
  std::stable_partition(leaves.begin(), leaves.end(),
                        [](const auto& kv) { return kv.first == "format_version" || kv.first == "domain.response"; });
  for (const auto& [key, value] : leaves) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == key; });
    if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(cfg, value);
  }
  cfg.propagate();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  json out = json::object();
  for (const Field& f : schema()) {
    json* node = &out;
    std::string rest = f.key;
    for (std::size_t dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*node)[rest] = f.get(cfg);
  }
  return out;
}

}  // namespace pidon::cli
