#include "pidon/dataset.hpp"

#include <bit>
#include <cstring>
#include <exception>
#include <fstream>

#include <boost/crc.hpp>

#include "pidon/errors.hpp"
#include "pidon/parallel.hpp"

namespace pidon {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ResponseKind r) { return r == ResponseKind::Slow ? "slow" : "fast"; }

ResponseKind parse_response_kind(std::string_view s) {
  if (s == "slow") return ResponseKind::Slow;
  if (s == "fast") return ResponseKind::Fast;
  throw InvalidArgument("response must be 'slow' or 'fast', got '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "val";
    case Split::Test: return "test";
    case Split::Collocation: return "colloc";
  }
  return "unknown";
}

std::vector<Range> ChannelRanges::sampled() const {
  if (kind == SignalKind::FirstOrder) return {k, A_noise, w_noise, y0, y_ref};
  return {zeta, w_n, y0, ydot0, y_ref};
}

SignalDescriptor ChannelRanges::descriptor(std::span<const double> v) const {
  if (kind == SignalKind::FirstOrder) {
    return SignalDescriptor::first_order(v[0], v[4], v[1], v[2], v[3]);
  }
  return SignalDescriptor::second_order(v[0], v[1], v[4], v[2], v[3]);
}

std::array<ChannelRanges, 2> default_channels(ResponseKind kind) {
  ChannelRanges vs;
  ChannelRanges th;
  vs.y0 = vs.y_ref = {0.7, 1.2};
  th.y0 = th.y_ref = {-0.5, 0.5};
  if (kind == ResponseKind::Slow) {
    vs.kind = th.kind = SignalKind::FirstOrder;
    vs.k = {1.0, 2.0};
    vs.A_noise = {0.0, 0.03};
    vs.w_noise = {0.5, 1.5};
    th.k = {1.0, 3.0};
    th.A_noise = {0.0, 0.05};
    th.w_noise = {0.1, 0.5};
  } else {
    vs.kind = th.kind = SignalKind::SecondOrder;
    vs.zeta = {0.6, 0.8};
    vs.w_n = {8.0, 12.0};
    vs.ydot0 = {-0.2, 0.2};
    th.zeta = {0.2, 0.4};
    th.w_n = {10.0, 18.0};
    th.ydot0 = {-0.8, 0.8};
  }
  return {vs, th};
}

void DomainSpec::validate() const {
  for (std::size_t d = 0; d < kX0Dim; ++d) {
    if (!(x0[d].lo <= x0[d].hi)) {
      throw EmptyRange(std::string("domain.x0.") + kX0Columns[d] + ": lo > hi");
    }
  }
  const char* names[2] = {"Vs", "theta_vs"};
  for (std::size_t c = 0; c < 2; ++c) {
    for (const Range& r : channels[c].sampled()) {
      if (!(r.lo <= r.hi)) {
        throw EmptyRange(std::string("domain.channels.") + names[c] + ": a range has lo > hi");
      }
    }
    // Corners of the box must describe valid signals.
    std::vector<double> lo, hi;
    for (const Range& r : channels[c].sampled()) {
      lo.push_back(r.lo);
      hi.push_back(r.hi);
    }
    channels[c].descriptor(lo).validate();
    channels[c].descriptor(hi).validate();
  }
  if (n_train == 0 || n_colloc == 0 || colloc_times == 0 || n_val == 0 || n_test == 0) {
    throw InvalidArgument("domain counts must be > 0");
  }
  if (sensors < 2) throw InvalidArgument("domain.sensors must be >= 2");
  solver.validate();
  params.validate();
}

std::size_t DomainSpec::count(Split s) const {
  switch (s) {
    case Split::Train: return n_train;
    case Split::Validation: return n_val;
    case Split::Test: return n_test;
    case Split::Collocation: return n_colloc;
  }
  return 0;
}

std::uint64_t DomainSpec::split_seed(Split s) const {
  return mix_seed(seed, 1000 + static_cast<std::uint64_t>(s));
}

std::vector<double> DomainSpec::sensor_times() const {
  std::vector<double> t(sensors);
  for (std::size_t i = 0; i < sensors; ++i) {
    t[i] = solver.t_end * static_cast<double>(i) / static_cast<double>(sensors - 1);
  }
  t.back() = solver.t_end;
  return t;
}

namespace {

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

json channel_json(const ChannelRanges& c) {
  json j;
  j["kind"] = to_string(c.kind);
  if (c.kind == SignalKind::FirstOrder) {
    j["k"] = range_json(c.k);
    j["A_noise"] = range_json(c.A_noise);
    j["w_noise"] = range_json(c.w_noise);
  } else {
    j["zeta"] = range_json(c.zeta);
    j["w_n"] = range_json(c.w_n);
    j["ydot0"] = range_json(c.ydot0);
  }
  j["y0"] = range_json(c.y0);
  j["y_ref"] = range_json(c.y_ref);
  return j;
}

}  // namespace

json to_json(const DomainSpec& spec) {
  json j;
  json x0 = json::object();
  for (std::size_t d = 0; d < kX0Dim; ++d) x0[kX0Columns[d]] = range_json(spec.x0[d]);
  j["x0"] = x0;
  j["response"] = to_string(spec.response);
  j["channels"] = {{"Vs", channel_json(spec.channels[0])},
                   {"theta_vs", channel_json(spec.channels[1])}};
  j["n_train"] = spec.n_train;
  j["n_colloc"] = spec.n_colloc;
  j["colloc_times"] = spec.colloc_times;
  j["n_val"] = spec.n_val;
  j["n_test"] = spec.n_test;
  j["sensors"] = spec.sensors;
  j["seed"] = spec.seed;
  j["solver"] = {{"rtol", spec.solver.rtol},       {"atol", spec.solver.atol},
                 {"h_init", spec.solver.h_init},   {"h_max", spec.solver.h_max},
                 {"t_end", spec.solver.t_end},     {"eval_dt", spec.solver.eval_dt}};
  const SmParams& p = spec.params;
  j["machine"] = {{"D", p.D},
                  {"H", p.H},
                  {"Rs", p.Rs},
                  {"Tdo_p", p.Tdo_p},
                  {"Tqo_p", p.Tqo_p},
                  {"Xd", p.Xd},
                  {"Xd_p", p.Xd_p},
                  {"Xq", p.Xq},
                  {"Xq_p", p.Xq_p},
                  {"Xe", p.Xe},
                  {"Re", p.Re},
                  {"Omega_b", p.Omega_b},
                  {"algebraic_reactance", to_string(p.algebraic_reactance)},
                  {"electrical_power_sign", to_string(p.power_sign)}};
  return j;
}

std::array<SignalDescriptor, 2> InputBlock::descriptors(std::size_t i) const {
  const auto row = std::span<const double>(signals).subspan(i * 2 * SignalDescriptor::kPackedSize,
                                                            2 * SignalDescriptor::kPackedSize);
  return {SignalDescriptor::unpack(row.subspan(0, SignalDescriptor::kPackedSize)),
          SignalDescriptor::unpack(row.subspan(SignalDescriptor::kPackedSize))};
}

InputBlock sample_inputs(const DomainSpec& spec, Split s) {
  const std::size_t n = spec.count(s);
  std::vector<Range> ranges(spec.x0.begin(), spec.x0.end());
  const std::vector<Range> r0 = spec.channels[0].sampled();
  const std::vector<Range> r1 = spec.channels[1].sampled();
  ranges.insert(ranges.end(), r0.begin(), r0.end());
  ranges.insert(ranges.end(), r1.begin(), r1.end());
  const Eigen::MatrixXd lhs = lhs_sample(ranges, n, spec.split_seed(s));

  InputBlock in;
  in.n = n;
  in.m = spec.sensors;
  in.sensor_times = spec.sensor_times();
  in.x0.resize(n * kX0Dim);
  in.signals.resize(n * 2 * SignalDescriptor::kPackedSize);
  in.sensors.resize(n * 2 * in.m);
  std::vector<double> row(ranges.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < ranges.size(); ++d) {
      row[d] = lhs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
    }
    std::copy_n(row.begin(), kX0Dim, in.x0.begin() + static_cast<std::ptrdiff_t>(i * kX0Dim));
    const std::span<const double> rs(row);
    const std::array<SignalDescriptor, 2> desc{
        spec.channels[0].descriptor(rs.subspan(kX0Dim, r0.size())),
        spec.channels[1].descriptor(rs.subspan(kX0Dim + r0.size(), r1.size()))};
    for (std::size_t c = 0; c < 2; ++c) {
      const auto packed = desc[c].pack();
      std::copy(packed.begin(), packed.end(),
                in.signals.begin() +
                    static_cast<std::ptrdiff_t>((i * 2 + c) * SignalDescriptor::kPackedSize));
      for (std::size_t k = 0; k < in.m; ++k) {
        in.sensors[i * 2 * in.m + c * in.m + k] = eval_signal(desc[c], in.sensor_times[k]).y;
      }
    }
  }
  return in;
}

namespace {

SolutionGrid run_trajectory(std::span<const double> x0, const std::array<SignalDescriptor, 2>& channels,
                            const SmParams& params, const SolverConfig& solver,
                            const std::function<void()>& on_rhs) {
  const ExogenousInputs u{x0[8], x0[6], x0[4], x0[5], x0[7]};
  const std::array<double, 4> start{x0[0], x0[1], x0[3], x0[2]};
  const VectorField rhs = [&](double t, std::span<const double> x, std::span<double> dx) {
    if (on_rhs) on_rhs();
    const BusVoltage bus{eval_signal(channels[0], t).y, eval_signal(channels[1], t).y};
    const SmState d = sm_rhs(state_from(x.data()), u, bus, params);
    dx[0] = d.delta;
    dx[1] = d.omega;
    dx[2] = d.Eq_p;
    dx[3] = d.Ed_p;
  };
  return integrate(rhs, start, solver);
}

}  // namespace

SolutionGrid simulate_trajectory(std::span<const double> x0,
                                 const std::array<SignalDescriptor, 2>& channels,
                                 const SmParams& params, const SolverConfig& solver) {
  return run_trajectory(x0, channels, params, solver, {});
}

namespace {

json provenance(const DomainSpec& spec, Split s) {
  return {{"split", to_string(s)}, {"split_seed", spec.split_seed(s)}, {"domain", to_json(spec)}};
}

}  // namespace

LabeledDataset generate_labeled(const DomainSpec& spec, Split s, const GenerateOptions& opt) {
  if (s == Split::Collocation) throw InvalidArgument("collocation split carries no labels");
  spec.validate();
  LabeledDataset ds;
  ds.inputs = sample_inputs(spec, s);
  ds.times = make_grid(spec.solver);
  ds.meta = provenance(spec, s);
  const std::size_t n_t = ds.times.size();
  ds.states.assign(ds.inputs.n * n_t * kStateDim, 0.0);

  parallel_for(ds.inputs.n, opt.threads, [&](std::size_t i) {
    const auto desc = ds.inputs.descriptors(i);
    const auto x0 = ds.inputs.x0_row(i);
    SolutionGrid sol;
    try {
      sol = run_trajectory(x0, desc, spec.params, spec.solver, opt.on_rhs);
    } catch (const Error& e) {
      throw TrajectoryError(i, e.what());
    }
    std::copy(sol.states.begin(), sol.states.end(),
              ds.states.begin() + static_cast<std::ptrdiff_t>(i * n_t * kStateDim));
  });
  return ds;
}

CollocationDataset generate_collocation(const DomainSpec& spec, const GenerateOptions& opt) {
  spec.validate();
  CollocationDataset ds;
  ds.inputs = sample_inputs(spec, Split::Collocation);
  ds.times_per_set = spec.colloc_times;
  ds.meta = provenance(spec, Split::Collocation);
  ds.times.resize(ds.inputs.n * ds.times_per_set);
  const Range horizon{0.0, spec.solver.t_end};
  const std::uint64_t base = spec.split_seed(Split::Collocation);
  parallel_for(ds.inputs.n, opt.threads, [&](std::size_t i) {
    const Eigen::MatrixXd t =
        lhs_sample(std::span<const Range>(&horizon, 1), ds.times_per_set, mix_seed(base, i));
    for (std::size_t k = 0; k < ds.times_per_set; ++k) {
      ds.times[i * ds.times_per_set + k] = t(static_cast<Eigen::Index>(k), 0);
    }
  });
  return ds;
}

// ---------------------------------------------------------------------------
// On-disk format

std::uint32_t crc32c(std::span<const std::byte> bytes) {
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace {

constexpr const char* kMetaFile = "meta.json";

std::vector<std::byte> to_le_bytes(std::span<const double> values) {
  std::vector<std::byte> out(values.size() * sizeof(double));
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    std::memcpy(out.data() + i * sizeof(double), &bits, sizeof(bits));
  }
  return out;
}

std::vector<double> from_le_bytes(std::span<const std::byte> bytes) {
  std::vector<double> out(bytes.size() / sizeof(double));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + i * sizeof(double), sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

/// CRC32C of the compact dump of `meta` without its own checksum field.
std::uint32_t meta_crc(json meta) {
  meta.erase("meta_crc32c");
  const std::string text = meta.dump();
  return crc32c(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

class ArrayWriter {
 public:
  explicit ArrayWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void add(const std::string& name, std::span<const double> values, std::vector<std::size_t> shape) {
    const std::vector<std::byte> bytes = to_le_bytes(values);
    const fs::path file = dir_ / (name + ".f64");
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("cannot write " + file.string());
    arrays_[name] = {{"file", name + ".f64"}, {"shape", shape}, {"crc32c", crc32c(bytes)}};
  }

  void finish(json meta) {
    meta["format_version"] = kDatasetFormatVersion;
    meta["dtype"] = "f64";
    meta["byte_order"] = "little";
    meta["layout"] = "row-major";
    meta["arrays"] = arrays_;
    meta["meta_crc32c"] = meta_crc(meta);
    const fs::path file = dir_ / kMetaFile;
    std::ofstream os(file, std::ios::trunc);
    os << meta.dump(2) << '\n';
    if (!os) throw IoError("cannot write " + file.string());
  }

 private:
  fs::path dir_;
  json arrays_ = json::object();
};

json input_columns() {
  json cols;
  cols["x0"] = kX0Columns;
  cols["states"] = kStateColumns;
  cols["signals"] = {"kind", "k", "y_ref", "A_noise", "w_noise", "zeta", "w_n", "y0", "ydot0"};
  cols["sensors"] = {"Vs", "theta_vs"};
  return cols;
}

void write_inputs(ArrayWriter& w, const InputBlock& in) {
  w.add("x0", in.x0, {in.n, kX0Dim});
  w.add("signals", in.signals, {in.n, 2, SignalDescriptor::kPackedSize});
  w.add("sensors", in.sensors, {in.n, 2, in.m});
  w.add("sensor_times", in.sensor_times, {in.m});
}

json read_meta(const fs::path& dir) {
  const fs::path file = dir / kMetaFile;
  std::ifstream is(file);
  if (!is) throw TruncatedFile("missing " + file.string());
  json meta;
  try {
    meta = json::parse(is);
  } catch (const json::exception& e) {
    throw TruncatedFile("unreadable " + file.string() + ": " + e.what());
  }
  if (!meta.contains("format_version") || !meta["format_version"].is_number_integer()) {
    throw TruncatedFile(file.string() + " has no format_version");
  }
  if (meta["format_version"].get<int>() != kDatasetFormatVersion) {
    throw FormatVersionMismatch("dataset format_version " + meta["format_version"].dump() +
                                " is not supported (expected " +
                                std::to_string(kDatasetFormatVersion) + ")");
  }
  const auto stored = meta.find("meta_crc32c");
  if (stored == meta.end() || !stored->is_number_unsigned() || stored->get<std::uint32_t>() != meta_crc(meta)) {
    throw ChecksumMismatch("checksum mismatch in " + file.string());
  }
  return meta;
}

std::vector<double> read_array(const fs::path& dir, const json& meta, const std::string& name) {
  if (!meta.contains("arrays") || !meta["arrays"].contains(name)) {
    throw TruncatedFile("meta.json does not describe array '" + name + "'");
  }
  const json& a = meta["arrays"][name];
  std::size_t count = 1;
  for (const auto& d : a.at("shape")) count *= d.get<std::size_t>();
  const fs::path file = dir / a.at("file").get<std::string>();
  std::ifstream is(file, std::ios::binary);
  if (!is) throw TruncatedFile("missing " + file.string());
  std::vector<std::byte> bytes(count * sizeof(double));
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size() || is.peek() != std::ifstream::traits_type::eof()) {
    throw TruncatedFile(file.string() + " does not hold " + std::to_string(count) + " values");
  }
  if (crc32c(bytes) != a.at("crc32c").get<std::uint32_t>()) {
    throw ChecksumMismatch("checksum mismatch in " + file.string());
  }
  return from_le_bytes(bytes);
}

InputBlock read_inputs(const fs::path& dir, const json& meta) {
  InputBlock in;
  const json& arrays = meta.at("arrays");
  in.n = arrays.at("x0").at("shape")[0].get<std::size_t>();
  in.m = arrays.at("sensor_times").at("shape")[0].get<std::size_t>();
  in.x0 = read_array(dir, meta, "x0");
  in.signals = read_array(dir, meta, "signals");
  in.sensors = read_array(dir, meta, "sensors");
  in.sensor_times = read_array(dir, meta, "sensor_times");
  if (in.signals.size() != in.n * 2 * SignalDescriptor::kPackedSize ||
      in.sensors.size() != in.n * 2 * in.m) {
    throw TruncatedFile("dataset arrays have inconsistent shapes");
  }
  return in;
}

}  // namespace

void write_dataset(const LabeledDataset& ds, const fs::path& dir) {
  ArrayWriter w(dir);
  write_inputs(w, ds.inputs);
  w.add("times", ds.times, {ds.times.size()});
  w.add("states", ds.states, {ds.inputs.n, ds.times.size(), kStateDim});
  json meta;
  meta["kind"] = "labeled";
  meta["columns"] = input_columns();
  meta["provenance"] = ds.meta;
  w.finish(std::move(meta));
}

void write_dataset(const CollocationDataset& ds, const fs::path& dir) {
  ArrayWriter w(dir);
  write_inputs(w, ds.inputs);
  w.add("times", ds.times, {ds.inputs.n, ds.times_per_set});
  json meta;
  meta["kind"] = "collocation";
  meta["columns"] = input_columns();
  meta["provenance"] = ds.meta;
  w.finish(std::move(meta));
}

AnyDataset read_dataset(const fs::path& dir) {
  const json meta = read_meta(dir);
  const std::string kind = meta.value("kind", "");
  try {
    if (kind == "labeled") {
      LabeledDataset ds;
      ds.inputs = read_inputs(dir, meta);
      ds.times = read_array(dir, meta, "times");
      ds.states = read_array(dir, meta, "states");
      ds.meta = meta.value("provenance", json());
      if (ds.states.size() != ds.inputs.n * ds.times.size() * kStateDim) {
        throw TruncatedFile("state array has inconsistent shape");
      }
      return ds;
    }
    if (kind == "collocation") {
      CollocationDataset ds;
      ds.inputs = read_inputs(dir, meta);
      ds.times_per_set = meta.at("arrays").at("times").at("shape")[1].get<std::size_t>();
      ds.times = read_array(dir, meta, "times");
      ds.meta = meta.value("provenance", json());
      return ds;
    }
  } catch (const json::exception& e) {
    throw TruncatedFile(std::string("malformed meta.json: ") + e.what());
  }
  throw TruncatedFile("meta.json has unknown dataset kind '" + kind + "'");
}

LabeledDataset read_labeled(const fs::path& dir) {
  AnyDataset any = read_dataset(dir);
  if (auto* ds = std::get_if<LabeledDataset>(&any)) return std::move(*ds);
  throw InvalidArgument(dir.string() + " is not a labeled dataset");
}

CollocationDataset read_collocation(const fs::path& dir) {
  AnyDataset any = read_dataset(dir);
  if (auto* ds = std::get_if<CollocationDataset>(&any)) return std::move(*ds);
  throw InvalidArgument(dir.string() + " is not a collocation dataset");
}

}  // namespace pidon
