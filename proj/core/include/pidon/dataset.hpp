#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pidon/dynamics.hpp"
#include "pidon/sampling.hpp"
#include "pidon/signal.hpp"
#include "pidon/solver.hpp"

namespace pidon {

/// Column order of the 9-wide initial-condition vector.
inline constexpr std::array<const char*, 9> kX0Columns{"delta", "omega", "Ed_p", "Eq_p", "Rf",
                                                       "Vr",    "Efd",   "Psv",  "Pm"};
/// Column order of state matrices (and of every model output).
inline constexpr std::array<const char*, 4> kStateColumns{"delta", "omega", "Eq_p", "Ed_p"};
inline constexpr std::size_t kX0Dim = 9;
inline constexpr std::size_t kStateDim = 4;

/// x0 index of each state, in state-column order.
inline constexpr std::array<std::size_t, 4> kStateInX0{0, 1, 3, 2};

enum class ResponseKind { Slow, Fast };
std::string_view to_string(ResponseKind r);
ResponseKind parse_response_kind(std::string_view s);

/// Sampling ranges of one bus-voltage channel. Only the fields of `kind` are sampled.
struct ChannelRanges {
  SignalKind kind{SignalKind::FirstOrder};
  Range k{1.0, 1.0};
  Range A_noise{0.0, 0.0};
  Range w_noise{0.0, 0.0};
  Range zeta{0.5, 0.5};
  Range w_n{1.0, 1.0};
  Range y0{0.0, 0.0};
  Range ydot0{0.0, 0.0};
  Range y_ref{0.0, 0.0};

  /// Ranges sampled by LHS, in descriptor order for `kind`.
  std::vector<Range> sampled() const;
  /// Inverse of sampled(): builds a descriptor from one LHS row slice.
  SignalDescriptor descriptor(std::span<const double> values) const;
  bool operator==(const ChannelRanges&) const = default;
};

/// Magnitude (Vs) and phase (theta_vs) channel ranges of a response family.
std::array<ChannelRanges, 2> default_channels(ResponseKind kind);

enum class Split { Train, Validation, Test, Collocation };
std::string_view to_string(Split s);

/// Everything needed to reproduce a family of datasets.
struct DomainSpec {
  std::array<Range, kX0Dim> x0{{{-2.0, 2.0},
                                {-1.0, 1.0},
                                {0.0, 0.0},
                                {0.9, 1.1},
                                {1.0, 1.0},
                                {1.105, 1.105},
                                {1.08, 1.08},
                                {0.7048, 0.7048},
                                {0.7048, 0.7048}}};
  ResponseKind response{ResponseKind::Slow};
  std::array<ChannelRanges, 2> channels{default_channels(ResponseKind::Slow)};
  std::size_t n_train{1000};
  std::size_t n_colloc{1000};
  std::size_t colloc_times{1000};
  std::size_t n_val{100};
  std::size_t n_test{100};
  std::size_t sensors{100};
  SolverConfig solver{};
  SmParams params{};
  std::uint64_t seed{0};

  /// Throws InvalidArgument (or EmptyRange) naming the offending field.
  void validate() const;
  std::size_t count(Split s) const;
  /// Independent seed of one split.
  std::uint64_t split_seed(Split s) const;
  /// Uniform sensor times over [0, T] including both endpoints.
  std::vector<double> sensor_times() const;
};

nlohmann::json to_json(const DomainSpec& spec);

/// Input side shared by labeled and collocation datasets. One row per
/// trajectory (labeled) or collocation set.
struct InputBlock {
  std::size_t n{0};
  std::size_t m{0};                  ///< sensors per channel
  std::vector<double> x0;            ///< n x 9
  std::vector<double> signals;       ///< n x 2 x 9 packed descriptors
  std::vector<double> sensors;       ///< n x 2m, channel-major (Vs then theta_vs)
  std::vector<double> sensor_times;  ///< m

  std::span<const double> x0_row(std::size_t i) const {
    return std::span<const double>(x0).subspan(i * kX0Dim, kX0Dim);
  }
  std::span<const double> sensor_row(std::size_t i) const {
    return std::span<const double>(sensors).subspan(i * 2 * m, 2 * m);
  }
  std::array<SignalDescriptor, 2> descriptors(std::size_t i) const;
  bool operator==(const InputBlock&) const = default;
};

struct LabeledDataset {
  InputBlock inputs;
  std::vector<double> times;   ///< n_t output grid
  std::vector<double> states;  ///< n x n_t x 4
  nlohmann::json meta;         ///< provenance (split, seed, domain)

  std::size_t n_traj() const { return inputs.n; }
  std::size_t n_times() const { return times.size(); }
  std::size_t n_points() const { return inputs.n * times.size(); }
  const double* state(std::size_t traj, std::size_t ti) const {
    return states.data() + (traj * times.size() + ti) * kStateDim;
  }
  bool operator==(const LabeledDataset&) const = default;
};

struct CollocationDataset {
  InputBlock inputs;
  std::size_t times_per_set{0};
  std::vector<double> times;  ///< n x times_per_set, LHS over [0, T]
  nlohmann::json meta;

  std::size_t n_points() const { return inputs.n * times_per_set; }
  bool operator==(const CollocationDataset&) const = default;
};

/// Draws the inputs of split `s` (x0 and channel descriptors by LHS) and
/// samples the sensors.
InputBlock sample_inputs(const DomainSpec& spec, Split s);

/// Integrates one trajectory with the closed-form bus voltage.
SolutionGrid simulate_trajectory(std::span<const double> x0,
                                 const std::array<SignalDescriptor, 2>& channels,
                                 const SmParams& params, const SolverConfig& solver);

struct GenerateOptions {
  unsigned threads{1};
  /// Optional hook invoked once per right-hand-side evaluation (instrumentation).
  std::function<void()> on_rhs{};
};

/// Labeled trajectories for a labeled split. Solver failures are rethrown as
/// TrajectoryError carrying the trajectory index.
LabeledDataset generate_labeled(const DomainSpec& spec, Split s, const GenerateOptions& opt = {});

/// Collocation inputs; performs no integration.
CollocationDataset generate_collocation(const DomainSpec& spec, const GenerateOptions& opt = {});

inline constexpr int kDatasetFormatVersion = 1;

void write_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);
void write_dataset(const CollocationDataset& ds, const std::filesystem::path& dir);

using AnyDataset = std::variant<LabeledDataset, CollocationDataset>;

/// Throws TruncatedFile, FormatVersionMismatch or ChecksumMismatch.
AnyDataset read_dataset(const std::filesystem::path& dir);
LabeledDataset read_labeled(const std::filesystem::path& dir);
CollocationDataset read_collocation(const std::filesystem::path& dir);

/// CRC-32C (Castagnoli) of a byte range.
std::uint32_t crc32c(std::span<const std::byte> bytes);

}  // namespace pidon
