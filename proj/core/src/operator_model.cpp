#include "pidon/operator_model.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "pidon/errors.hpp"
#include "pidon/sampling.hpp"

namespace pidon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::Unstacked:
      return "unstacked";
    case Arch::StackedN:
      return "stacked-n";
    case Arch::Pinn:
      return "pinn";
  }
  return "unknown";
}

Arch parse_arch(std::string_view s) {
  if (s == "unstacked") return Arch::Unstacked;
  if (s == "stacked-n") return Arch::StackedN;
  if (s == "pinn") return Arch::Pinn;
  throw InvalidArgument("unknown architecture '" + std::string(s) + "' (unstacked | stacked-n | pinn)");
}

void ModelSpec::validate() const {
  if (sensors == 0) throw InvalidArgument("model.sensors must be >= 1");
  if (latent == 0 || latent % kStateDim != 0) {
    throw InvalidArgument("model.latent must be a positive multiple of 4");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw InvalidArgument("model.hidden widths must be >= 1");
  }
}

namespace {

MlpSpec net_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                 std::uint64_t seed, std::uint64_t stream) {
  return {in, hidden, out, mix_seed(seed, stream)};
}

std::size_t pinn_count(const ModelSpec& spec, std::size_t width) {
  MlpSpec s{spec.branch_input_dim() + 1, std::vector<std::size_t>(spec.hidden.size(), width),
            kStateDim, 0};
  return s.parameter_count();
}

}  // namespace

std::size_t unstacked_parameter_count(const ModelSpec& spec) {
  const MlpSpec branch{spec.branch_input_dim(), spec.hidden, spec.latent, 0};
  const MlpSpec trunk{1, spec.hidden, spec.latent, 0};
  return branch.parameter_count() + trunk.parameter_count() + kStateDim;
}

std::size_t matched_pinn_width(const ModelSpec& spec) {
  const auto target = static_cast<double>(unstacked_parameter_count(spec));
  std::size_t best = 1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t w = 1; w <= 4096; ++w) {
    const double gap = std::abs(static_cast<double>(pinn_count(spec, w)) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
  }
  return best;
}

Normalization Normalization::fit(const LabeledDataset& train) {
  if (train.n_traj() == 0 || train.n_times() == 0) throw EmptyDataset("cannot fit statistics on an empty dataset");
  const InputBlock& in = train.inputs;
  const auto n = static_cast<Index>(in.n);
  const auto d = static_cast<Index>(kX0Dim + 2 * in.m);
  MatrixXd raw(n, d);
  for (Index i = 0; i < n; ++i) {
    const auto x0 = in.x0_row(static_cast<std::size_t>(i));
    const auto s = in.sensor_row(static_cast<std::size_t>(i));
    for (Index j = 0; j < static_cast<Index>(kX0Dim); ++j) raw(i, j) = x0[static_cast<std::size_t>(j)];
    for (Index j = 0; j < static_cast<Index>(s.size()); ++j) raw(i, kX0Dim + j) = s[static_cast<std::size_t>(j)];
  }
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>> states(
      train.states.data(), static_cast<Index>(train.n_points()), 4);

  auto stats = [](const auto& m, RowVectorXd& mean, RowVectorXd& sd) {
    mean = m.colwise().mean();
    sd = ((m.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(m.rows()))
             .sqrt()
             .matrix();
    for (Index j = 0; j < sd.size(); ++j) {
      if (!(sd(j) >= 1e-12)) sd(j) = 1.0;
    }
  };
  Normalization norm;
  stats(raw, norm.input_mean, norm.input_std);
  MatrixXd st = states;
  stats(st, norm.state_mean, norm.state_std);
  norm.horizon = train.times.back() > 0.0 ? train.times.back() : 1.0;
  return norm;
}

MatrixXd Normalization::normalize_inputs(const MatrixXd& raw) const {
  if (raw.cols() != input_mean.size()) throw DimensionMismatch("input width does not match the normalization");
  return ((raw.rowwise() - input_mean).array().rowwise() / input_std.array()).matrix();
}

MatrixXd Normalization::normalize_states(const MatrixXd& physical) const {
  return ((physical.rowwise() - state_mean).array().rowwise() / state_std.array()).matrix();
}

MatrixXd Normalization::denormalize_states(const MatrixXd& normalized) const {
  return ((normalized.array().rowwise() * state_std.array()).rowwise() + state_mean.array()).matrix();
}

OperatorModel OperatorModel::create(const ModelSpec& spec) {
  spec.validate();
  OperatorModel m;
  m.spec = spec;
  const std::size_t p = spec.latent;
  switch (spec.arch) {
    case Arch::Unstacked:
      m.branch = Mlp(net_spec(spec.branch_input_dim(), spec.hidden, p, spec.seed, 1));
      m.trunk = Mlp(net_spec(1, spec.hidden, p, spec.seed, 2));
      break;
    case Arch::StackedN:
      m.branch = Mlp(net_spec(kX0Dim, spec.hidden, p, spec.seed, 1));
      m.branch_b = Mlp(net_spec(2 * spec.sensors, spec.hidden, p, spec.seed, 3));
      m.trunk = Mlp(net_spec(1, spec.hidden, p, spec.seed, 2));
      break;
    case Arch::Pinn: {
      const std::size_t w = spec.pinn_width > 0 ? spec.pinn_width : matched_pinn_width(spec);
      m.pinn = Mlp(net_spec(spec.branch_input_dim() + 1, std::vector<std::size_t>(spec.hidden.size(), w),
                            kStateDim, spec.seed, 4));
      break;
    }
  }
  if (m.is_deeponet()) m.out_bias = MatrixXd::Zero(1, kStateDim);
  return m;
}

namespace {

template <class Model, class Out>
void collect(Model& m, std::vector<Out>& out) {
  for (auto* net : {&m.branch, &m.branch_b, &m.trunk, &m.pinn}) {
    for (auto& layer : net->layers()) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  if (m.is_deeponet()) out.push_back(&m.out_bias);
}

}  // namespace

std::vector<MatrixXd*> OperatorModel::parameters() {
  std::vector<MatrixXd*> out;
  collect(*this, out);
  return out;
}

std::vector<const MatrixXd*> OperatorModel::parameters() const {
  std::vector<const MatrixXd*> out;
  collect(*this, out);
  return out;
}

std::size_t OperatorModel::parameter_count() const {
  std::size_t n = 0;
  for (const MatrixXd* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

void OperatorModel::check_fitted() const {
  if (!norm) throw NotFitted("model has no normalization statistics");
}

namespace {

void check_inputs(const OperatorModel& model, std::size_t x0_size, std::size_t sensor_size) {
  if (x0_size != kX0Dim) {
    throw DimensionMismatch("x0 must have 9 entries, got " + std::to_string(x0_size));
  }
  if (sensor_size != 2 * model.spec.sensors) {
    throw DimensionMismatch("expected " + std::to_string(2 * model.spec.sensors) + " sensor values, got " +
                            std::to_string(sensor_size));
  }
  model.check_fitted();
}

RowVectorXd branch_row(std::span<const double> x0, std::span<const double> sensors) {
  RowVectorXd row(static_cast<Index>(x0.size() + sensors.size()));
  for (std::size_t j = 0; j < x0.size(); ++j) row(static_cast<Index>(j)) = x0[j];
  for (std::size_t j = 0; j < sensors.size(); ++j) row(static_cast<Index>(x0.size() + j)) = sensors[j];
  return row;
}

// Branch coefficients (rows x p) of normalized branch inputs.
MatrixXd branch_coefficients(const OperatorModel& model, const MatrixXd& in_n) {
  if (model.arch() == Arch::Unstacked) return model.branch.forward_batch(in_n);
  const MatrixXd a = model.branch.forward_batch(in_n.leftCols(kX0Dim));
  const MatrixXd b = model.branch_b.forward_batch(in_n.rightCols(in_n.cols() - static_cast<Index>(kX0Dim)));
  return a.cwiseProduct(b);
}

// Per-state inner products of the branch and trunk rows.
RowVectorXd contract(const OperatorModel& model, const RowVectorXd& b, const RowVectorXd& tau) {
  const Index block = static_cast<Index>(model.spec.latent / kStateDim);
  RowVectorXd out(kStateDim);
  for (Index j = 0; j < static_cast<Index>(kStateDim); ++j) {
    out(j) = b.segment(j * block, block).dot(tau.segment(j * block, block));
  }
  return out;
}

}  // namespace

StateRate operator_forward_dt(const OperatorModel& model, std::span<const double> x0,
                              std::span<const double> sensors, double t) {
  check_inputs(model, x0.size(), sensors.size());
  const Normalization& norm = *model.norm;
  const RowVectorXd in_n = norm.normalize_inputs(branch_row(x0, sensors));
  const Dual tn = Dual::variable(t / norm.horizon);

  RowVectorXd value(kStateDim);
  RowVectorXd slope(kStateDim);
  if (model.is_deeponet()) {
    const RowVectorXd b = branch_coefficients(model, in_n);
    const std::vector<Dual> tau = model.trunk.forward_dual(std::span<const Dual>(&tn, 1));
    RowVectorXd tv(static_cast<Index>(tau.size()));
    RowVectorXd td(static_cast<Index>(tau.size()));
    for (std::size_t k = 0; k < tau.size(); ++k) {
      tv(static_cast<Index>(k)) = tau[k].value;
      td(static_cast<Index>(k)) = tau[k].tangent;
    }
    value = contract(model, b, tv) + model.out_bias;
    slope = contract(model, b, td);
  } else {
    std::vector<Dual> in(static_cast<std::size_t>(in_n.size()) + 1);
    for (Index j = 0; j < in_n.size(); ++j) in[static_cast<std::size_t>(j)] = Dual(in_n(j));
    in.back() = tn;
    const std::vector<Dual> out = model.pinn.forward_dual(in);
    for (std::size_t j = 0; j < kStateDim; ++j) {
      value(static_cast<Index>(j)) = out[j].value;
      slope(static_cast<Index>(j)) = out[j].tangent;
    }
  }
  StateRate r{};
  for (std::size_t j = 0; j < kStateDim; ++j) {
    const auto jj = static_cast<Index>(j);
    r.state[j] = value(jj) * norm.state_std(jj) + norm.state_mean(jj);
    r.rate[j] = slope(jj) * norm.state_std(jj) / norm.horizon;
  }
  return r;
}

std::array<double, 4> operator_forward(const OperatorModel& model, std::span<const double> x0,
                                       std::span<const double> sensors, double t) {
  check_inputs(model, x0.size(), sensors.size());
  const Normalization& norm = *model.norm;
  const RowVectorXd in_n = norm.normalize_inputs(branch_row(x0, sensors));
  const double tn = t / norm.horizon;
  RowVectorXd value;
  if (model.is_deeponet()) {
    const MatrixXd tau = model.trunk.forward_batch(MatrixXd::Constant(1, 1, tn));
    value = contract(model, branch_coefficients(model, in_n), tau) + model.out_bias;
  } else {
    RowVectorXd in(in_n.size() + 1);
    in << in_n, tn;
    value = model.pinn.forward_batch(in);
  }
  const RowVectorXd phys = norm.denormalize_states(value);
  return {phys(0), phys(1), phys(2), phys(3)};
}

std::array<double, 4> pinn_forward(const OperatorModel& model, std::span<const double> x0,
                                   std::span<const double> sensors, double t) {
  if (model.arch() != Arch::Pinn) throw InvalidArgument("pinn_forward needs a pinn model");
  return operator_forward(model, x0, sensors, t);
}

namespace {

MatrixXd input_rows(const InputBlock& inputs) {
  const auto d = static_cast<Index>(kX0Dim + 2 * inputs.m);
  MatrixXd raw(static_cast<Index>(inputs.n), d);
  for (std::size_t i = 0; i < inputs.n; ++i) {
    raw.row(static_cast<Index>(i)) = branch_row(inputs.x0_row(i), inputs.sensor_row(i));
  }
  return raw;
}

}  // namespace

std::vector<double> predict_grid(const OperatorModel& model, const InputBlock& inputs,
                                 std::span<const double> times) {
  model.check_fitted();
  if (inputs.m != model.spec.sensors) {
    throw DimensionMismatch("dataset has " + std::to_string(inputs.m) + " sensors per channel, model expects " +
                            std::to_string(model.spec.sensors));
  }
  const Normalization& norm = *model.norm;
  const auto n = static_cast<Index>(inputs.n);
  const auto nt = static_cast<Index>(times.size());
  std::vector<double> out(inputs.n * times.size() * kStateDim);
  if (n == 0 || nt == 0) return out;
  const MatrixXd in_n = norm.normalize_inputs(input_rows(inputs));

  if (model.is_deeponet()) {
    MatrixXd tn(nt, 1);
    for (Index k = 0; k < nt; ++k) tn(k, 0) = times[static_cast<std::size_t>(k)] / norm.horizon;
    const MatrixXd b = branch_coefficients(model, in_n);
    const MatrixXd tau = model.trunk.forward_batch(tn);
    const Index block = static_cast<Index>(model.spec.latent / kStateDim);
    const Index chunk = std::min<Index>(n, 16);
    std::array<MatrixXd, kStateDim> s;
    for (Index i0 = 0; i0 < n; i0 += chunk) {
      const Index c = std::min(chunk, n - i0);
      for (Index j = 0; j < static_cast<Index>(kStateDim); ++j) {
        // nt x c inner products of block j; column i is trajectory i0 + i.
        s[j].noalias() = tau.middleCols(j * block, block) * b.block(i0, j * block, c, block).transpose();
      }
      double* dst = out.data() + i0 * nt * 4;
      for (Index i = 0; i < c; ++i) {
        for (Index k = 0; k < nt; ++k, dst += 4) {
          for (Index j = 0; j < 4; ++j) {
            dst[j] = (s[j](k, i) + model.out_bias(0, j)) * norm.state_std(j) + norm.state_mean(j);
          }
        }
      }
    }
    return out;
  }

  MatrixXd x(nt, in_n.cols() + 1);
  for (Index k = 0; k < nt; ++k) x(k, in_n.cols()) = times[static_cast<std::size_t>(k)] / norm.horizon;
  for (Index i = 0; i < n; ++i) {
    x.leftCols(in_n.cols()).rowwise() = in_n.row(i);
    const MatrixXd phys = norm.denormalize_states(model.pinn.forward_batch(x));
    for (Index k = 0; k < nt; ++k) {
      for (Index j = 0; j < 4; ++j) out[static_cast<std::size_t>((i * nt + k) * 4 + j)] = phys(k, j);
    }
  }
  return out;
}

PointBatch make_point_batch(const InputBlock& inputs, std::span<const int> rows,
                            std::span<const double> times) {
  if (rows.size() != times.size()) throw DimensionMismatch("rows and times differ in length");
  PointBatch batch;
  std::map<int, int> row_slot;
  std::map<double, int> time_slot;
  std::vector<int> unique_rows;
  std::vector<double> unique_times;
  batch.branch_idx.reserve(rows.size());
  batch.time_idx.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= inputs.n) {
      throw DimensionMismatch("point row index out of range");
    }
    auto [r, r_new] = row_slot.try_emplace(rows[i], static_cast<int>(unique_rows.size()));
    if (r_new) unique_rows.push_back(rows[i]);
    auto [t, t_new] = time_slot.try_emplace(times[i], static_cast<int>(unique_times.size()));
    if (t_new) unique_times.push_back(times[i]);
    batch.branch_idx.push_back(r->second);
    batch.time_idx.push_back(t->second);
  }
  batch.branch_in.resize(static_cast<Index>(unique_rows.size()), static_cast<Index>(kX0Dim + 2 * inputs.m));
  for (std::size_t u = 0; u < unique_rows.size(); ++u) {
    const auto src = static_cast<std::size_t>(unique_rows[u]);
    batch.branch_in.row(static_cast<Index>(u)) = branch_row(inputs.x0_row(src), inputs.sensor_row(src));
  }
  batch.times = Eigen::Map<const Eigen::VectorXd>(unique_times.data(), static_cast<Index>(unique_times.size()));
  return batch;
}

OperatorVars bind(ad::Tape& tape, const OperatorModel& model, bool trainable) {
  OperatorVars v;
  v.tape = &tape;
  v.branch = bind(tape, model.branch, trainable);
  v.branch_b = bind(tape, model.branch_b, trainable);
  v.trunk = bind(tape, model.trunk, trainable);
  v.pinn = bind(tape, model.pinn, trainable);
  for (const MlpVars* net : {&v.branch, &v.branch_b, &v.trunk, &v.pinn}) {
    for (std::size_t l = 0; l < net->weights.size(); ++l) {
      v.params.push_back(net->weights[l]);
      v.params.push_back(net->biases[l]);
    }
  }
  if (model.is_deeponet()) {
    v.out_bias = trainable ? tape.variable(model.out_bias) : tape.constant(model.out_bias);
    v.params.push_back(v.out_bias);
  }
  return v;
}

TapePrediction forward(const OperatorVars& vars, const OperatorModel& model, const PointBatch& batch,
                       bool with_rate) {
  model.check_fitted();
  if (vars.tape == nullptr) throw GraphError("operator variables are not bound to a tape");
  if (batch.size() == 0) throw EmptyBatch("empty point batch");
  if (batch.branch_in.cols() != static_cast<Index>(model.spec.branch_input_dim())) {
    throw DimensionMismatch("point batch width does not match the model");
  }
  ad::Tape& tape = *vars.tape;
  const Normalization& norm = *model.norm;
  const MatrixXd in_n = norm.normalize_inputs(batch.branch_in);
  const RowVectorXd rate_scale = norm.state_std / norm.horizon;
  TapePrediction out;

  if (model.is_deeponet()) {
    ad::Var b;
    if (model.arch() == Arch::Unstacked) {
      b = forward(vars.branch, tape.constant(in_n));
    } else {
      b = forward(vars.branch, tape.constant(in_n.leftCols(kX0Dim))) *
          forward(vars.branch_b, tape.constant(in_n.rightCols(in_n.cols() - static_cast<Index>(kX0Dim))));
    }
    const ad::Var bg = ad::gather_rows(b, batch.branch_idx);
    const ad::Var tn = tape.constant(batch.times / norm.horizon);
    const auto blocks = static_cast<Index>(kStateDim);
    if (with_rate) {
      const VarPair tau = forward_tangent(vars.trunk, tn, tape.constant(MatrixXd::Ones(tn.rows(), 1)));
      const ad::Var s = ad::add_row(ad::block_sum(bg * ad::gather_rows(tau.value, batch.time_idx), blocks),
                                    vars.out_bias);
      out.state = ad::shift_cols(ad::scale_cols(s, norm.state_std), norm.state_mean);
      out.rate = ad::scale_cols(ad::block_sum(bg * ad::gather_rows(tau.tangent, batch.time_idx), blocks),
                                rate_scale);
    } else {
      const ad::Var tau = forward(vars.trunk, tn);
      const ad::Var s = ad::add_row(ad::block_sum(bg * ad::gather_rows(tau, batch.time_idx), blocks),
                                    vars.out_bias);
      out.state = ad::shift_cols(ad::scale_cols(s, norm.state_std), norm.state_mean);
    }
    return out;
  }

  const auto n = static_cast<Index>(batch.size());
  MatrixXd x(n, in_n.cols() + 1);
  for (Index i = 0; i < n; ++i) {
    x.row(i).head(in_n.cols()) = in_n.row(batch.branch_idx[static_cast<std::size_t>(i)]);
    x(i, in_n.cols()) = batch.times(batch.time_idx[static_cast<std::size_t>(i)]) / norm.horizon;
  }
  if (with_rate) {
    MatrixXd xdot = MatrixXd::Zero(n, x.cols());
    xdot.col(x.cols() - 1).setOnes();
    const VarPair y = forward_tangent(vars.pinn, tape.constant(std::move(x)), tape.constant(std::move(xdot)));
    out.state = ad::shift_cols(ad::scale_cols(y.value, norm.state_std), norm.state_mean);
    out.rate = ad::scale_cols(y.tangent, rate_scale);
  } else {
    const ad::Var y = forward(vars.pinn, tape.constant(std::move(x)));
    out.state = ad::shift_cols(ad::scale_cols(y, norm.state_std), norm.state_mean);
  }
  return out;
}

MatrixXd predict_points(const OperatorModel& model, const PointBatch& batch, MatrixXd* rate) {
  ad::Tape tape;
  const OperatorVars vars = bind(tape, model, false);
  const TapePrediction p = forward(vars, model, batch, rate != nullptr);
  if (rate != nullptr) *rate = p.rate.value();
  return p.state.value();
}

}  // namespace pidon
