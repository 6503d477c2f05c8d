#include "pidon/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "pidon/errors.hpp"
#include "pidon/sampling.hpp"

namespace pidon {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("train.lr must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train.weight_decay must be >= 0");
  if (patience < 1) throw InvalidArgument("train.patience must be >= 1");
  if (!(min_delta >= 0.0)) throw InvalidArgument("train.min_delta must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train.batch_size must be >= 1");
  if (!(lambda_d >= 0.0) || !(lambda_pd >= 0.0) || !(lambda_pc >= 0.0)) {
    throw InvalidArgument("train.lambda_* must be >= 0");
  }
}

namespace {

RowVectorXd drive_row(const InputBlock& in, std::size_t row, double t) {
  const auto x0 = in.x0_row(row);
  const auto ch = in.descriptors(row);
  RowVectorXd d(4);
  d << x0[8], x0[6], eval_signal(ch[0], t).y, eval_signal(ch[1], t).y;
  return d;
}

template <class Points>
void fill_grid(Points& pts, const InputBlock& in, const std::vector<double>& times) {
  const std::size_t n = in.n * times.size();
  pts.inputs = &in;
  pts.rows.resize(n);
  pts.times.resize(n);
  pts.drive.resize(static_cast<Index>(n), 4);
  for (std::size_t i = 0; i < in.n; ++i) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      const std::size_t p = i * times.size() + k;
      pts.rows[p] = static_cast<int>(i);
      pts.times[p] = times[k];
      pts.drive.row(static_cast<Index>(p)) = drive_row(in, i, times[k]);
    }
  }
}

}  // namespace

LabeledPoints labeled_points(const LabeledDataset& ds, const SmParams& params) {
  LabeledPoints pts;
  pts.params = params;
  fill_grid(pts, ds.inputs, ds.times);
  const auto n = static_cast<Index>(pts.size());
  pts.target.resize(n, 4);
  pts.source.resize(n, 4);
  for (Index p = 0; p < n; ++p) {
    const double* s = ds.states.data() + p * 4;
    const SmState x = state_from(s);
    const RowVectorXd d = pts.drive.row(p);
    const SmState f = sm_rhs<double>(x, d(0), d(1), d(2), d(3), params);
    pts.target.row(p) << s[0], s[1], s[2], s[3];
    pts.source.row(p) << f.delta, f.omega, f.Eq_p, f.Ed_p;
  }
  return pts;
}

CollocationPoints collocation_points(const LabeledDataset& ds, const SmParams& params) {
  CollocationPoints pts;
  pts.params = params;
  fill_grid(pts, ds.inputs, ds.times);
  return pts;
}

CollocationPoints collocation_points(const CollocationDataset& ds, const SmParams& params) {
  CollocationPoints pts;
  pts.params = params;
  pts.inputs = &ds.inputs;
  const std::size_t n = ds.n_points();
  pts.rows.resize(n);
  pts.times = ds.times;
  pts.drive.resize(static_cast<Index>(n), 4);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t row = p / ds.times_per_set;
    pts.rows[p] = static_cast<int>(row);
    pts.drive.row(static_cast<Index>(p)) = drive_row(ds.inputs, row, ds.times[p]);
  }
  return pts;
}

namespace {

template <class Points>
PointBatch batch_of(const Points& pts, std::span<const int> idx) {
  if (idx.empty()) throw EmptyBatch("empty batch");
  std::vector<int> rows(idx.size());
  std::vector<double> times(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto p = static_cast<std::size_t>(idx[i]);
    if (p >= pts.size()) throw DimensionMismatch("point index out of range");
    rows[i] = pts.rows[p];
    times[i] = pts.times[p];
  }
  return make_point_batch(*pts.inputs, rows, times);
}

MatrixXd gather(const MatrixXd& m, std::span<const int> idx) {
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

ad::Var data_term(const OperatorModel& model, const ad::Var& state, const MatrixXd& target) {
  ad::Tape& tape = *state.tape();
  const RowVectorXd inv_std = model.norm->state_std.cwiseInverse();
  return ad::mean(ad::square(ad::scale_cols(state - tape.constant(target), inv_std)));
}

ad::Var source_term(const ad::Var& rate, const MatrixXd& source) {
  return ad::mean(ad::square(rate - rate.tape()->constant(source)));
}

ad::Var colloc_term(const ad::Var& state, const ad::Var& rate, const MatrixXd& drive, const SmParams& params,
                    std::size_t n_points, std::size_t* skipped) {
  ad::Tape& tape = *state.tape();
  if (std::abs(StatorMatrix::from(params).determinant()) < kSingularThreshold) {
    // The stator matrix depends on the parameters only, so every point is singular.
    if (skipped != nullptr) *skipped += n_points;
    return tape.constant(MatrixXd::Zero(1, 1));
  }
  const StateOf<ad::Var> x{ad::col(state, 0), ad::col(state, 1), ad::col(state, 2), ad::col(state, 3)};
  const ad::Var Pm = tape.constant(drive.col(0));
  const ad::Var Efd = tape.constant(drive.col(1));
  const ad::Var Vs = tape.constant(drive.col(2));
  const ad::Var theta = tape.constant(drive.col(3));
  const StateOf<ad::Var> f = sm_rhs<ad::Var>(x, Pm, Efd, Vs, theta, params);
  const ad::Var residual = rate - ad::hstack({f.delta, f.omega, f.Eq_p, f.Ed_p});
  return ad::mean(ad::square(residual));
}

}  // namespace

ad::Var loss_data(const OperatorVars& vars, const OperatorModel& model, const LabeledPoints& pts,
                  std::span<const int> idx) {
  const TapePrediction pred = forward(vars, model, batch_of(pts, idx), false);
  return data_term(model, pred.state, gather(pts.target, idx));
}

ad::Var loss_phys_data(const OperatorVars& vars, const OperatorModel& model, const LabeledPoints& pts,
                       std::span<const int> idx) {
  const TapePrediction pred = forward(vars, model, batch_of(pts, idx), true);
  return source_term(pred.rate, gather(pts.source, idx));
}

ad::Var loss_phys_colloc(const OperatorVars& vars, const OperatorModel& model, const CollocationPoints& pts,
                         std::span<const int> idx, std::size_t* skipped) {
  const TapePrediction pred = forward(vars, model, batch_of(pts, idx), true);
  return colloc_term(pred.state, pred.rate, gather(pts.drive, idx), pts.params, idx.size(), skipped);
}

LossGraph total_loss(const OperatorVars& vars, const OperatorModel& model, const LabeledPoints& labeled,
                     std::span<const int> labeled_idx, const CollocationPoints* colloc,
                     std::span<const int> colloc_idx, const TrainConfig& cfg) {
  ad::Tape& tape = *vars.tape;
  LossGraph g;
  const ad::Var zero = tape.constant(MatrixXd::Zero(1, 1));
  const TapePrediction pred = forward(vars, model, batch_of(labeled, labeled_idx), cfg.use_physics);
  g.data = data_term(model, pred.state, gather(labeled.target, labeled_idx));
  g.total = g.data * cfg.lambda_d;
  g.phys_data = zero;
  g.phys_colloc = zero;
  if (cfg.use_physics) {
    g.phys_data = source_term(pred.rate, gather(labeled.source, labeled_idx));
    g.total = g.total + g.phys_data * cfg.lambda_pd;
    if (colloc != nullptr && !colloc_idx.empty()) {
      g.phys_colloc = loss_phys_colloc(vars, model, *colloc, colloc_idx, &g.skipped);
      g.total = g.total + g.phys_colloc * cfg.lambda_pc;
    }
  }
  return g;
}

namespace {

constexpr std::size_t kEvalChunk = 4096;

// Point-count weighted mean of a per-chunk loss.
template <class Points, class F>
double chunked_mean(const Points& pts, F&& chunk_loss) {
  if (pts.size() == 0) throw EmptyBatch("empty point set");
  double acc = 0.0;
  std::vector<int> idx;
  for (std::size_t start = 0; start < pts.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, pts.size() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), static_cast<int>(start));
    acc += chunk_loss(std::span<const int>(idx)) * static_cast<double>(n);
  }
  return acc / static_cast<double>(pts.size());
}

}  // namespace

double loss_data(const OperatorModel& model, const LabeledPoints& pts) {
  return chunked_mean(pts, [&](std::span<const int> idx) {
    ad::Tape tape;
    return loss_data(bind(tape, model, false), model, pts, idx).value()(0, 0);
  });
}

double loss_phys_data(const OperatorModel& model, const LabeledPoints& pts) {
  return chunked_mean(pts, [&](std::span<const int> idx) {
    ad::Tape tape;
    return loss_phys_data(bind(tape, model, false), model, pts, idx).value()(0, 0);
  });
}

double loss_phys_colloc(const OperatorModel& model, const CollocationPoints& pts, std::size_t* skipped) {
  return chunked_mean(pts, [&](std::span<const int> idx) {
    ad::Tape tape;
    return loss_phys_colloc(bind(tape, model, false), model, pts, idx, skipped).value()(0, 0);
  });
}

LossComponents total_loss(const OperatorModel& model, const LabeledPoints& labeled,
                          const CollocationPoints* colloc, const TrainConfig& cfg) {
  LossComponents c;
  c.data = chunked_mean(labeled, [&](std::span<const int> idx) {
    ad::Tape tape;
    const OperatorVars vars = bind(tape, model, false);
    const TapePrediction pred = forward(vars, model, batch_of(labeled, idx), false);
    return data_term(model, pred.state, gather(labeled.target, idx)).value()(0, 0);
  });
  c.total = cfg.lambda_d * c.data;
  if (cfg.use_physics) {
    c.phys_data = loss_phys_data(model, labeled);
    c.total += cfg.lambda_pd * c.phys_data;
    if (colloc != nullptr && colloc->size() > 0) {
      c.phys_colloc = loss_phys_colloc(model, *colloc, &c.skipped);
      c.total += cfg.lambda_pc * c.phys_colloc;
    }
  }
  return c;
}

void optimizer_step(std::span<MatrixXd* const> params, std::span<const MatrixXd> grads, AdamState& state,
                    const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeMismatch("parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const MatrixXd* p : params) {
      state.m.push_back(MatrixXd::Zero(p->rows(), p->cols()));
      state.v.push_back(MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("optimizer state does not match the parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols() ||
        state.m[i].rows() != params[i]->rows() || state.m[i].cols() != params[i]->cols()) {
      throw ShapeMismatch("gradient " + std::to_string(i) + " does not match its parameter");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    MatrixXd& p = *params[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grads[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grads[i].cwiseAbs2();
    p *= decay;
    p.array() -= cfg.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + kAdamEps);
  }
}

namespace {

json components_json(const LossComponents& c, bool physics) {
  json j{{"L_data", c.data}, {"total", c.total}};
  if (physics) {
    j["L_pd"] = c.phys_data;
    j["L_pc"] = c.phys_colloc;
    j["skipped"] = c.skipped;
  }
  return j;
}

// Fisher-Yates with an explicit uniform draw, independent of the standard
// library's distribution implementations.
void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

bool finite(const LossComponents& c) {
  return std::isfinite(c.data) && std::isfinite(c.phys_data) && std::isfinite(c.phys_colloc) &&
         std::isfinite(c.total);
}

}  // namespace

json TrainReport::to_json() const {
  json h = json::array();
  for (const EpochRecord& r : history) {
    h.push_back({{"epoch", r.epoch}, {"train", components_json(r.train, use_physics)},
                 {"val", components_json(r.val, use_physics)}});
  }
  return {{"history", h},
          {"stopped_epoch", stopped_epoch},
          {"best_epoch", best_epoch},
          {"best_val", best_val},
          {"wall_time", wall_time},
          {"skipped_collocation", skipped_collocation},
          {"use_physics", use_physics},
          {"warnings", warnings}};
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(17);
  os << (use_physics ? "epoch,L_data,L_pd,L_pc,total,val_total\n" : "epoch,L_data,total,val_total\n");
  for (const EpochRecord& r : history) {
    os << r.epoch << ',' << r.train.data << ',';
    if (use_physics) os << r.train.phys_data << ',' << r.train.phys_colloc << ',';
    os << r.train.total << ',' << r.val.total << '\n';
  }
  if (!os) throw IoError("cannot write " + path.string());
}

TrainResult train(OperatorModel model, const TrainingData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.train == nullptr || data.validation == nullptr) {
    throw InvalidArgument("training needs a training and a validation set");
  }
  if (cfg.use_physics && data.collocation == nullptr) {
    throw InvalidArgument("physics-informed training needs a collocation set");
  }
  for (const LabeledDataset* ds : {data.train, data.validation}) {
    if (ds->inputs.m != model.spec.sensors) throw DimensionMismatch("dataset sensor count does not match the model");
  }
  if (data.train->n_points() == 0 || data.validation->n_points() == 0) {
    throw EmptyDataset("training and validation sets must be nonempty");
  }
  const auto t0 = std::chrono::steady_clock::now();
  if (!model.norm) model.norm = Normalization::fit(*data.train);

  const LabeledPoints train_pts = labeled_points(*data.train, data.params);
  const LabeledPoints val_pts = labeled_points(*data.validation, data.params);
  CollocationPoints colloc_pts;
  CollocationPoints val_colloc;
  if (cfg.use_physics) {
    colloc_pts = collocation_points(*data.collocation, data.params);
    val_colloc = collocation_points(*data.validation, data.params);
  }

  TrainResult result{model, {}};
  TrainReport& report = result.report;
  report.use_physics = cfg.use_physics;
  report.best_val = std::numeric_limits<double>::infinity();
  AdamState opt;
  std::vector<int> order(train_pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> colloc_order(colloc_pts.size());
  std::iota(colloc_order.begin(), colloc_order.end(), 0);
  std::size_t colloc_cursor = colloc_order.size();
  std::mt19937_64 colloc_rng(mix_seed(cfg.seed, 0xc0110c));
  double stop_ref = std::numeric_limits<double>::infinity();
  std::size_t wait = 0;
  bool warned = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.seed, epoch));
    shuffle(order, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const int> lidx(order.data() + start, n);
      std::vector<int> cidx;
      if (cfg.use_physics && !colloc_order.empty()) {
        const std::size_t nc = std::min(cfg.batch_size, colloc_order.size());
        cidx.reserve(nc);
        while (cidx.size() < nc) {
          if (colloc_cursor == colloc_order.size()) {
            shuffle(colloc_order, colloc_rng);
            colloc_cursor = 0;
          }
          cidx.push_back(colloc_order[colloc_cursor++]);
        }
      }
      ad::Tape tape;
      const OperatorVars vars = bind(tape, result.model, true);
      const LossGraph g = total_loss(vars, result.model, train_pts, lidx, cfg.use_physics ? &colloc_pts : nullptr,
                                     cidx, cfg);
      const double w = static_cast<double>(n);
      rec.train.data += w * g.data.value()(0, 0);
      rec.train.phys_data += w * g.phys_data.value()(0, 0);
      rec.train.phys_colloc += w * g.phys_colloc.value()(0, 0);
      rec.train.total += w * g.total.value()(0, 0);
      rec.train.skipped += g.skipped;
      if (!std::isfinite(g.total.value()(0, 0))) throw NonFiniteLoss(epoch, "training loss");
      if (!warned && g.skipped * 1000 > cidx.size()) {
        report.warnings.push_back("epoch " + std::to_string(epoch) + ": " + std::to_string(g.skipped) + " of " +
                                  std::to_string(cidx.size()) + " collocation points skipped (singular stator system)");
        warned = true;
      }
      tape.backward(g.total);
      std::vector<MatrixXd> grads;
      grads.reserve(vars.params.size());
      for (const ad::Var& p : vars.params) grads.push_back(tape.grad(p));
      const std::vector<MatrixXd*> params = result.model.parameters();
      optimizer_step(params, grads, opt, cfg);
    }
    const double inv = 1.0 / static_cast<double>(order.size());
    rec.train.data *= inv;
    rec.train.phys_data *= inv;
    rec.train.phys_colloc *= inv;
    rec.train.total *= inv;
    report.skipped_collocation += rec.train.skipped;

    rec.val = total_loss(result.model, val_pts, cfg.use_physics ? &val_colloc : nullptr, cfg);
    if (!finite(rec.val)) throw NonFiniteLoss(epoch, "validation loss");
    report.history.push_back(rec);
    report.stopped_epoch = epoch;
    if (on_epoch) on_epoch(rec);

    if (rec.val.total < report.best_val) {
      report.best_val = rec.val.total;
      report.best_epoch = epoch;
      model = result.model;
    }
    if (rec.val.total < stop_ref - cfg.min_delta) {
      stop_ref = rec.val.total;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  if (report.history.empty()) report.best_val = 0.0;
  // Best-on-validation weights; without epochs this is the initial model.
  std::swap(result.model, model);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace pidon
