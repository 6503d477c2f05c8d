#include <doctest.h>

#include <cmath>
#include <fstream>

#include "pidon/errors.hpp"
#include "pidon/training.hpp"
#include "support.hpp"

using namespace pidon;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
namespace fs = std::filesystem;

namespace {

Normalization identity_norm(std::size_t m) {
  const auto d = static_cast<Eigen::Index>(kX0Dim + 2 * m);
  return {RowVectorXd::Zero(d), RowVectorXd::Ones(d), RowVectorXd::Zero(4), RowVectorXd::Ones(4), 1.0};
}

/// Model whose prediction is `value` at every input and time.
OperatorModel constant_model(std::size_t m, const std::array<double, 4>& value) {
  ModelSpec spec;
  spec.sensors = m;
  spec.latent = 8;
  spec.hidden = {4};
  OperatorModel model = OperatorModel::create(spec);
  model.branch.layers().back().weight.setZero();
  model.branch.layers().back().bias.setZero();
  model.norm = identity_norm(m);
  for (int j = 0; j < 4; ++j) model.out_bias(0, j) = value[static_cast<std::size_t>(j)];
  return model;
}

OperatorModel small_model(std::size_t m, std::uint64_t seed) {
  ModelSpec spec;
  spec.sensors = m;
  spec.latent = 8;
  spec.hidden = {12, 12};
  spec.seed = seed;
  return OperatorModel::create(spec);
}

/// One-trajectory dataset held at the given state with constant bus inputs.
LabeledDataset steady_dataset(const SmState& x, const ExogenousInputs& u, const BusVoltage& bus,
                              std::size_t m, std::size_t n_t) {
  LabeledDataset ds;
  ds.inputs.n = 1;
  ds.inputs.m = m;
  ds.inputs.x0 = {x.delta, x.omega, x.Ed_p, x.Eq_p, u.Rf, u.Vr, u.Efd, u.Psv, u.Pm};
  for (const SignalDescriptor& d : {test::constant_signal(bus.Vs), test::constant_signal(bus.theta_vs)}) {
    const auto packed = d.pack();
    ds.inputs.signals.insert(ds.inputs.signals.end(), packed.begin(), packed.end());
  }
  for (std::size_t k = 0; k < m; ++k) ds.inputs.sensor_times.push_back(static_cast<double>(k) / static_cast<double>(m - 1));
  ds.inputs.sensors.assign(m, bus.Vs);
  ds.inputs.sensors.insert(ds.inputs.sensors.end(), m, bus.theta_vs);
  for (std::size_t k = 0; k < n_t; ++k) {
    ds.times.push_back(static_cast<double>(k) / static_cast<double>(n_t - 1));
    for (double v : to_array(x)) ds.states.push_back(v);
  }
  return ds;
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

struct SmallData {
  DomainSpec domain;
  LabeledDataset train;
  LabeledDataset val;
  CollocationDataset colloc;
};

SmallData small_data(std::uint64_t seed = 5) {
  SmallData d;
  d.domain = test::small_domain(seed);
  d.domain.solver.eval_dt = 0.1;
  d.train = generate_labeled(d.domain, Split::Train);
  d.val = generate_labeled(d.domain, Split::Validation);
  d.colloc = generate_collocation(d.domain);
  return d;
}

std::vector<MatrixXd> gradients(const OperatorModel& model, const LabeledPoints& lp, const CollocationPoints& cp,
                                const TrainConfig& cfg) {
  ad::Tape tape;
  const OperatorVars vars = bind(tape, model);
  const std::vector<int> li = all_indices(lp.size());
  const std::vector<int> ci = all_indices(cp.size());
  tape.backward(total_loss(vars, model, lp, li, &cp, ci, cfg).total);
  std::vector<MatrixXd> g;
  for (const ad::Var& p : vars.params) g.push_back(tape.grad(p));
  return g;
}

}  // namespace

// -- losses -----------------------------------------------------------------

TEST_CASE("loss_data: examples") {
  const std::array<double, 4> c{0.3, -0.2, 1.0, 0.1};
  OperatorModel model = constant_model(2, c);
  LabeledDataset ds = steady_dataset(state_from(c.data()), ExogenousInputs{}, BusVoltage{}, 2, 5);
  SUBCASE("perfect predictions") {
    CHECK(loss_data(model, labeled_points(ds, SmParams::textbook())) == 0.0);
  }
  SUBCASE("unit offset in normalized units") {
    model.norm->state_std << 2.0, 0.5, 3.0, 0.25;
    model.norm->state_mean = Eigen::Map<const RowVectorXd>(c.data(), 4);
    model.out_bias.setZero();
    for (std::size_t i = 0; i < ds.states.size(); ++i) ds.states[i] -= model.norm->state_std(static_cast<Eigen::Index>(i % 4));
    CHECK(loss_data(model, labeled_points(ds, SmParams::textbook())) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("mean over points") {
    ds = steady_dataset(state_from(c.data()), ExogenousInputs{}, BusVoltage{}, 2, 2);
    for (std::size_t j = 0; j < 4; ++j) ds.states[4 + j] += std::sqrt(2.0);
    CHECK(loss_data(model, labeled_points(ds, SmParams::textbook())) == doctest::Approx(1.0).epsilon(1e-14));
  }
  LabeledPoints empty = labeled_points(ds, SmParams::textbook());
  empty.rows.clear();
  CHECK_THROWS_AS(loss_data(model, empty), EmptyBatch);
}

TEST_CASE("loss_phys_data: examples") {
  const SmParams p = SmParams::textbook();
  const ExogenousInputs u{};
  const BusVoltage bus{};
  const SmState eq = test::newton_equilibrium(u, bus, p);
  LabeledDataset ds = steady_dataset(eq, u, bus, 3, 11);
  const LabeledPoints lp = labeled_points(ds, p);
  CHECK(lp.source.cwiseAbs().maxCoeff() < 1e-12);
  SUBCASE("time-independent model on equilibrium labels") {
    CHECK(loss_phys_data(constant_model(3, to_array(eq)), lp) < 1e-24);
  }
  SUBCASE("constant residual r gives r squared") {
    LabeledPoints shifted = lp;
    shifted.source.setConstant(-0.7);
    CHECK(loss_phys_data(constant_model(3, to_array(eq)), shifted) == doctest::Approx(0.49).epsilon(1e-14));
  }
  SUBCASE("random model: mean squared rate") {
    OperatorModel model = small_model(3, 9);
    model.norm = identity_norm(3);
    model.norm->state_std << 0.5, 2.0, 1.0, 3.0;
    MatrixXd rate;
    predict_points(model, make_point_batch(ds.inputs, lp.rows, lp.times), &rate);
    CHECK(rate.cwiseAbs().maxCoeff() > 1e-3);
    CHECK(loss_phys_data(model, lp) == doctest::Approx(rate.array().square().mean()).epsilon(1e-10));
  }
}

TEST_CASE("loss_phys_colloc: examples") {
  const SmParams p = SmParams::textbook();
  const ExogenousInputs u{};
  const BusVoltage bus{1.02, 0.05};
  const SmState eq = test::newton_equilibrium(u, bus, p);
  const LabeledDataset ds = steady_dataset(eq, u, bus, 3, 7);
  SUBCASE("equilibrium constant model") {
    CHECK(loss_phys_colloc(constant_model(3, to_array(eq)), collocation_points(ds, p)) < 1e-24);
  }
  SUBCASE("labels equal to the predictions reproduce loss_phys_data") {
    OperatorModel model = small_model(3, 13);
    model.norm = identity_norm(3);
    LabeledDataset own = ds;
    own.states = predict_grid(model, own.inputs, own.times);
    const double colloc = loss_phys_colloc(model, collocation_points(own, p));
    CHECK(colloc > 0.0);
    CHECK(loss_phys_data(model, labeled_points(own, p)) == doctest::Approx(colloc).epsilon(1e-12));
  }
  SUBCASE("single point, pinned tiny model") {
    ModelSpec spec;
    spec.sensors = 2;
    spec.latent = 4;
    spec.hidden = {3};
    spec.seed = 77;
    OperatorModel model = OperatorModel::create(spec);
    model.norm = identity_norm(2);
    model.out_bias << 0.4, 0.0, 1.0, 0.05;
    for (auto& l : model.branch.layers()) l.bias.setConstant(0.3);
    for (auto& l : model.trunk.layers()) l.bias.setConstant(-0.2);
    LabeledDataset one = steady_dataset(eq, u, bus, 2, 2);
    one.times = {0.25};
    one.states.resize(4);
    const CollocationPoints cp = collocation_points(one, p);
    // Hand evaluation: rate from forward mode, right-hand side at the prediction.
    const StateRate sr = operator_forward_dt(model, one.inputs.x0_row(0), one.inputs.sensor_row(0), 0.25);
    const auto f = to_array(sm_rhs(state_from(sr.state.data()), u, bus, p));
    double hand = 0.0;
    for (std::size_t j = 0; j < 4; ++j) hand += (sr.rate[j] - f[j]) * (sr.rate[j] - f[j]) / 4.0;
    const double value = loss_phys_colloc(model, cp);
    CHECK(value == doctest::Approx(hand).epsilon(1e-13));
    CHECK(value == doctest::Approx(194.30542705654526).epsilon(1e-12));
  }
}

TEST_CASE("total_loss: weighting") {
  const SmallData d = small_data();
  OperatorModel model = small_model(5, 3);
  model.norm = Normalization::fit(d.train);
  const LabeledPoints lp = labeled_points(d.train, d.domain.params);
  const CollocationPoints cp = collocation_points(d.colloc, d.domain.params);
  TrainConfig cfg;
  const LossComponents c = total_loss(model, lp, &cp, cfg);
  CHECK(c.data > 0.0);
  CHECK(c.phys_data > 0.0);
  CHECK(c.phys_colloc > 0.0);
  CHECK(c.total == doctest::Approx(c.data + 1e-3 * c.phys_data + 1e-4 * c.phys_colloc).epsilon(1e-14));
  TrainConfig zero = cfg;
  zero.lambda_pd = 0.0;
  zero.lambda_pc = 0.0;
  CHECK(total_loss(model, lp, &cp, zero).total == c.data);
  TrainConfig off = cfg;
  off.use_physics = false;
  CHECK(total_loss(model, lp, &cp, off).total == total_loss(model, lp, &cp, zero).total);
  CHECK(total_loss(model, lp, nullptr, zero).total == c.data);
}

TEST_CASE("total_loss: default weights on unit components") {
  // Components of exactly 1: unit normalized offset, unit rate residual at
  // labels and at collocation points.
  const SmParams p = SmParams::textbook();
  const SmState eq = test::newton_equilibrium(ExogenousInputs{}, BusVoltage{}, p);
  const std::array<double, 4> c = to_array(eq);
  OperatorModel model = constant_model(2, c);
  LabeledDataset ds = steady_dataset(eq, ExogenousInputs{}, BusVoltage{}, 2, 3);
  LabeledPoints lp = labeled_points(ds, p);
  lp.target.array() -= 1.0;
  lp.source.setConstant(1.0);
  const CollocationPoints cp = collocation_points(ds, p);
  const double pc = loss_phys_colloc(model, cp);
  CHECK(pc < 1e-24);
  TrainConfig cfg;
  const LossComponents parts = total_loss(model, lp, &cp, cfg);
  CHECK(parts.data == 1.0);
  CHECK(parts.phys_data == 1.0);
  CHECK(parts.total == doctest::Approx(1.0 + 1e-3 + 1e-4 * pc).epsilon(1e-15));
}

TEST_CASE("total_loss: gradients are linear in the weights") {
  const SmallData d = small_data();
  OperatorModel model = small_model(5, 4);
  model.norm = Normalization::fit(d.train);
  const LabeledPoints lp = labeled_points(d.train, d.domain.params);
  const CollocationPoints cp = collocation_points(d.colloc, d.domain.params);
  TrainConfig cfg;
  cfg.lambda_d = 0.7;
  cfg.lambda_pd = 0.02;
  cfg.lambda_pc = 0.003;
  auto only = [&](double ld, double lpd, double lpc) {
    TrainConfig c = cfg;
    c.lambda_d = ld;
    c.lambda_pd = lpd;
    c.lambda_pc = lpc;
    return gradients(model, lp, cp, c);
  };
  const auto total = gradients(model, lp, cp, cfg);
  const auto gd = only(1, 0, 0);
  const auto gpd = only(0, 1, 0);
  const auto gpc = only(0, 0, 1);
  for (std::size_t i = 0; i < total.size(); ++i) {
    const MatrixXd combo = cfg.lambda_d * gd[i] + cfg.lambda_pd * gpd[i] + cfg.lambda_pc * gpc[i];
    CHECK((total[i] - combo).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, combo.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("total_loss: recorded gradients match finite differences") {
  const SmallData d = small_data();
  OperatorModel model = small_model(5, 6);
  model.norm = Normalization::fit(d.train);
  const LabeledPoints lp = labeled_points(d.train, d.domain.params);
  const CollocationPoints cp = collocation_points(d.colloc, d.domain.params);
  TrainConfig cfg;
  cfg.lambda_pd = 0.01;
  cfg.lambda_pc = 0.01;
  const auto g = gradients(model, lp, cp, cfg);
  const std::vector<MatrixXd*> params = model.parameters();
  auto value = [&] { return total_loss(model, lp, &cp, cfg).total; };
  for (std::size_t i : {std::size_t{0}, params.size() / 2, params.size() - 1}) {
    CHECK(test::max_rel_error(g[i], test::fd_gradient(*params[i], value, 1e-6), 1e-6) < 1e-5);
  }
}

TEST_CASE("losses are non-negative") {
  const SmallData d = small_data(17);
  const LabeledPoints lp = labeled_points(d.val, d.domain.params);
  const CollocationPoints cp = collocation_points(d.colloc, d.domain.params);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    OperatorModel model = small_model(5, seed);
    model.norm = Normalization::fit(d.train);
    const LossComponents c = total_loss(model, lp, &cp, TrainConfig{});
    CHECK(c.data >= 0.0);
    CHECK(c.phys_data >= 0.0);
    CHECK(c.phys_colloc >= 0.0);
    CHECK(c.total >= 0.0);
  }
}

// -- optimizer ----------------------------------------------------------------

TEST_CASE("optimizer_step: examples") {
  TrainConfig cfg;
  MatrixXd theta(1, 2);
  theta << 0.5, 0.5;
  MatrixXd g(1, 2);
  g << 1.0, -2.0;
  std::vector<MatrixXd*> params{&theta};
  SUBCASE("zero gradients and no decay") {
    cfg.weight_decay = 0.0;
    AdamState s;
    const std::vector<MatrixXd> zero{MatrixXd::Zero(1, 2)};
    optimizer_step(params, zero, s, cfg);
    CHECK(theta(0, 0) == 0.5);
    CHECK(theta(0, 1) == 0.5);
  }
  SUBCASE("first step without decay") {
    cfg.weight_decay = 0.0;
    AdamState s;
    optimizer_step(params, std::vector<MatrixXd>{g}, s, cfg);
    CHECK(theta(0, 0) == doctest::Approx(0.49700000003).epsilon(1e-15));
    CHECK(theta(0, 1) == doctest::Approx(0.502999999985).epsilon(1e-15));
  }
  SUBCASE("first step with decay, then a zero gradient") {
    AdamState s;
    optimizer_step(params, std::vector<MatrixXd>{g}, s, cfg);
    CHECK(theta(0, 0) == doctest::Approx(0.49698500003).epsilon(1e-15));
    CHECK(theta(0, 1) == doctest::Approx(0.502984999985).epsilon(1e-15));
    optimizer_step(params, std::vector<MatrixXd>{MatrixXd::Zero(1, 2)}, s, cfg);
    CHECK(theta(0, 0) == doctest::Approx(0.49495991574602477).epsilon(1e-14));
    CHECK(theta(0, 1) == doctest::Approx(0.5049800851831925).epsilon(1e-14));
  }
  SUBCASE("decay only") {
    AdamState s;
    optimizer_step(params, std::vector<MatrixXd>{MatrixXd::Zero(1, 2)}, s, cfg);
    CHECK(theta(0, 0) == 0.5 * (1.0 - 3e-3 * 0.01));
  }
  SUBCASE("shape mismatch") {
    AdamState s;
    CHECK_THROWS_AS(optimizer_step(params, std::vector<MatrixXd>{MatrixXd::Zero(2, 1)}, s, cfg), ShapeMismatch);
    CHECK_THROWS_AS(optimizer_step(params, std::vector<MatrixXd>{}, s, cfg), ShapeMismatch);
  }
}

TEST_CASE("optimizer_step: a small step decreases the batch loss") {
  const SmallData d = small_data();
  const LabeledPoints lp = labeled_points(d.train, d.domain.params);
  const CollocationPoints cp = collocation_points(d.colloc, d.domain.params);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    OperatorModel model = small_model(5, seed);
    model.norm = Normalization::fit(d.train);
    TrainConfig cfg;
    cfg.lr = 1e-5;
    const double before = total_loss(model, lp, &cp, cfg).total;
    AdamState s;
    optimizer_step(model.parameters(), gradients(model, lp, cp, cfg), s, cfg);
    CHECK(total_loss(model, lp, &cp, cfg).total < before);
  }
}

// -- training loop -------------------------------------------------------------

TEST_CASE("train: zero epochs returns the initial model") {
  const SmallData d = small_data();
  const OperatorModel model = small_model(5, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train(model, {&d.train, &d.val, &d.colloc, d.domain.params}, cfg);
  CHECK(r.report.history.empty());
  CHECK(r.report.stopped_epoch == 0);
  const auto a = std::as_const(r.model).parameters();
  const auto b = model.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
}

TEST_CASE("train: constant validation loss stops after patience epochs") {
  const SmallData d = small_data();
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.patience = 7;
  cfg.lambda_d = 0.0;
  cfg.lambda_pd = 0.0;
  cfg.lambda_pc = 0.0;
  const TrainResult r = train(small_model(5, 1), {&d.train, &d.val, &d.colloc, d.domain.params}, cfg);
  CHECK(r.report.stopped_epoch == 8);
  CHECK(r.report.best_epoch == 1);
  CHECK(r.report.best_val == 0.0);
}

TEST_CASE("train: report bookkeeping and determinism") {
  const SmallData d = small_data();
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 64;
  cfg.seed = 3;
  std::size_t calls = 0;
  const TrainResult a =
      train(small_model(5, 2), {&d.train, &d.val, &d.colloc, d.domain.params}, cfg, [&](const EpochRecord&) { ++calls; });
  const TrainResult b = train(small_model(5, 2), {&d.train, &d.val, &d.colloc, d.domain.params}, cfg);
  CHECK(calls == a.report.history.size());
  REQUIRE(a.report.history.size() == b.report.history.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < a.report.history.size(); ++e) {
    const EpochRecord& x = a.report.history[e];
    const EpochRecord& y = b.report.history[e];
    CHECK(x.epoch == e + 1);
    CHECK(x.train.total == y.train.total);
    CHECK(x.val.total == y.val.total);
    CHECK(x.train.data >= 0.0);
    best = std::min(best, x.val.total);
  }
  CHECK(a.report.best_val == best);
  CHECK(a.report.history.front().train.data > a.report.history.back().train.data);
  const auto pa = std::as_const(a.model).parameters();
  const auto pb = std::as_const(b.model).parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
  // Best-on-validation weights are returned.
  const LabeledPoints vp = labeled_points(d.val, d.domain.params);
  const CollocationPoints vc = collocation_points(d.val, d.domain.params);
  CHECK(total_loss(a.model, vp, &vc, cfg).total == a.report.best_val);

  const fs::path dir = test::scratch_dir("train_report");
  a.report.write_csv(dir / "loss.csv");
  std::ifstream is(dir / "loss.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "epoch,L_data,L_pd,L_pc,total,val_total");
  std::size_t lines = 0;
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == a.report.history.size());
  const nlohmann::json j = a.report.to_json();
  CHECK(j.at("stopped_epoch") == a.report.stopped_epoch);
  CHECK(j.at("best_val") == a.report.best_val);
  fs::remove_all(dir);
}

TEST_CASE("train: fits a single trajectory") {
  DomainSpec d = test::small_domain(23);
  d.n_train = 1;
  d.solver.eval_dt = 1.0 / 49.0;
  const LabeledDataset one = generate_labeled(d, Split::Train);
  REQUIRE(one.n_points() == 50);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.use_physics = false;
  ModelSpec spec;
  spec.sensors = 5;
  const TrainResult r = train(OperatorModel::create(spec), {&one, &one, nullptr, d.params}, cfg);
  // The absolute target is checked by the acceptance suite.
  CHECK(r.report.stopped_epoch == 2000);
  CHECK(loss_data(r.model, labeled_points(one, d.params)) < 1e-2 * r.report.history.front().train.data);
}

TEST_CASE("train: errors") {
  const SmallData d = small_data();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(small_model(5, 1), {&d.train, &d.val, nullptr, d.domain.params}, cfg), InvalidArgument);
  CHECK_THROWS_AS(train(small_model(4, 1), {&d.train, &d.val, &d.colloc, d.domain.params}, cfg), DimensionMismatch);
  TrainConfig bad = cfg;
  bad.lr = 0.0;
  CHECK_THROWS_AS(train(small_model(5, 1), {&d.train, &d.val, &d.colloc, d.domain.params}, bad), InvalidArgument);
  bad = cfg;
  bad.lambda_pc = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  OperatorModel broken = small_model(5, 1);
  broken.norm = Normalization::fit(d.train);
  broken.norm->state_std.setZero();
  try {
    train(broken, {&d.train, &d.val, &d.colloc, d.domain.params}, cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.epoch() == 1);
  }
}
