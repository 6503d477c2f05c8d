#include "pidon/solver.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <string>

#include "pidon/errors.hpp"

namespace pidon {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 6> kC{0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0};
constexpr double kA[6][5] = {
    {0, 0, 0, 0, 0},
    {1.0 / 5.0, 0, 0, 0, 0},
    {3.0 / 40.0, 9.0 / 40.0, 0, 0, 0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0, 0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
};
constexpr std::array<double, 6> kB{35.0 / 384.0,     0.0, 500.0 / 1113.0, 125.0 / 192.0,
                                   -2187.0 / 6784.0, 11.0 / 84.0};
// Fifth-order minus embedded fourth-order weights, over all seven stages.
constexpr std::array<double, 7> kE{-71.0 / 57600.0,  0.0,           71.0 / 16695.0, -71.0 / 1920.0,
                                   17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0};
// Fourth-order continuous extension (Shampine): coefficients of theta^1..theta^4.
constexpr double kP[7][4] = {
    {1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0},
    {0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0},
    {0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0},
    {0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0},
    {0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0},
};

constexpr double kMinStep = 1e-14;
constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

double rms_norm(std::span<const double> v, std::span<const double> scale) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] / scale[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Initial step heuristic (Hairer, Norsett & Wanner, II.4).
double initial_step(const VectorField& rhs, double t0, std::span<const double> y0,
                    std::span<const double> f0, const SolverConfig& cfg, std::size_t& n_evals) {
  const std::size_t n = y0.size();
  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) scale[i] = cfg.atol + std::abs(y0[i]) * cfg.rtol;
  const double d0 = rms_norm(y0, scale);
  const double d1 = rms_norm(f0, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, cfg.t_end - t0);

  std::vector<double> y1(n), f1(n);
  for (std::size_t i = 0; i < n; ++i) y1[i] = y0[i] + h0 * f0[i];
  rhs(t0 + h0, y1, f1);
  ++n_evals;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = f1[i] - f0[i];
  const double d2 = rms_norm(diff, scale) / h0;

  const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                 : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  return std::min({100.0 * h0, h1, cfg.t_end - t0});
}

std::array<double, 7> dense_weights(double theta) {
  std::array<double, 7> w{};
  for (int j = 0; j < 7; ++j) {
    double th = theta;
    double acc = 0.0;
    for (int p = 0; p < 4; ++p) {
      acc += kP[j][p] * th;
      th *= theta;
    }
    w[static_cast<std::size_t>(j)] = acc;
  }
  return w;
}

}  // namespace

std::vector<double> AcceptedStep::interpolate(double theta) const {
  const std::array<double, 7> w = dense_weights(theta);
  std::vector<double> y(y0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 7; ++j) acc += w[j] * stages[j][i];
    y[i] += h * acc;
  }
  return y;
}

void SolverConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw InvalidArgument("solver tolerances must be > 0");
  if (!(t_end > 0.0)) throw InvalidArgument("solver t_end must be > 0");
  if (!(eval_dt > 0.0) || eval_dt > t_end) {
    throw InvalidArgument("solver eval_dt must satisfy 0 < eval_dt <= t_end");
  }
  if (h_init < 0.0 || h_max < 0.0) throw InvalidArgument("solver steps must be >= 0");
  const double ratio = t_end / eval_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw InvalidArgument("solver t_end must be an integer multiple of eval_dt");
  }
}

std::size_t SolverConfig::grid_size() const {
  return static_cast<std::size_t>(std::floor(t_end / eval_dt + 1e-9)) + 1;
}

std::vector<double> make_grid(const SolverConfig& cfg) {
  const std::size_t n = cfg.grid_size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) * cfg.eval_dt;
  t.back() = cfg.t_end;
  return t;
}

StepDecision step_accept(double err_norm, double h, double h_max) {
  const double factor =
      err_norm == 0.0 ? kMaxFactor
                      : std::clamp(kSafety * std::pow(err_norm, -1.0 / 5.0), kMinFactor, kMaxFactor);
  double next = h * factor;
  if (h_max > 0.0) next = std::min(next, h_max);
  return {err_norm <= 1.0, next};
}

SolutionGrid integrate(const VectorField& rhs, std::span<const double> x0, const SolverConfig& cfg,
                       std::vector<AcceptedStep>* steps) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = x0.size();

  SolutionGrid out;
  out.dim = n;
  out.times = make_grid(cfg);
  out.states.assign(out.times.size() * n, 0.0);

  std::vector<double> y(x0.begin(), x0.end());
  if (!all_finite(y)) throw NonFinite("initial state is not finite");
  std::array<std::vector<double>, 7> k;
  for (auto& ki : k) ki.assign(n, 0.0);
  std::vector<double> y_stage(n), y_new(n), err(n), scale(n);

  double t = 0.0;
  rhs(t, y, k[0]);
  ++out.n_rhs_evals;

  double h = cfg.h_init > 0.0 ? cfg.h_init : initial_step(rhs, t, y, k[0], cfg, out.n_rhs_evals);
  if (cfg.h_max > 0.0) h = std::min(h, cfg.h_max);

  std::copy(y.begin(), y.end(), out.states.begin());
  std::size_t next_out = 1;

  while (t < cfg.t_end) {
    if (h < kMinStep) throw StepUnderflow("required step fell below 1e-14 at t = " + std::to_string(t));
    const bool last = t + h >= cfg.t_end;
    const double h_step = last ? cfg.t_end - t : h;

    for (int s = 1; s < 6; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < s; ++j) acc += kA[s][j] * k[j][i];
        y_stage[i] = y[i] + h_step * acc;
      }
      rhs(t + kC[s] * h_step, y_stage, k[s]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 6; ++j) acc += kB[j] * k[j][i];
      y_new[i] = y[i] + h_step * acc;
    }
    const double t_new = last ? cfg.t_end : t + h_step;
    rhs(t_new, y_new, k[6]);
    out.n_rhs_evals += 6;

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 7; ++j) acc += kE[j] * k[j][i];
      err[i] = h_step * acc;
      scale[i] = cfg.atol + std::max(std::abs(y[i]), std::abs(y_new[i])) * cfg.rtol;
    }
    const double err_norm = rms_norm(err, scale);
    if (!std::isfinite(err_norm)) {
      // Overflowing trial steps are retried smaller; only accepted states must stay finite.
      h = h_step * kMinFactor;
      ++out.n_rejected;
      continue;
    }
    const StepDecision decision = step_accept(err_norm, h_step, cfg.h_max);
    if (!decision.accept) {
      h = decision.h_next;
      ++out.n_rejected;
      continue;
    }
    if (!all_finite(y_new)) throw NonFinite("state left the finite range at t = " + std::to_string(t_new));

    // Dense output for grid points inside (t, t_new].
    while (next_out < out.times.size() && out.times[next_out] <= t_new) {
      const double theta = (out.times[next_out] - t) / h_step;
      double* dst = out.states.data() + next_out * n;
      if (out.times[next_out] == t_new) {
        std::copy(y_new.begin(), y_new.end(), dst);
      } else {
        const std::array<double, 7> w = dense_weights(theta);
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (int j = 0; j < 7; ++j) acc += w[static_cast<std::size_t>(j)] * k[j][i];
          dst[i] = y[i] + h_step * acc;
        }
      }
      ++next_out;
    }

    if (steps != nullptr) steps->push_back({t, h_step, y, y_new, k});
    ++out.n_accepted;
    t = t_new;
    std::swap(y, y_new);
    std::swap(k[0], k[6]);
    h = decision.h_next;
  }

  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace pidon
