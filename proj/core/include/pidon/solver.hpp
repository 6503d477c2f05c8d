#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pidon {

/// dx/dt = f(t, x). Implementations write into `dxdt`, which has the same size as `x`.
using VectorField = std::function<void(double t, std::span<const double> x, std::span<double> dxdt)>;

struct SolverConfig {
  double rtol{1e-6};
  double atol{1e-9};
  double h_init{0.0};  ///< 0 selects the initial step automatically
  double h_max{0.0};   ///< 0 means unbounded (capped by t_end)
  double t_end{1.0};
  double eval_dt{1e-3};

  /// Throws InvalidArgument; t_end must be an integer multiple of eval_dt.
  void validate() const;

  /// Number of output grid points, floor(t_end / eval_dt) + 1.
  std::size_t grid_size() const;
};

/// Uniform grid 0, eval_dt, ..., t_end.
std::vector<double> make_grid(const SolverConfig& cfg);

/// Row-major (grid-length x state-dim) solution on the output grid.
struct SolutionGrid {
  std::vector<double> times;
  std::vector<double> states;
  std::size_t dim{0};
  std::size_t n_rhs_evals{0};
  std::size_t n_accepted{0};
  std::size_t n_rejected{0};
  double wall_time{0.0};

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(states).subspan(i * dim, dim);
  }
  double at(std::size_t i, std::size_t j) const { return states[i * dim + j]; }
};

struct StepDecision {
  bool accept;
  double h_next;
};

/// Step-size controller: accept iff err_norm <= 1, next step
/// h * clamp(0.9 err_norm^(-1/5), 0.2, 5) capped at h_max (h_max <= 0: uncapped).
StepDecision step_accept(double err_norm, double h, double h_max = 0.0);

/// One accepted Dormand-Prince step, kept for dense output.
struct AcceptedStep {
  double t0;
  double h;
  std::vector<double> y0;
  std::vector<double> y1;
  std::array<std::vector<double>, 7> stages;  ///< derivative evaluations k1..k7

  /// Fourth-order continuous extension at t0 + theta h, theta in [0, 1].
  std::vector<double> interpolate(double theta) const;
};

/// Adaptive Dormand-Prince 5(4) with embedded error control and fourth-order
/// dense output onto the configuration's uniform grid.
///
/// Throws StepUnderflow if the controller asks for a step below 1e-14 and
/// NonFinite if the state leaves the finite range. If `steps` is non-null every
/// accepted step is appended to it.
SolutionGrid integrate(const VectorField& rhs, std::span<const double> x0, const SolverConfig& cfg,
                       std::vector<AcceptedStep>* steps = nullptr);

}  // namespace pidon
