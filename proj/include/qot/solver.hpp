#ifndef QOT_SOLVER_HPP
#define QOT_SOLVER_HPP

#include <functional>
#include <vector>

#include "qot/config.hpp"
#include "qot/cost.hpp"
#include "qot/measure.hpp"
#include "qot/symmat.hpp"

namespace qot {

/// Dual potentials. For a hard marginal (rho = +inf) the potential is kept
/// pre-scaled, i.e. it enters the kernel with coefficient 1.
struct DualState {
  std::vector<SymMat> u;
  std::vector<SymMat> v;
  std::vector<double> alpha;
  std::vector<double> beta;

  static DualState zeros(std::size_t rows, std::size_t cols, int dim);
};

struct SolveReport {
  int iterations = 0;
  /// Per iteration: sup-norm fixed-point residual of v (and of the beta
  /// equation in trace mode), i.e. the change of v divided by tau2.
  std::vector<double> residual_history;
  bool converged = false;
  /// True when an iterate became non-finite; the solve stopped there.
  bool diverged = false;
  double primal_value = 0.0;
  double dual_value = 0.0;
};

struct SolveResult {
  Coupling coupling;
  DualState state;
  SolveReport report;
};

/// Called after every full (u, v) iteration with the 1-based iteration index.
using IterationObserver = std::function<void(int, const DualState&)>;

/// Relaxed alternating fixed-point iterations on the matrix dual (with the
/// trace multipliers when cfg.trace_constrained is set). Stops when
/// the v residual (sup-norm change of v over tau2) falls below cfg.tol or after cfg.max_iter
/// iterations (then report.converged is false). Throws std::invalid_argument
/// on shape or dimension mismatches.
SolveResult sinkhorn_solve(const TensorMeasure& mu, const TensorMeasure& nu,
                           const GroundCost& cost, const SolverConfig& cfg,
                           const IterationObserver& observer = {});

/// Same loop with the scalar trace multipliers alpha, beta enforcing
/// sum_j tr g_ij = tr mu_i and sum_i tr g_ij = tr nu_j.
SolveResult sinkhorn_solve_trace(const TensorMeasure& mu, const TensorMeasure& nu,
                                 const GroundCost& cost, const SolverConfig& cfg,
                                 const IterationObserver& observer = {});

double dual_objective(const DualState& state, const TensorMeasure& mu, const TensorMeasure& nu,
                      const GroundCost& cost, const SolverConfig& cfg);

/// Largest entry-wise deviation from the unrelaxed fixed-point equations.
double fixed_point_residual(const DualState& state, const TensorMeasure& mu,
                            const TensorMeasure& nu, const GroundCost& cost,
                            const SolverConfig& cfg);

/// g_ij = exp(K(u, v, alpha, beta)_ij).
Coupling coupling_from_state(const DualState& state, const GroundCost& cost,
                             const SolverConfig& cfg);

}  // namespace qot

#endif  // QOT_SOLVER_HPP
