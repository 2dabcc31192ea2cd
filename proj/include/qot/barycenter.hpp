#ifndef QOT_BARYCENTER_HPP
#define QOT_BARYCENTER_HPP

#include <array>
#include <vector>

#include "qot/config.hpp"
#include "qot/cost.hpp"
#include "qot/measure.hpp"
#include "qot/solver.hpp"

namespace qot {

/// Weighted barycenter of L tensor measures on a fixed support, with a soft
/// (rho) fit to each input and a hard constraint towards the barycenter.
struct BarycenterProblem {
  std::vector<TensorMeasure> inputs;
  std::vector<double> weights;
  std::vector<Point> support;
  /// costs[l] is |I_l| x |support|.
  std::vector<GroundCost> costs;
  double rho = 1.0;

  /// Throws std::invalid_argument on shape errors, negative weights or
  /// weights not summing to 1 within 1e-12.
  void validate() const;
};

struct BarycenterResult {
  TensorMeasure barycenter;
  /// Per-input potentials; v[l] is pre-scaled (coefficient 1 in the kernel).
  std::vector<std::vector<SymMat>> u;
  std::vector<std::vector<SymMat>> v;
  SolveReport report;
};

/// Three-phase relaxed iterations: u-updates per input, the log-barycenter
/// aggregation, then v-updates per input. Uses cfg.eps, cfg.max_iter,
/// cfg.tol, cfg.relax and the optional cfg.tau1 / cfg.tau2; cfg.rho1 and
/// cfg.rho2 are ignored (rho comes from the problem, the second side is hard).
/// Stops once both the marginal gaps LSE_i - log nu_j and the change of
/// log nu fall below cfg.tol in sup-norm.
BarycenterResult barycenter_solve(const BarycenterProblem& prob, const SolverConfig& cfg);

/// e^{-energy / rho} exp(sum_l w_l log P_l).
PsdMat pointwise_barycenter(std::span<const PsdMat> tensors, std::span<const double> weights,
                            double energy, double rho);

/// ((1-t1)(1-t2), (1-t1) t2, t1 (1-t2), t1 t2); throws std::invalid_argument
/// outside [0, 1].
std::array<double, 4> bilinear_weights(double t1, double t2);

}  // namespace qot

#endif  // QOT_BARYCENTER_HPP
