#include "qot/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qot/parallel.hpp"

namespace qot {

DualState DualState::zeros(std::size_t rows, std::size_t cols, int dim) {
  DualState s;
  s.u.assign(rows, SymMat(dim));
  s.v.assign(cols, SymMat(dim));
  s.alpha.assign(rows, 0.0);
  s.beta.assign(cols, 0.0);
  return s;
}

void SolverConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("config: eps must be > 0");
  if (!(rho1 > 0.0) || !(rho2 > 0.0)) throw std::invalid_argument("config: rho must be > 0");
  if (!(tau(1) > 0.0) || !(tau(2) > 0.0) || !std::isfinite(tau(1)) || !std::isfinite(tau(2)))
    throw std::invalid_argument("config: tau must be finite and > 0");
  if (max_iter < 1) throw std::invalid_argument("config: max_iter must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("config: tol must be > 0");
  if (!(trace_damping > 0.0)) throw std::invalid_argument("config: trace_damping must be > 0");
}

namespace {

// Precomputed input data shared by the solver, the dual objective and the
// residual certificate.
struct Inputs {
  const TensorMeasure& mu;
  const TensorMeasure& nu;
  const GroundCost& cost;
  const SolverConfig& cfg;
  int dim;
  std::vector<SymMat> log_mu;
  std::vector<SymMat> log_nu;
  std::vector<double> log_tr_mu;
  std::vector<double> log_tr_nu;

  Inputs(const TensorMeasure& m, const TensorMeasure& n, const GroundCost& c,
         const SolverConfig& config)
      : mu(m), nu(n), cost(c), cfg(config), dim(m.tensor_dim()) {
    if (mu.size() == 0 || nu.size() == 0) throw std::invalid_argument("solver: empty measure");
    if (mu.tensor_dim() != nu.tensor_dim())
      throw std::invalid_argument("solver: mu and nu tensor dimensions differ");
    if (cost.rows() != mu.size() || cost.cols() != nu.size())
      throw std::invalid_argument("solver: cost shape does not match the measures");
    log_mu.reserve(mu.size());
    for (const PsdMat& p : mu.tensors()) {
      log_mu.push_back(log_sym(p));
      log_tr_mu.push_back(std::log(p.trace()));
    }
    log_nu.reserve(nu.size());
    for (const PsdMat& p : nu.tensors()) {
      log_nu.push_back(log_sym(p));
      log_tr_nu.push_back(std::log(p.trace()));
    }
  }

  SymMat entry(const DualState& s, std::size_t i, std::size_t j) const {
    return kernel_entry(s.u[i], s.v[j], s.alpha[i], s.beta[j], cost, i, j, cfg.eps, cfg.rho1,
                        cfg.rho2);
  }

  // Eigendecompositions of row i (over j) or column j (over i) of the kernel.
  void row_eigs(const DualState& s, std::size_t i, std::vector<EigenPair>& out) const {
    out.resize(nu.size());
    for (std::size_t j = 0; j < nu.size(); ++j) out[j] = eig_sym(entry(s, i, j));
  }
  void col_eigs(const DualState& s, std::size_t j, std::vector<EigenPair>& out) const {
    out.resize(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) out[i] = eig_sym(entry(s, i, j));
  }
};

// Relaxed assignment a <- (1 - tau) a + tau target for a finite penalty; for
// a hard marginal the pre-scaled potential moves by tau * eps * target.
void relax_into(SymMat& a, const SymMat& target, double tau, double rho, double eps) {
  if (std::isinf(rho)) {
    a.axpy(tau * eps, target);
  } else {
    a *= (1.0 - tau);
    a.axpy(tau, target);
  }
}

SolveResult run(const TensorMeasure& mu, const TensorMeasure& nu, const GroundCost& cost,
                const SolverConfig& cfg, bool trace_mode, const IterationObserver& observer) {
  cfg.validate();
  const Inputs in(mu, nu, cost, cfg);
  if (trace_mode) {
    for (double l : in.log_tr_mu)
      if (!std::isfinite(l)) throw std::invalid_argument("solver: trace mode needs tr(mu_i) > 0");
    for (double l : in.log_tr_nu)
      if (!std::isfinite(l)) throw std::invalid_argument("solver: trace mode needs tr(nu_j) > 0");
    // Summing either family of constraints gives the total trace of the
    // coupling, so they can only hold together for balanced inputs.
    double total_mu = 0.0, total_nu = 0.0;
    for (const PsdMat& m : mu.tensors()) total_mu += m.trace();
    for (const PsdMat& n : nu.tensors()) total_nu += n.trace();
    if (std::abs(total_mu - total_nu) > 1e-8 * std::max(total_mu, total_nu))
      throw std::invalid_argument("solver: trace mode needs equal total traces of mu and nu");
  }
  const std::size_t rows = mu.size(), cols = nu.size();
  const double tau1 = cfg.tau(1), tau2 = cfg.tau(2);
  const double damp = cfg.trace_damping * cfg.eps;

  DualState s = DualState::zeros(rows, cols, in.dim);
  SolveReport report;
  std::vector<double> change(cols, 0.0);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    parallel_for(rows, cols, [&](std::size_t i) {
      std::vector<EigenPair> eigs;
      in.row_eigs(s, i, eigs);
      SymMat target = lse_reduce_eig(eigs);
      target -= in.log_mu[i];
      relax_into(s.u[i], target, tau1, cfg.rho1, cfg.eps);
      if (trace_mode) {
        in.row_eigs(s, i, eigs);
        s.alpha[i] += damp * (lste_reduce_eig(eigs) - in.log_tr_mu[i]);
      }
    });
    parallel_for(cols, rows, [&](std::size_t j) {
      std::vector<EigenPair> eigs;
      in.col_eigs(s, j, eigs);
      SymMat target = lse_reduce_eig(eigs);
      target -= in.log_nu[j];
      // Fixed-point residual of v against the fresh u; the change of v is
      // this times tau2 (times eps for a hard marginal).
      double delta = std::isinf(cfg.rho2) ? target.max_abs() : (target - s.v[j]).max_abs();
      relax_into(s.v[j], target, tau2, cfg.rho2, cfg.eps);
      if (trace_mode) {
        in.col_eigs(s, j, eigs);
        const double gap = lste_reduce_eig(eigs) - in.log_tr_nu[j];
        s.beta[j] += damp * gap;
        delta = std::max(delta, std::abs(gap));
      }
      change[j] = std::isfinite(delta) ? delta : std::numeric_limits<double>::infinity();
    });

    const double residual = *std::max_element(change.begin(), change.end());
    report.iterations = it;
    report.residual_history.push_back(residual);
    bool finite = std::isfinite(residual);
    for (std::size_t i = 0; finite && i < rows; ++i)
      finite = s.u[i].all_finite() && std::isfinite(s.alpha[i]);
    if (observer) observer(it, s);
    if (!finite) {
      report.diverged = true;
      break;
    }
    if (residual < cfg.tol) {
      report.converged = true;
      break;
    }
  }

  SolveResult result;
  if (report.diverged) {
    report.primal_value = std::numeric_limits<double>::quiet_NaN();
    report.dual_value = std::numeric_limits<double>::quiet_NaN();
    result.coupling =
        Coupling(rows, cols, std::vector<PsdMat>(rows * cols, PsdMat::assume(SymMat(in.dim))));
  } else {
    result.coupling = coupling_from_state(s, cost, cfg);
    report.primal_value = primal_objective(result.coupling, mu, nu, cost, cfg);
    report.dual_value = dual_objective(s, mu, nu, cost, cfg);
  }
  result.state = std::move(s);
  result.report = std::move(report);
  return result;
}

void check_state(const DualState& s, const TensorMeasure& mu, const TensorMeasure& nu) {
  if (s.u.size() != mu.size() || s.v.size() != nu.size() || s.alpha.size() != mu.size() ||
      s.beta.size() != nu.size())
    throw std::invalid_argument("dual state shape does not match the measures");
}

}  // namespace

SolveResult sinkhorn_solve(const TensorMeasure& mu, const TensorMeasure& nu,
                           const GroundCost& cost, const SolverConfig& cfg,
                           const IterationObserver& observer) {
  return run(mu, nu, cost, cfg, cfg.trace_constrained, observer);
}

SolveResult sinkhorn_solve_trace(const TensorMeasure& mu, const TensorMeasure& nu,
                                 const GroundCost& cost, const SolverConfig& cfg,
                                 const IterationObserver& observer) {
  return run(mu, nu, cost, cfg, true, observer);
}

Coupling coupling_from_state(const DualState& state, const GroundCost& cost,
                             const SolverConfig& cfg) {
  const std::size_t rows = state.u.size(), cols = state.v.size();
  std::vector<PsdMat> entries(rows * cols);
  parallel_for(rows, cols, [&](std::size_t i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const SymMat k = kernel_entry(state.u[i], state.v[j], state.alpha[i], state.beta[j], cost,
                                    i, j, cfg.eps, cfg.rho1, cfg.rho2);
      const EigenPair e = eig_sym(k);
      entries[i * cols + j] =
          PsdMat::assume(spectral_apply(e, [](double x) { return std::exp(x); }));
    }
  });
  return Coupling(rows, cols, std::move(entries));
}

double dual_objective(const DualState& state, const TensorMeasure& mu, const TensorMeasure& nu,
                      const GroundCost& cost, const SolverConfig& cfg) {
  check_state(state, mu, nu);
  const Inputs in(mu, nu, cost, cfg);
  auto side = [&](const std::vector<SymMat>& pot, const std::vector<SymMat>& logs,
                  const std::vector<PsdMat>& tensors, double rho) {
    double acc = 0.0;
    for (std::size_t k = 0; k < pot.size(); ++k) {
      if (std::isinf(rho)) {
        const SymMat& p = pot[k];
        for (int r = 0; r < in.dim; ++r)
          for (int c = 0; c < in.dim; ++c) acc += tensors[k].mat()(r, c) * p(r, c);
      } else {
        acc += rho * (exp_sym(pot[k] + logs[k]).trace() - tensors[k].trace());
      }
    }
    return acc;
  };
  double total = side(state.u, in.log_mu, mu.tensors(), cfg.rho1);
  total += side(state.v, in.log_nu, nu.tensors(), cfg.rho2);
  double mass = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) mass += exp_sym(in.entry(state, i, j)).trace();
  total += cfg.eps * mass;
  for (std::size_t i = 0; i < mu.size(); ++i) total += state.alpha[i] * mu.tensors()[i].trace();
  for (std::size_t j = 0; j < nu.size(); ++j) total += state.beta[j] * nu.tensors()[j].trace();
  return -total;
}

double fixed_point_residual(const DualState& state, const TensorMeasure& mu,
                            const TensorMeasure& nu, const GroundCost& cost,
                            const SolverConfig& cfg) {
  check_state(state, mu, nu);
  const Inputs in(mu, nu, cost, cfg);
  // For a hard marginal the fixed point is LSE = log(target); the residual
  // measures that mismatch directly.
  auto deviation = [&](const SymMat& pot, const SymMat& lse, const SymMat& log_target,
                       double rho) {
    SymMat target = lse - log_target;
    if (std::isinf(rho)) return target.max_abs();
    return (pot - target).max_abs();
  };
  double worst = 0.0;
  std::vector<EigenPair> eigs;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    in.row_eigs(state, i, eigs);
    worst = std::max(worst, deviation(state.u[i], lse_reduce_eig(eigs), in.log_mu[i], cfg.rho1));
    if (cfg.trace_constrained)
      worst = std::max(worst, std::abs(lste_reduce_eig(eigs) - in.log_tr_mu[i]));
  }
  for (std::size_t j = 0; j < nu.size(); ++j) {
    in.col_eigs(state, j, eigs);
    worst = std::max(worst, deviation(state.v[j], lse_reduce_eig(eigs), in.log_nu[j], cfg.rho2));
    if (cfg.trace_constrained)
      worst = std::max(worst, std::abs(lste_reduce_eig(eigs) - in.log_tr_nu[j]));
  }
  return worst;
}

}  // namespace qot
