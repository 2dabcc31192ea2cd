#include "qot/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qot/parallel.hpp"

namespace qot {

void BarycenterProblem::validate() const {
  if (inputs.empty()) throw std::invalid_argument("barycenter: at least one input required");
  if (weights.size() != inputs.size() || costs.size() != inputs.size())
    throw std::invalid_argument("barycenter: inputs, weights and costs differ in length");
  if (support.empty()) throw std::invalid_argument("barycenter: empty support");
  if (!(rho > 0.0) || std::isinf(rho)) throw std::invalid_argument("barycenter: rho must be finite and > 0");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("barycenter: weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("barycenter: weights must sum to 1");
  const int d = inputs.front().tensor_dim();
  for (std::size_t l = 0; l < inputs.size(); ++l) {
    if (inputs[l].tensor_dim() != d)
      throw std::invalid_argument("barycenter: input " + std::to_string(l) +
                                  " has a different tensor dimension");
    if (costs[l].rows() != inputs[l].size() || costs[l].cols() != support.size())
      throw std::invalid_argument("barycenter: cost " + std::to_string(l) + " has the wrong shape");
  }
}

BarycenterResult barycenter_solve(const BarycenterProblem& prob, const SolverConfig& cfg) {
  prob.validate();
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("barycenter: eps must be > 0");
  if (cfg.max_iter < 1) throw std::invalid_argument("barycenter: max_iter must be >= 1");

  const std::size_t n_in = prob.inputs.size();
  const std::size_t cols = prob.support.size();
  const int d = prob.inputs.front().tensor_dim();
  const double eps = cfg.eps, rho = prob.rho;
  const double tau1 = cfg.tau1.value_or(cfg.relax * eps / (eps + rho));
  const double tau2 = cfg.tau2.value_or(cfg.relax);

  std::vector<std::vector<SymMat>> log_mu(n_in), u(n_in), v(n_in), col_lse(n_in);
  for (std::size_t l = 0; l < n_in; ++l) {
    for (const PsdMat& p : prob.inputs[l].tensors()) log_mu[l].push_back(log_sym(p));
    u[l].assign(prob.inputs[l].size(), SymMat(d));
    v[l].assign(cols, SymMat(d));
    col_lse[l].assign(cols, SymMat(d));
  }
  std::vector<SymMat> log_nu(cols, SymMat(d));
  auto entry = [&](std::size_t l, std::size_t i, std::size_t j) {
    return kernel_entry(u[l][i], v[l][j], 0.0, 0.0, prob.costs[l], i, j, eps, rho, kInf);
  };

  // Zero-weight inputs do not enter the objective; their potentials stay 0.
  std::vector<std::size_t> active;
  for (std::size_t l = 0; l < n_in; ++l)
    if (prob.weights[l] > 0.0) active.push_back(l);

  SolveReport report;
  std::vector<double> change(cols, 0.0);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    for (std::size_t l : active) {
      parallel_for(u[l].size(), cols, [&](std::size_t i) {
        std::vector<EigenPair> eigs(cols);
        for (std::size_t j = 0; j < cols; ++j) eigs[j] = eig_sym(entry(l, i, j));
        SymMat target = lse_reduce_eig(eigs);
        target -= log_mu[l][i];
        u[l][i] *= (1.0 - tau1);
        u[l][i].axpy(tau1, target);
      });
    }
    parallel_for(cols, n_in * u.front().size(), [&](std::size_t j) {
      std::vector<EigenPair> eigs;
      for (std::size_t l : active) {
        eigs.resize(u[l].size());
        for (std::size_t i = 0; i < u[l].size(); ++i) eigs[i] = eig_sym(entry(l, i, j));
        col_lse[l][j] = lse_reduce_eig(eigs);
      }
      SymMat acc(d);
      for (std::size_t l : active) {
        acc.axpy(prob.weights[l], col_lse[l][j]);
        acc.axpy(prob.weights[l] / eps, v[l][j]);
      }
      // Residual: the hard-marginal gap LSE - log nu of every input, and the
      // change of log nu itself (with a single input v never moves).
      double delta = (acc - log_nu[j]).max_abs();
      log_nu[j] = std::move(acc);
      for (std::size_t l : active) {
        const SymMat gap = col_lse[l][j] - log_nu[j];
        v[l][j].axpy(tau2 * eps, gap);
        delta = std::max(delta, gap.max_abs());
      }
      change[j] = std::isfinite(delta) ? delta : std::numeric_limits<double>::infinity();
    });

    const double residual = *std::max_element(change.begin(), change.end());
    report.iterations = it;
    report.residual_history.push_back(residual);
    if (!std::isfinite(residual)) {
      report.diverged = true;
      break;
    }
    if (residual < cfg.tol) {
      report.converged = true;
      break;
    }
  }

  BarycenterResult result;
  std::vector<PsdMat> tensors;
  tensors.reserve(cols);
  for (const SymMat& ln : log_nu) {
    const EigenPair e = eig_sym(ln);
    tensors.push_back(PsdMat::assume(spectral_apply(e, [](double x) { return std::exp(x); })));
  }
  result.barycenter = TensorMeasure(prob.support, std::move(tensors));

  if (report.diverged) {
    report.primal_value = report.dual_value = std::numeric_limits<double>::quiet_NaN();
  } else {
    SolverConfig side = cfg;
    side.rho1 = rho;
    side.rho2 = kInf;
    double primal = 0.0, dual = 0.0;
    for (std::size_t l : active) {
      DualState s;
      s.u = u[l];
      s.v = v[l];
      s.alpha.assign(u[l].size(), 0.0);
      s.beta.assign(cols, 0.0);
      const Coupling g = coupling_from_state(s, prob.costs[l], side);
      primal += prob.weights[l] *
                primal_objective(g, prob.inputs[l], result.barycenter, prob.costs[l], side);
      dual += prob.weights[l] *
              dual_objective(s, prob.inputs[l], result.barycenter, prob.costs[l], side);
    }
    report.primal_value = primal;
    report.dual_value = dual;
  }
  result.u = std::move(u);
  result.v = std::move(v);
  result.report = std::move(report);
  return result;
}

PsdMat pointwise_barycenter(std::span<const PsdMat> tensors, std::span<const double> weights,
                            double energy, double rho) {
  if (tensors.empty() || tensors.size() != weights.size())
    throw std::invalid_argument("pointwise_barycenter: tensors and weights differ in length");
  if (!(rho > 0.0)) throw std::invalid_argument("pointwise_barycenter: rho must be > 0");
  if (!(energy >= 0.0)) throw std::invalid_argument("pointwise_barycenter: energy must be >= 0");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("pointwise_barycenter: weights must sum to 1");
  SymMat acc(tensors.front().dim());
  for (std::size_t l = 0; l < tensors.size(); ++l) {
    if (weights[l] == 0.0) continue;
    acc.axpy(weights[l], log_sym(tensors[l]));
  }
  SymMat out = exp_sym(acc).mat();
  out *= std::exp(-energy / rho);
  return PsdMat::assume(std::move(out));
}

std::array<double, 4> bilinear_weights(double t1, double t2) {
  if (!(t1 >= 0.0 && t1 <= 1.0 && t2 >= 0.0 && t2 <= 1.0))
    throw std::invalid_argument("bilinear_weights: parameters must lie in [0, 1]");
  return {(1.0 - t1) * (1.0 - t2), (1.0 - t1) * t2, t1 * (1.0 - t2), t1 * t2};
}

}  // namespace qot
