#include "qot/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qot/config.hpp"
#include "qot/cost.hpp"

namespace qot {

TensorMeasure::TensorMeasure(std::vector<Point> points, std::vector<PsdMat> tensors)
    : points_(std::move(points)), tensors_(std::move(tensors)) {
  if (points_.empty()) throw std::invalid_argument("TensorMeasure: at least one atom required");
  if (points_.size() != tensors_.size())
    throw std::invalid_argument("TensorMeasure: points and tensors differ in length");
  ambient_dim_ = static_cast<int>(points_.front().size());
  tensor_dim_ = tensors_.front().dim();
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (static_cast<int>(points_[k].size()) != ambient_dim_)
      throw std::invalid_argument("TensorMeasure: point " + std::to_string(k) +
                                  " has the wrong ambient dimension");
    if (tensors_[k].dim() != tensor_dim_)
      throw std::invalid_argument("TensorMeasure: tensor " + std::to_string(k) +
                                  " has the wrong dimension");
  }
}

TensorMeasure TensorMeasure::empty(int ambient_dim, int tensor_dim) {
  TensorMeasure m;
  m.ambient_dim_ = ambient_dim;
  m.tensor_dim_ = tensor_dim;
  return m;
}

Coupling::Coupling(std::size_t rows, std::size_t cols, std::vector<PsdMat> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_)
    throw std::invalid_argument("Coupling: entry count does not match shape");
  for (const PsdMat& p : entries_) {
    if (p.dim() != entries_.front().dim())
      throw std::invalid_argument("Coupling: entries disagree in dimension");
  }
}

Coupling Coupling::transposed() const {
  std::vector<PsdMat> t;
  t.reserve(entries_.size());
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i < rows_; ++i) t.push_back(at(i, j));
  return Coupling(cols_, rows_, std::move(t));
}

std::vector<PsdMat> marginal_rows(const Coupling& g) {
  std::vector<PsdMat> out;
  out.reserve(g.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    SymMat acc(g.tensor_dim());
    for (std::size_t j = 0; j < g.cols(); ++j) acc += g.at(i, j).mat();
    out.push_back(PsdMat::assume(std::move(acc)));
  }
  return out;
}

std::vector<PsdMat> marginal_cols(const Coupling& g) {
  std::vector<PsdMat> out;
  out.reserve(g.cols());
  for (std::size_t j = 0; j < g.cols(); ++j) {
    SymMat acc(g.tensor_dim());
    for (std::size_t i = 0; i < g.rows(); ++i) acc += g.at(i, j).mat();
    out.push_back(PsdMat::assume(std::move(acc)));
  }
  return out;
}

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double quantum_entropy(std::span<const SymMat> tensors, double psd_tol) {
  double h = 0.0;
  for (const SymMat& p : tensors) {
    const EigenPair e = eig_sym(p);
    const double scale = std::max(std::abs(e.max_value()), std::abs(e.min_value()));
    if (!(e.min_value() >= -psd_tol * (1.0 + scale)))
      return -std::numeric_limits<double>::infinity();
    for (double s : e.values) {
      const double sp = std::max(s, 0.0);
      h -= xlogx(sp) - sp;
    }
  }
  return h;
}

double quantum_entropy(std::span<const PsdMat> tensors) {
  const std::vector<SymMat> m = as_symmats(tensors);
  return quantum_entropy(m);
}

double quantum_kl(std::span<const PsdMat> a, std::span<const PsdMat> b) {
  if (a.size() != b.size()) throw std::invalid_argument("quantum_kl: lengths differ");
  double kl = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].dim() != b[k].dim()) throw std::invalid_argument("quantum_kl: dimensions differ");
    const auto cross_term = plog(a[k], b[k]);
    if (!cross_term) return std::numeric_limits<double>::infinity();
    const EigenPair e = eig_sym(a[k].mat());
    double plogp = 0.0;
    for (double s : e.values) plogp += xlogx(std::max(s, 0.0));
    kl += plogp - cross_term->trace() - a[k].trace() + b[k].trace();
  }
  return kl;
}

double inner(std::span<const SymMat> a, std::span<const SymMat> b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner: lengths differ");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].dim() != b[k].dim()) throw std::invalid_argument("inner: dimensions differ");
    const int d = a[k].dim();
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) acc += a[k](r, c) * b[k](r, c);
  }
  return acc;
}

std::vector<SymMat> as_symmats(std::span<const PsdMat> ps) {
  std::vector<SymMat> out;
  out.reserve(ps.size());
  for (const PsdMat& p : ps) out.push_back(p.mat());
  return out;
}

namespace {

double marginal_term(std::span<const PsdMat> marginal, std::span<const PsdMat> target, double rho,
                     double hard_tol) {
  if (!std::isinf(rho)) return rho * quantum_kl(marginal, target);
  for (std::size_t k = 0; k < marginal.size(); ++k) {
    const SymMat diff = marginal[k].mat() - target[k].mat();
    if (diff.max_abs() > hard_tol * (1.0 + target[k].mat().max_abs()))
      return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

}  // namespace

double primal_objective(const Coupling& g, const TensorMeasure& mu, const TensorMeasure& nu,
                        const GroundCost& cost, const SolverConfig& cfg) {
  if (g.rows() != mu.size() || g.cols() != nu.size() || cost.rows() != g.rows() ||
      cost.cols() != g.cols())
    throw std::invalid_argument("primal_objective: inconsistent shapes");
  double transport = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) transport += cost.pair_inner(g.at(i, j).mat(), i, j);
  const double fit_rows = marginal_term(marginal_rows(g), mu.tensors(), cfg.rho1, cfg.hard_tol);
  const double fit_cols = marginal_term(marginal_cols(g), nu.tensors(), cfg.rho2, cfg.hard_tol);
  const double entropy = quantum_entropy(g.entries());
  return transport + fit_rows + fit_cols - cfg.eps * entropy;
}

}  // namespace qot
