#include "qot/cost.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qot/config.hpp"

namespace qot {

GroundCost GroundCost::isotropic(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) throw std::invalid_argument("GroundCost: wrong value count");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("GroundCost: isotropic values must be finite and >= 0");
  }
  GroundCost c;
  c.kind_ = Kind::Isotropic;
  c.rows_ = rows;
  c.cols_ = cols;
  c.scalars_ = std::move(values);
  return c;
}

GroundCost GroundCost::full(std::size_t rows, std::size_t cols, std::vector<SymMat> values) {
  if (values.size() != rows * cols) throw std::invalid_argument("GroundCost: wrong value count");
  for (const SymMat& m : values) {
    if (!m.all_finite()) throw std::invalid_argument("GroundCost: non-finite cost matrix");
    if (m.dim() != values.front().dim())
      throw std::invalid_argument("GroundCost: cost matrices disagree in dimension");
  }
  GroundCost c;
  c.kind_ = Kind::Full;
  c.rows_ = rows;
  c.cols_ = cols;
  c.mats_ = std::move(values);
  return c;
}

SymMat GroundCost::at(std::size_t i, std::size_t j, int dim) const {
  if (kind_ == Kind::Isotropic) return SymMat::identity(dim, scalars_[i * cols_ + j]);
  const SymMat& m = mats_[i * cols_ + j];
  if (m.dim() != dim) throw std::invalid_argument("GroundCost: tensor dimension mismatch");
  return m;
}

void GroundCost::add_scaled(SymMat& out, std::size_t i, std::size_t j, double s) const {
  if (kind_ == Kind::Isotropic) {
    out.add_identity(s * scalars_[i * cols_ + j]);
  } else {
    out.axpy(s, mats_[i * cols_ + j]);
  }
}

double GroundCost::pair_inner(const SymMat& p, std::size_t i, std::size_t j) const {
  if (kind_ == Kind::Isotropic) return scalars_[i * cols_ + j] * p.trace();
  const SymMat& m = mats_[i * cols_ + j];
  double acc = 0.0;
  for (int r = 0; r < p.dim(); ++r)
    for (int c = 0; c < p.dim(); ++c) acc += p(r, c) * m(r, c);
  return acc;
}

GroundCost euclidean_cost(std::span<const Point> xs, std::span<const Point> ys, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("euclidean_cost: alpha must be > 0");
  std::vector<double> values;
  values.reserve(xs.size() * ys.size());
  for (const Point& x : xs) {
    for (const Point& y : ys) {
      if (x.size() != y.size())
        throw std::invalid_argument("euclidean_cost: ambient dimensions differ");
      double sq = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - y[k]) * (x[k] - y[k]);
      values.push_back(alpha == 2.0 ? sq : std::pow(std::sqrt(sq), alpha));
    }
  }
  return GroundCost::isotropic(xs.size(), ys.size(), std::move(values));
}

GroundCost from_distance_matrix(std::size_t rows, std::size_t cols, std::span<const double> dist,
                                double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("from_distance_matrix: alpha must be > 0");
  if (dist.size() != rows * cols)
    throw std::invalid_argument("from_distance_matrix: expected " + std::to_string(rows * cols) +
                                " distances");
  std::vector<double> values(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (!(dist[k] >= 0.0) || !std::isfinite(dist[k]))
      throw std::invalid_argument("from_distance_matrix: negative or non-finite distance at " +
                                  std::to_string(k));
    values[k] = alpha == 2.0 ? dist[k] * dist[k] : std::pow(dist[k], alpha);
  }
  return GroundCost::isotropic(rows, cols, std::move(values));
}

SymMat kernel_entry(const SymMat& u_i, const SymMat& v_j, double alpha_i, double beta_j,
                    const GroundCost& cost, std::size_t i, std::size_t j, double eps, double rho1,
                    double rho2) {
  const double inv = -1.0 / eps;
  SymMat k = u_i * (potential_coefficient(rho1) * inv);
  k.axpy(potential_coefficient(rho2) * inv, v_j);
  cost.add_scaled(k, i, j, inv);
  if (alpha_i != 0.0 || beta_j != 0.0) k.add_identity((alpha_i + beta_j) * inv);
  return k;
}

namespace {

void check_kernel_shapes(std::span<const SymMat> u, std::span<const SymMat> v,
                         const GroundCost& cost, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("kernel: eps must be > 0");
  if (u.size() != cost.rows() || v.size() != cost.cols())
    throw std::invalid_argument("kernel: potentials do not match cost shape");
}

}  // namespace

KernelMatrix kernel(std::span<const SymMat> u, std::span<const SymMat> v, const GroundCost& cost,
                    double eps, double rho1, double rho2) {
  check_kernel_shapes(u, v, cost, eps);
  KernelMatrix k{u.size(), v.size(), {}};
  k.entries.reserve(u.size() * v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      k.entries.push_back(kernel_entry(u[i], v[j], 0.0, 0.0, cost, i, j, eps, rho1, rho2));
  return k;
}

KernelMatrix kernel_trace(std::span<const SymMat> u, std::span<const SymMat> v,
                          std::span<const double> alpha, std::span<const double> beta,
                          const GroundCost& cost, double eps, double rho1, double rho2) {
  check_kernel_shapes(u, v, cost, eps);
  if (alpha.size() != u.size() || beta.size() != v.size())
    throw std::invalid_argument("kernel_trace: multiplier lengths do not match cost shape");
  KernelMatrix k{u.size(), v.size(), {}};
  k.entries.reserve(u.size() * v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      k.entries.push_back(
          kernel_entry(u[i], v[j], alpha[i], beta[j], cost, i, j, eps, rho1, rho2));
  return k;
}

}  // namespace qot
