#ifndef QOT_COST_HPP
#define QOT_COST_HPP

#include <span>
#include <vector>

#include "qot/measure.hpp"
#include "qot/symmat.hpp"

namespace qot {

/// Per-pair ground cost c_{i,j}. Isotropic costs store the scalar s with
/// c_{i,j} = s Id; full costs store one symmetric matrix per pair.
class GroundCost {
 public:
  enum class Kind { Isotropic, Full };

  GroundCost() = default;
  static GroundCost isotropic(std::size_t rows, std::size_t cols, std::vector<double> values);
  static GroundCost full(std::size_t rows, std::size_t cols, std::vector<SymMat> values);

  Kind kind() const { return kind_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  /// Only meaningful for isotropic costs.
  double scalar(std::size_t i, std::size_t j) const { return scalars_[i * cols_ + j]; }
  const std::vector<double>& scalars() const { return scalars_; }
  /// c_{i,j} expanded to a d x d matrix.
  SymMat at(std::size_t i, std::size_t j, int dim) const;
  /// out += s * c_{i,j}
  void add_scaled(SymMat& out, std::size_t i, std::size_t j, double s) const;
  /// tr(P c_{i,j})
  double pair_inner(const SymMat& p, std::size_t i, std::size_t j) const;

 private:
  Kind kind_ = Kind::Isotropic;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> scalars_;
  std::vector<SymMat> mats_;
};

/// ||x_i - y_j||^alpha Id.
GroundCost euclidean_cost(std::span<const Point> xs, std::span<const Point> ys, double alpha);

/// dist_{i,j}^alpha Id from a row-major rows x cols distance table.
GroundCost from_distance_matrix(std::size_t rows, std::size_t cols, std::span<const double> dist,
                                double alpha);

/// Row-major rows x cols array of kernel matrices.
struct KernelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<SymMat> entries;
  const SymMat& at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
};

/// -(c_{i,j} + r1 u_i + r2 v_j + (alpha_i + beta_j) Id) / eps, where r_k is
/// rho_k, or 1 for a hard marginal.
SymMat kernel_entry(const SymMat& u_i, const SymMat& v_j, double alpha_i, double beta_j,
                    const GroundCost& cost, std::size_t i, std::size_t j, double eps, double rho1,
                    double rho2);

KernelMatrix kernel(std::span<const SymMat> u, std::span<const SymMat> v, const GroundCost& cost,
                    double eps, double rho1, double rho2);

KernelMatrix kernel_trace(std::span<const SymMat> u, std::span<const SymMat> v,
                          std::span<const double> alpha, std::span<const double> beta,
                          const GroundCost& cost, double eps, double rho1, double rho2);

}  // namespace qot

#endif  // QOT_COST_HPP
