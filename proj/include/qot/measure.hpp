#ifndef QOT_MEASURE_HPP
#define QOT_MEASURE_HPP

#include <span>
#include <vector>

#include "qot/symmat.hpp"

namespace qot {

class GroundCost;
struct SolverConfig;

using Point = std::vector<double>;

/// Finite sum of tensor-weighted Diracs: sum_i tensors[i] delta_{points[i]}.
class TensorMeasure {
 public:
  TensorMeasure() = default;
  /// Throws std::invalid_argument when lengths, ambient or tensor
  /// dimensions disagree. An empty measure is allowed only through
  /// `empty(...)`.
  TensorMeasure(std::vector<Point> points, std::vector<PsdMat> tensors);
  static TensorMeasure empty(int ambient_dim, int tensor_dim);

  int ambient_dim() const { return ambient_dim_; }
  int tensor_dim() const { return tensor_dim_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<PsdMat>& tensors() const { return tensors_; }

 private:
  int ambient_dim_ = 0;
  int tensor_dim_ = 0;
  std::vector<Point> points_;
  std::vector<PsdMat> tensors_;
};

/// Dense I x J array of PSD matrices.
class Coupling {
 public:
  Coupling() = default;
  Coupling(std::size_t rows, std::size_t cols, std::vector<PsdMat> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int tensor_dim() const { return entries_.empty() ? 0 : entries_.front().dim(); }
  const PsdMat& at(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }
  const std::vector<PsdMat>& entries() const { return entries_; }
  Coupling transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<PsdMat> entries_;
};

std::vector<PsdMat> marginal_rows(const Coupling& g);
std::vector<PsdMat> marginal_cols(const Coupling& g);

/// sum_i -tr(P log P - P), 0 log 0 = 0; -infinity if some tensor is not PSD.
double quantum_entropy(std::span<const SymMat> tensors, double psd_tol = kDefaultPsdTol);
double quantum_entropy(std::span<const PsdMat> tensors);

/// sum_i tr(P log P - P log Q - P + Q); +infinity when a kernel of Q is not
/// contained in the kernel of P.
double quantum_kl(std::span<const PsdMat> a, std::span<const PsdMat> b);

double inner(std::span<const SymMat> a, std::span<const SymMat> b);

/// <g, c> + rho1 KL(g 1 | mu) + rho2 KL(g^T 1 | nu) - eps H(g). A side with
/// rho = +inf contributes the indicator of its marginal constraint,
/// checked at cfg.hard_tol relative sup-norm.
double primal_objective(const Coupling& g, const TensorMeasure& mu, const TensorMeasure& nu,
                        const GroundCost& cost, const SolverConfig& cfg);

std::vector<SymMat> as_symmats(std::span<const PsdMat> ps);

}  // namespace qot

#endif  // QOT_MEASURE_HPP
