#ifndef QOT_SYMMAT_HPP
#define QOT_SYMMAT_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace qot {

// Inline capacity covers d <= 3 without touching the heap.
using Coeffs = boost::container::small_vector<double, 9>;

/// Real symmetric d x d matrix stored as its packed upper triangle
/// (row-major, d(d+1)/2 coefficients).
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(int dim);

  static SymMat identity(int dim, double scale = 1.0);
  static SymMat diagonal(std::span<const double> diag);
  static SymMat from_packed(int dim, std::span<const double> packed);
  /// Reads the upper triangle of a row-major dense d x d array.
  static SymMat from_dense_upper(int dim, std::span<const double> dense);

  int dim() const { return dim_; }
  std::size_t packed_size() const { return coeffs_.size(); }
  std::span<const double> packed() const { return {coeffs_.data(), coeffs_.size()}; }
  std::span<double> packed_mut() { return {coeffs_.data(), coeffs_.size()}; }

  double operator()(int r, int c) const { return coeffs_[index(r, c)]; }
  double& ref(int r, int c) { return coeffs_[index(r, c)]; }

  double trace() const;
  double frobenius() const;
  /// Largest absolute coefficient (sup-norm over entries).
  double max_abs() const;
  bool all_finite() const;

  SymMat& operator+=(const SymMat& o);
  SymMat& operator-=(const SymMat& o);
  SymMat& operator*=(double s);
  SymMat& add_identity(double s);
  /// this += s * o
  SymMat& axpy(double s, const SymMat& o);

  friend SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
  friend SymMat operator-(SymMat a, const SymMat& b) { return a -= b; }
  friend SymMat operator*(SymMat a, double s) { return a *= s; }
  friend SymMat operator*(double s, SymMat a) { return a *= s; }
  friend bool operator==(const SymMat& a, const SymMat& b) {
    return a.dim_ == b.dim_ && a.coeffs_ == b.coeffs_;
  }

  static std::size_t packed_count(int dim) {
    return static_cast<std::size_t>(dim) * (dim + 1) / 2;
  }

 private:
  std::size_t index(int r, int c) const {
    if (r > c) std::swap(r, c);
    return static_cast<std::size_t>(r * dim_ - r * (r - 1) / 2 + (c - r));
  }

  int dim_ = 0;
  Coeffs coeffs_;
};

/// Square d x d matrix, row-major. Used where products of symmetric
/// matrices leave the symmetric space.
struct DenseMat {
  int dim = 0;
  Coeffs a;

  explicit DenseMat(int d = 0) : dim(d), a(static_cast<std::size_t>(d) * d, 0.0) {}
  static DenseMat from(const SymMat& s);

  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * dim + c]; }
  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * dim + c]; }
  double trace() const;
  SymMat symmetric_part() const;
};

DenseMat operator*(const DenseMat& x, const DenseMat& y);

inline constexpr double kDefaultPsdTol = 1e-10;
inline constexpr double kEigFloor = 1e-15;
inline constexpr double kKernelTol = 1e-12;

/// A SymMat known to lie in the PSD cone (within psd_tol).
class PsdMat {
 public:
  PsdMat() = default;

  /// Checks min eigenvalue >= -psd_tol * (1 + max |eigenvalue|); throws
  /// std::domain_error otherwise.
  static PsdMat make(SymMat s, double psd_tol = kDefaultPsdTol);
  /// No check: for results that are PSD by construction.
  static PsdMat assume(SymMat s) { return PsdMat(std::move(s)); }
  static bool is_psd(const SymMat& s, double psd_tol = kDefaultPsdTol);

  const SymMat& mat() const { return inner_; }
  int dim() const { return inner_.dim(); }
  double trace() const { return inner_.trace(); }

  friend bool operator==(const PsdMat& a, const PsdMat& b) { return a.inner_ == b.inner_; }

 private:
  explicit PsdMat(SymMat s) : inner_(std::move(s)) {}
  SymMat inner_;
};

struct EigenPair {
  Coeffs values;   // descending
  Coeffs vectors;  // column-major: vectors[c * d + r] is component r of vector c
  int dim = 0;

  double vec(int r, int c) const { return vectors[static_cast<std::size_t>(c) * dim + r]; }
  double max_value() const { return values.front(); }
  double min_value() const { return values.back(); }
};

EigenPair eig_sym(const SymMat& s);

/// U diag(f(sigma)) U^T.
template <class F>
SymMat spectral_apply(const EigenPair& e, F&& f) {
  const int d = e.dim;
  SymMat out(d);
  double fv[64];
  Coeffs heap;
  double* fs = fv;
  if (d > 64) {
    heap.resize(d);
    fs = heap.data();
  }
  for (int k = 0; k < d; ++k) fs[k] = f(e.values[k]);
  for (int r = 0; r < d; ++r) {
    for (int c = r; c < d; ++c) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += e.vec(r, k) * fs[k] * e.vec(c, k);
      out.ref(r, c) = acc;
    }
  }
  return out;
}

SymMat reconstruct(const EigenPair& e);

/// Throws std::overflow_error when an exponentiated eigenvalue is not finite.
PsdMat exp_sym(const SymMat& s);
/// Eigenvalues below eig_floor are clamped to eig_floor before the log.
SymMat log_sym(const PsdMat& p, double eig_floor = kEigFloor);
SymMat log_sym(const SymMat& p, double eig_floor = kEigFloor);
PsdMat sqrt_sym(const PsdMat& p);

/// P log Q extended to singular Q by lower semicontinuity. std::nullopt
/// stands for +infinity (ker Q not contained in ker P).
std::optional<DenseMat> plog(const PsdMat& p, const PsdMat& q, double kernel_tol = kKernelTol);

/// log sum_k exp(M_k), stabilized by the scalar shift max_k lambda_max(M_k).
SymMat lse_reduce(std::span<const SymMat> mats);
/// Same reduction from precomputed eigendecompositions.
SymMat lse_reduce_eig(std::span<const EigenPair> eigs);
/// log sum_k tr exp(M_k).
double lste_reduce(std::span<const SymMat> mats);
double lste_reduce_eig(std::span<const EigenPair> eigs);

}  // namespace qot

#endif  // QOT_SYMMAT_HPP
