#include "qot/symmat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace qot {

SymMat::SymMat(int dim) : dim_(dim), coeffs_(packed_count(dim), 0.0) {
  if (dim < 1) throw std::invalid_argument("SymMat: dimension must be >= 1");
}

SymMat SymMat::identity(int dim, double scale) {
  SymMat m(dim);
  for (int k = 0; k < dim; ++k) m.ref(k, k) = scale;
  return m;
}

SymMat SymMat::diagonal(std::span<const double> diag) {
  SymMat m(static_cast<int>(diag.size()));
  for (int k = 0; k < m.dim(); ++k) m.ref(k, k) = diag[k];
  return m;
}

SymMat SymMat::from_packed(int dim, std::span<const double> packed) {
  if (packed.size() != packed_count(dim)) {
    throw std::invalid_argument("SymMat: expected " + std::to_string(packed_count(dim)) +
                                " packed coefficients, got " + std::to_string(packed.size()));
  }
  SymMat m(dim);
  std::copy(packed.begin(), packed.end(), m.coeffs_.begin());
  return m;
}

SymMat SymMat::from_dense_upper(int dim, std::span<const double> dense) {
  if (dense.size() != static_cast<std::size_t>(dim) * dim)
    throw std::invalid_argument("SymMat: dense array has wrong size");
  SymMat m(dim);
  for (int r = 0; r < dim; ++r)
    for (int c = r; c < dim; ++c) m.ref(r, c) = dense[static_cast<std::size_t>(r) * dim + c];
  return m;
}

double SymMat::trace() const {
  double t = 0.0;
  for (int k = 0; k < dim_; ++k) t += (*this)(k, k);
  return t;
}

double SymMat::frobenius() const {
  double s = 0.0;
  for (int r = 0; r < dim_; ++r) {
    for (int c = r; c < dim_; ++c) {
      const double v = (*this)(r, c);
      s += (r == c ? 1.0 : 2.0) * v * v;
    }
  }
  return std::sqrt(s);
}

double SymMat::max_abs() const {
  double m = 0.0;
  for (double v : coeffs_) m = std::max(m, std::abs(v));
  return m;
}

bool SymMat::all_finite() const {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](double v) { return std::isfinite(v); });
}

SymMat& SymMat::operator+=(const SymMat& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("SymMat: dimension mismatch");
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
  return *this;
}

SymMat& SymMat::operator-=(const SymMat& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("SymMat: dimension mismatch");
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= o.coeffs_[k];
  return *this;
}

SymMat& SymMat::operator*=(double s) {
  for (double& v : coeffs_) v *= s;
  return *this;
}

SymMat& SymMat::add_identity(double s) {
  for (int k = 0; k < dim_; ++k) ref(k, k) += s;
  return *this;
}

SymMat& SymMat::axpy(double s, const SymMat& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("SymMat: dimension mismatch");
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += s * o.coeffs_[k];
  return *this;
}

DenseMat DenseMat::from(const SymMat& s) {
  DenseMat m(s.dim());
  for (int r = 0; r < s.dim(); ++r)
    for (int c = 0; c < s.dim(); ++c) m(r, c) = s(r, c);
  return m;
}

double DenseMat::trace() const {
  double t = 0.0;
  for (int k = 0; k < dim; ++k) t += (*this)(k, k);
  return t;
}

SymMat DenseMat::symmetric_part() const {
  SymMat s(dim);
  for (int r = 0; r < dim; ++r)
    for (int c = r; c < dim; ++c) s.ref(r, c) = 0.5 * ((*this)(r, c) + (*this)(c, r));
  return s;
}

DenseMat operator*(const DenseMat& x, const DenseMat& y) {
  if (x.dim != y.dim) throw std::invalid_argument("DenseMat: dimension mismatch");
  DenseMat out(x.dim);
  for (int r = 0; r < x.dim; ++r)
    for (int k = 0; k < x.dim; ++k) {
      const double xr = x(r, k);
      for (int c = 0; c < x.dim; ++c) out(r, c) += xr * y(k, c);
    }
  return out;
}

bool PsdMat::is_psd(const SymMat& s, double psd_tol) {
  if (!s.all_finite()) return false;
  const EigenPair e = eig_sym(s);
  const double scale = std::max(std::abs(e.max_value()), std::abs(e.min_value()));
  return e.min_value() >= -psd_tol * (1.0 + scale);
}

PsdMat PsdMat::make(SymMat s, double psd_tol) {
  if (!is_psd(s, psd_tol)) throw std::domain_error("matrix is not positive semidefinite");
  return PsdMat(std::move(s));
}

namespace {

// Dense row-major work matrix for the Jacobi sweeps.
struct Work {
  int d;
  Coeffs a;  // row-major
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * d + c]; }
};

// Cyclic Jacobi on `w`, accumulating rotations into the column-major `vecs`.
void jacobi(Work& w, Coeffs& vecs, int max_sweeps = 60) {
  const int d = w.d;
  auto v = [&](int r, int c) -> double& { return vecs[static_cast<std::size_t>(c) * d + r]; };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int q = p + 1; q < d; ++q) off += std::abs(w.at(p, q));
    if (off == 0.0) return;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = w.at(p, q);
        if (apq == 0.0) continue;
        const double app = w.at(p, p);
        const double aqq = w.at(q, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(app) + g == std::abs(app) && std::abs(aqq) + g == std::abs(aqq)) {
          w.at(p, q) = w.at(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        if (!std::isfinite(theta)) t = 0.5 / theta;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        w.at(p, p) = app - t * apq;
        w.at(q, q) = aqq + t * apq;
        w.at(p, q) = w.at(q, p) = 0.0;
        for (int r = 0; r < d; ++r) {
          if (r == p || r == q) continue;
          const double arp = w.at(r, p);
          const double arq = w.at(r, q);
          w.at(r, p) = w.at(p, r) = c * arp - s * arq;
          w.at(r, q) = w.at(q, r) = c * arq + s * arp;
        }
        for (int r = 0; r < d; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
}

void sort_descending(EigenPair& e) {
  const int d = e.dim;
  std::array<int, 64> idx_small{};
  std::vector<int> idx_big;
  int* idx = idx_small.data();
  if (d > 64) {
    idx_big.resize(d);
    idx = idx_big.data();
  }
  std::iota(idx, idx + d, 0);
  std::stable_sort(idx, idx + d, [&](int x, int y) { return e.values[x] > e.values[y]; });
  bool identity = true;
  for (int k = 0; k < d; ++k) identity = identity && idx[k] == k;
  if (identity) return;
  Coeffs vals(d), vecs(e.vectors.size());
  for (int k = 0; k < d; ++k) {
    vals[k] = e.values[idx[k]];
    for (int r = 0; r < d; ++r) vecs[static_cast<std::size_t>(k) * d + r] = e.vec(r, idx[k]);
  }
  e.values = std::move(vals);
  e.vectors = std::move(vecs);
}

EigenPair eig2(const SymMat& s) {
  EigenPair e;
  e.dim = 2;
  const double a = s(0, 0), b = s(1, 1), c = s(0, 1);
  const double mid = 0.5 * (a + b);
  const double half_diff = 0.5 * (a - b);
  const double rad = std::hypot(half_diff, c);
  // Rotation angle aligning the first axis with the top eigenvector.
  const double theta = 0.5 * std::atan2(c, half_diff);
  const double ct = std::cos(theta), st = std::sin(theta);
  // The eigenvalue of larger magnitude is cancellation-free; the other one
  // comes from the determinant so that tiny eigenvalues keep their
  // relative accuracy.
  const double det = a * b - c * c;
  if (mid >= 0.0) {
    const double big = mid + rad;
    e.values = {big, big != 0.0 ? det / big : 0.0};
  } else {
    const double big = mid - rad;
    e.values = {det / big, big};
  }
  e.vectors = {ct, st, -st, ct};
  return e;
}

using Vec3 = std::array<double, 3>;

Vec3 cross(const Vec3& u, const Vec3& v) {
  return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}
double dot(const Vec3& u, const Vec3& v) { return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]; }

// Eigenvector of the well-separated eigenvalue: the largest cross product of
// two rows of (A - lambda I).
Vec3 separated_eigenvector(double a00, double a01, double a02, double a11, double a12,
                           double a22, double lambda) {
  const Vec3 r0{a00 - lambda, a01, a02};
  const Vec3 r1{a01, a11 - lambda, a12};
  const Vec3 r2{a02, a12, a22 - lambda};
  const Vec3 c01 = cross(r0, r1), c02 = cross(r0, r2), c12 = cross(r1, r2);
  const double d01 = dot(c01, c01), d02 = dot(c02, c02), d12 = dot(c12, c12);
  Vec3 best = c01;
  double dmax = d01;
  if (d02 > dmax) {
    best = c02;
    dmax = d02;
  }
  if (d12 > dmax) {
    best = c12;
    dmax = d12;
  }
  if (dmax == 0.0) return {1.0, 0.0, 0.0};
  const double inv = 1.0 / std::sqrt(dmax);
  return {best[0] * inv, best[1] * inv, best[2] * inv};
}

// Second eigenvector, solved as a 2x2 problem in the complement of `w`.
Vec3 complement_eigenvector(const Work& a, const Vec3& w, double lambda) {
  Vec3 u;
  if (std::abs(w[0]) > std::abs(w[1])) {
    const double inv = 1.0 / std::sqrt(w[0] * w[0] + w[2] * w[2]);
    u = {-w[2] * inv, 0.0, w[0] * inv};
  } else {
    const double inv = 1.0 / std::sqrt(w[1] * w[1] + w[2] * w[2]);
    u = {0.0, w[2] * inv, -w[1] * inv};
  }
  const Vec3 v = cross(w, u);
  auto mul = [&](const Vec3& x) {
    Vec3 y{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) y[r] += a.a[static_cast<std::size_t>(r) * 3 + c] * x[c];
    return y;
  };
  const Vec3 au = mul(u), av = mul(v);
  double m00 = dot(u, au) - lambda;
  double m01 = dot(u, av);
  double m11 = dot(v, av) - lambda;
  const double abs00 = std::abs(m00), abs01 = std::abs(m01), abs11 = std::abs(m11);
  auto combine = [&](double cu, double cv) {
    return Vec3{cu * u[0] - cv * v[0], cu * u[1] - cv * v[1], cu * u[2] - cv * v[2]};
  };
  if (abs00 >= abs11) {
    if (std::max(abs00, abs01) == 0.0) return u;
    if (abs00 >= abs01) {
      m01 /= m00;
      m00 = 1.0 / std::sqrt(1.0 + m01 * m01);
      m01 *= m00;
    } else {
      m00 /= m01;
      m01 = 1.0 / std::sqrt(1.0 + m00 * m00);
      m00 *= m01;
    }
    return combine(m01, m00);
  }
  if (std::max(abs11, abs01) == 0.0) return u;
  if (abs11 >= abs01) {
    m01 /= m11;
    m11 = 1.0 / std::sqrt(1.0 + m01 * m01);
    m01 *= m11;
  } else {
    m11 /= m01;
    m01 = 1.0 / std::sqrt(1.0 + m11 * m11);
    m11 *= m01;
  }
  return combine(m11, m01);
}

EigenPair eig3(const SymMat& s) {
  EigenPair e;
  e.dim = 3;
  const double scale = s.max_abs();
  if (scale == 0.0) {
    e.values = {0.0, 0.0, 0.0};
    e.vectors = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return e;
  }
  const double inv = 1.0 / scale;
  const double a00 = s(0, 0) * inv, a01 = s(0, 1) * inv, a02 = s(0, 2) * inv;
  const double a11 = s(1, 1) * inv, a12 = s(1, 2) * inv, a22 = s(2, 2) * inv;
  Work w{3, {a00, a01, a02, a01, a11, a12, a02, a12, a22}};
  Coeffs vecs{1, 0, 0, 0, 1, 0, 0, 0, 1};

  const double off = a01 * a01 + a02 * a02 + a12 * a12;
  if (off > 0.0) {
    // Trigonometric solution of the shifted characteristic polynomial.
    const double q = (a00 + a11 + a22) / 3.0;
    const double b00 = a00 - q, b11 = a11 - q, b22 = a22 - q;
    const double p = std::sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off) / 6.0);
    const double c00 = b11 * b22 - a12 * a12;
    const double c01 = a01 * b22 - a12 * a02;
    const double c02 = a01 * a12 - b11 * a02;
    const double det = (b00 * c00 - a01 * c01 + a02 * c02) / (p * p * p);
    const double half_det = std::clamp(0.5 * det, -1.0, 1.0);
    const double angle = std::acos(half_det) / 3.0;
    constexpr double kTwoThirdsPi = 2.09439510239319549;
    const double beta2 = 2.0 * std::cos(angle);
    const double beta0 = 2.0 * std::cos(angle + kTwoThirdsPi);
    const double beta1 = -(beta0 + beta2);
    const double l0 = q + p * beta0, l1 = q + p * beta1, l2 = q + p * beta2;
    Vec3 v0, v1, v2;
    if (half_det >= 0.0) {
      v2 = separated_eigenvector(a00, a01, a02, a11, a12, a22, l2);
      v1 = complement_eigenvector(w, v2, l1);
      v0 = cross(v1, v2);
    } else {
      v0 = separated_eigenvector(a00, a01, a02, a11, a12, a22, l0);
      v1 = complement_eigenvector(w, v0, l1);
      v2 = cross(v0, v1);
    }
    vecs = {v2[0], v2[1], v2[2], v1[0], v1[1], v1[2], v0[0], v0[1], v0[2]};
    // Repair: rotate A into the closed-form basis, then finish with Jacobi.
    Work b{3, Coeffs(9, 0.0)};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            acc += vecs[r * 3 + i] * w.a[static_cast<std::size_t>(i) * 3 + j] * vecs[c * 3 + j];
        b.at(r, c) = acc;
      }
    for (int r = 0; r < 3; ++r)
      for (int c = r + 1; c < 3; ++c) b.at(r, c) = b.at(c, r) = 0.5 * (b.at(r, c) + b.at(c, r));
    jacobi(b, vecs);
    w = b;
  }
  e.values = {w.at(0, 0) * scale, w.at(1, 1) * scale, w.at(2, 2) * scale};
  e.vectors = std::move(vecs);
  sort_descending(e);
  return e;
}

EigenPair eig_general(const SymMat& s) {
  const int d = s.dim();
  Work w{d, Coeffs(static_cast<std::size_t>(d) * d, 0.0)};
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) w.at(r, c) = s(r, c);
  Coeffs vecs(static_cast<std::size_t>(d) * d, 0.0);
  for (int k = 0; k < d; ++k) vecs[static_cast<std::size_t>(k) * d + k] = 1.0;
  jacobi(w, vecs);
  EigenPair e;
  e.dim = d;
  e.values.resize(d);
  for (int k = 0; k < d; ++k) e.values[k] = w.at(k, k);
  e.vectors = std::move(vecs);
  sort_descending(e);
  return e;
}

}  // namespace

EigenPair eig_sym(const SymMat& s) {
  switch (s.dim()) {
    case 1: {
      EigenPair e;
      e.dim = 1;
      e.values = {s(0, 0)};
      e.vectors = {1.0};
      return e;
    }
    case 2:
      return eig2(s);
    case 3:
      return eig3(s);
    default:
      return eig_general(s);
  }
}

SymMat reconstruct(const EigenPair& e) {
  return spectral_apply(e, [](double x) { return x; });
}

PsdMat exp_sym(const SymMat& s) {
  const EigenPair e = eig_sym(s);
  if (!std::isfinite(std::exp(e.max_value())))
    throw std::overflow_error("exp_sym: exponent overflows");
  return PsdMat::assume(spectral_apply(e, [](double x) { return std::exp(x); }));
}

SymMat log_sym(const SymMat& p, double eig_floor) {
  const EigenPair e = eig_sym(p);
  return spectral_apply(e, [eig_floor](double x) { return std::log(std::max(x, eig_floor)); });
}

SymMat log_sym(const PsdMat& p, double eig_floor) { return log_sym(p.mat(), eig_floor); }

PsdMat sqrt_sym(const PsdMat& p) {
  const EigenPair e = eig_sym(p.mat());
  return PsdMat::assume(spectral_apply(e, [](double x) { return std::sqrt(std::max(x, 0.0)); }));
}

std::optional<DenseMat> plog(const PsdMat& p, const PsdMat& q, double kernel_tol) {
  if (p.dim() != q.dim()) throw std::invalid_argument("plog: dimension mismatch");
  const int d = p.dim();
  const EigenPair e = eig_sym(q.mat());
  const double cutoff = kernel_tol * std::max(e.max_value(), 0.0);
  // P~ = U^T P U
  DenseMat pt(d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc += e.vec(i, r) * p.mat()(i, j) * e.vec(j, c);
      pt(r, c) = acc;
    }
  const double pscale = std::max(p.mat().max_abs(), std::numeric_limits<double>::min());
  Coeffs logs(d, 0.0);
  for (int k = 0; k < d; ++k) {
    const bool in_kernel = e.values[k] <= cutoff;
    if (!in_kernel) {
      logs[k] = std::log(e.values[k]);
      continue;
    }
    // ker Q must lie in ker P: the column of P~ along this direction vanishes.
    for (int r = 0; r < d; ++r) {
      if (std::abs(pt(r, k)) > kernel_tol * pscale) return std::nullopt;
    }
  }
  // U [P~ diag(log sigma)] U^T with 0 log 0 = 0.
  DenseMat inner(d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) inner(r, c) = logs[c] == 0.0 ? 0.0 : pt(r, c) * logs[c];
  DenseMat out(d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc += e.vec(r, i) * inner(i, j) * e.vec(c, j);
      out(r, c) = acc;
    }
  return out;
}

namespace {

double shift_of(std::span<const EigenPair> eigs) {
  if (eigs.empty()) throw std::invalid_argument("lse: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (const EigenPair& e : eigs) m = std::max(m, e.max_value());
  return m;
}

std::vector<EigenPair> eig_all(std::span<const SymMat> mats) {
  std::vector<EigenPair> out;
  out.reserve(mats.size());
  for (const SymMat& m : mats) {
    if (m.dim() != mats.front().dim()) throw std::invalid_argument("lse: dimension mismatch");
    out.push_back(eig_sym(m));
  }
  return out;
}

}  // namespace

SymMat lse_reduce_eig(std::span<const EigenPair> eigs) {
  const double m = shift_of(eigs);
  const int d = eigs.front().dim;
  SymMat acc(d);
  for (const EigenPair& e : eigs) acc += spectral_apply(e, [m](double x) { return std::exp(x - m); });
  // The top term contributes an eigenvalue >= 1, so only underflowed
  // directions can reach the floor.
  SymMat out = log_sym(acc, std::numeric_limits<double>::min());
  out.add_identity(m);
  return out;
}

SymMat lse_reduce(std::span<const SymMat> mats) {
  const std::vector<EigenPair> eigs = eig_all(mats);
  return lse_reduce_eig(eigs);
}

double lste_reduce_eig(std::span<const EigenPair> eigs) {
  const double m = shift_of(eigs);
  double acc = 0.0;
  for (const EigenPair& e : eigs)
    for (double v : e.values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double lste_reduce(std::span<const SymMat> mats) {
  const std::vector<EigenPair> eigs = eig_all(mats);
  return lste_reduce_eig(eigs);
}

}  // namespace qot
