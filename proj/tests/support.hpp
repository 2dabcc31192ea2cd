#ifndef QOT_TESTS_SUPPORT_HPP
#define QOT_TESTS_SUPPORT_HPP

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "qot/cost.hpp"
#include "qot/measure.hpp"
#include "qot/symmat.hpp"

namespace qot::testing {

inline SymMat random_sym(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  SymMat s(d);
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) s.ref(r, c) = n(rng);
  return s;
}

/// A A^T + floor Id, A with Gaussian entries.
inline SymMat random_pd(std::mt19937_64& rng, int d, double floor = 0.05, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> a(static_cast<std::size_t>(d) * d);
  for (double& x : a) x = n(rng);
  SymMat s(d);
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += a[r * d + k] * a[c * d + k];
      s.ref(r, c) = acc;
    }
  s.add_identity(floor);
  return s;
}

/// R(theta) diag(a, b) R(theta)^T
inline SymMat rotated(double theta, double a, double b) {
  const double c = std::cos(theta), s = std::sin(theta);
  SymMat m(2);
  m.ref(0, 0) = a * c * c + b * s * s;
  m.ref(0, 1) = (a - b) * c * s;
  m.ref(1, 1) = a * s * s + b * c * c;
  return m;
}

inline std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n, int ambient) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> pts(n, Point(static_cast<std::size_t>(ambient)));
  for (Point& p : pts)
    for (double& x : p) x = u(rng);
  return pts;
}

inline TensorMeasure random_measure(std::mt19937_64& rng, std::size_t n, int d, int ambient = 2,
                                    double floor = 0.05) {
  std::vector<PsdMat> ts;
  for (std::size_t i = 0; i < n; ++i) ts.push_back(PsdMat::make(random_pd(rng, d, floor, 0.6)));
  return TensorMeasure(random_points(rng, n, ambient), std::move(ts));
}

/// Rescales nu so that both measures carry the same total trace.
inline TensorMeasure balanced_to(const TensorMeasure& nu, const TensorMeasure& mu) {
  double tm = 0.0, tn = 0.0;
  for (const PsdMat& m : mu.tensors()) tm += m.trace();
  for (const PsdMat& n : nu.tensors()) tn += n.trace();
  std::vector<PsdMat> ts;
  for (const PsdMat& n : nu.tensors()) ts.push_back(PsdMat::assume(n.mat() * (tm / tn)));
  return TensorMeasure(nu.points(), ts);
}

inline double frob_diff(const SymMat& a, const SymMat& b) { return (a - b).frobenius(); }

/// Scalar unbalanced Sinkhorn in scaling form, written independently of the
/// matrix solver: a_i = (mu_i / sum_j K_ij b_j)^(rho1/(rho1+eps)) and the same
/// for b, with K_ij = exp(-c_ij / eps). The matrix potential is recovered as
/// u_i = -eps log(a_i) / rho1.
struct ScalarSinkhorn {
  std::vector<double> mu, nu, kern;
  std::size_t rows, cols;
  double eps, rho1, rho2;
  std::vector<double> a, b;

  ScalarSinkhorn(std::vector<double> m, std::vector<double> n, const std::vector<double>& cost,
                 double e, double r1, double r2)
      : mu(std::move(m)), nu(std::move(n)), rows(mu.size()), cols(nu.size()), eps(e), rho1(r1),
        rho2(r2), a(rows, 1.0), b(cols, 1.0) {
    for (double c : cost) kern.push_back(std::exp(-c / eps));
  }

  void step() {
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += kern[i * cols + j] * b[j];
      a[i] = std::pow(mu[i] / s, rho1 / (rho1 + eps));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < rows; ++i) s += kern[i * cols + j] * a[i];
      b[j] = std::pow(nu[j] / s, rho2 / (rho2 + eps));
    }
  }

  double u(std::size_t i) const { return -eps * std::log(a[i]) / rho1; }
  double v(std::size_t j) const { return -eps * std::log(b[j]) / rho2; }
  double plan(std::size_t i, std::size_t j) const { return a[i] * kern[i * cols + j] * b[j]; }
};

/// Two anisotropic bumps on [0, 1] with n points each: mu centered at 0.25
/// and oriented along x, nu centered at 0.75 and oriented along y.
inline std::pair<TensorMeasure, TensorMeasure> bump_pair_1d(std::size_t n) {
  std::vector<Point> pts;
  std::vector<PsdMat> mu, nu;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    pts.push_back({x});
    const double gm = std::exp(-std::pow((x - 0.25) / 0.1, 2)) + 0.02;
    const double gn = std::exp(-std::pow((x - 0.75) / 0.1, 2)) + 0.02;
    mu.push_back(PsdMat::make(gm * rotated(0.3 + x, 1.0, 0.1)));
    nu.push_back(PsdMat::make(gn * rotated(1.9 - x, 1.0, 0.1)));
  }
  return {TensorMeasure(pts, mu), TensorMeasure(pts, nu)};
}

/// Least-squares line fit of y against 0..n-1; returns {slope, r_squared}.
inline std::pair<double, double> line_fit(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double x = static_cast<double>(k);
    sx += x;
    sy += y[k];
    sxx += x * x;
    sxy += x * y[k];
    syy += y[k] * y[k];
  }
  const double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  const double slope = cov / vx;
  const double r2 = vy > 0 ? cov * cov / (vx * vy) : 1.0;
  return {slope, r2};
}

}  // namespace qot::testing

#endif  // QOT_TESTS_SUPPORT_HPP
