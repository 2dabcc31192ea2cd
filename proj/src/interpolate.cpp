#include "qot/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

namespace qot {

namespace {

// Inverse through the spectrum, eigenvalues clamped at 1e-12 * lambda_max.
DenseMat clamped_inverse(const SymMat& s) {
  const EigenPair e = eig_sym(s);
  const double top = e.max_value();
  if (!(top > 0.0)) return DenseMat(s.dim());
  const double floor = 1e-12 * top;
  return DenseMat::from(spectral_apply(e, [floor](double x) { return 1.0 / std::max(x, floor); }));
}

SymMat project_psd(const SymMat& s) {
  const EigenPair e = eig_sym(s);
  if (e.min_value() >= 0.0) return s;
  return spectral_apply(e, [](double x) { return std::max(x, 0.0); });
}

double distance(const Point& a, const Point& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

}  // namespace

Interpolation displacement_interpolate(const TensorMeasure& mu, const TensorMeasure& nu,
                                       const Coupling& g, const InterpolationParams& p) {
  if (!(p.t >= 0.0 && p.t <= 1.0)) throw std::invalid_argument("interpolate: t must lie in [0, 1]");
  if (!(p.trace_threshold >= 0.0))
    throw std::invalid_argument("interpolate: trace_threshold must be >= 0");
  if (p.merge_radius && !(*p.merge_radius >= 0.0))
    throw std::invalid_argument("interpolate: merge_radius must be >= 0");
  if (g.rows() != mu.size() || g.cols() != nu.size())
    throw std::invalid_argument("interpolate: coupling shape does not match the measures");
  if (mu.tensor_dim() != nu.tensor_dim() || (g.rows() * g.cols() > 0 && g.tensor_dim() != mu.tensor_dim()))
    throw std::invalid_argument("interpolate: tensor dimensions differ");
  if (mu.ambient_dim() != nu.ambient_dim())
    throw std::invalid_argument("interpolate: ambient dimensions differ");

  const int d = mu.tensor_dim();
  const std::size_t rows = g.rows(), cols = g.cols();
  Interpolation out{TensorMeasure::empty(mu.ambient_dim(), d), {}};

  double max_trace = 0.0;
  for (const PsdMat& e : g.entries()) max_trace = std::max(max_trace, e.trace());
  if (!(max_trace > 0.0)) return out;
  const double cut = p.trace_threshold * max_trace;

  const std::vector<PsdMat> row_sums = marginal_rows(g);
  const std::vector<PsdMat> col_sums = marginal_cols(g);
  std::vector<DenseMat> mu_bar, nu_bar;
  mu_bar.reserve(rows);
  nu_bar.reserve(cols);
  for (std::size_t i = 0; i < rows; ++i)
    mu_bar.push_back(DenseMat::from(mu.tensors()[i].mat()) * clamped_inverse(row_sums[i].mat()));
  for (std::size_t j = 0; j < cols; ++j)
    nu_bar.push_back(DenseMat::from(nu.tensors()[j].mat()) * clamped_inverse(col_sums[j].mat()));

  const double t = p.t;
  std::vector<Point> points;
  std::vector<SymMat> tensors;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const PsdMat& gij = g.at(i, j);
      if (cut > 0.0 && gij.trace() < cut) continue;
      DenseMat adjust(d);
      for (std::size_t k = 0; k < adjust.a.size(); ++k)
        adjust.a[k] = (1.0 - t) * mu_bar[i].a[k] + t * nu_bar[j].a[k];
      const DenseMat prod = adjust * DenseMat::from(gij.mat());
      if (p.keep_raw) out.raw.push_back(prod);
      Point x(mu.ambient_dim());
      for (std::size_t k = 0; k < x.size(); ++k)
        x[k] = (1.0 - t) * mu.points()[i][k] + t * nu.points()[j][k];
      points.push_back(std::move(x));
      tensors.push_back(prod.symmetric_part());
    }
  }

  if (p.merge_radius) {
    std::vector<Point> merged_points;
    std::vector<SymMat> merged;
    if (*p.merge_radius == 0.0) {
      std::map<Point, std::size_t> slot;
      for (std::size_t k = 0; k < points.size(); ++k) {
        const auto [it, fresh] = slot.try_emplace(points[k], merged.size());
        if (fresh) {
          merged_points.push_back(points[k]);
          merged.push_back(tensors[k]);
        } else {
          merged[it->second] += tensors[k];
        }
      }
    } else {
      for (std::size_t k = 0; k < points.size(); ++k) {
        std::size_t c = 0;
        while (c < merged.size() && distance(merged_points[c], points[k]) > *p.merge_radius) ++c;
        if (c == merged.size()) {
          merged_points.push_back(points[k]);
          merged.push_back(tensors[k]);
        } else {
          merged[c] += tensors[k];
        }
      }
    }
    points = std::move(merged_points);
    tensors = std::move(merged);
  }
  if (points.empty()) return out;

  std::vector<PsdMat> psd;
  psd.reserve(tensors.size());
  for (const SymMat& s : tensors) psd.push_back(PsdMat::assume(project_psd(s)));
  out.measure = TensorMeasure(std::move(points), std::move(psd));
  return out;
}

double single_dirac_distance(const PsdMat& p, const PsdMat& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("single_dirac_distance: dimension mismatch");
  // All three traces go through the same log/exp pipeline so that the
  // rounding errors cancel; D(P, P) is then exactly 0.
  const SymMat a = log_sym(p), b = log_sym(q);
  SymMat mid = a * 0.5;
  mid.axpy(0.5, b);
  auto trace_exp = [](const SymMat& s) {
    double t = 0.0;
    for (double x : eig_sym(s).values) t += std::exp(x);
    return t;
  };
  const double radicand = trace_exp(a) + trace_exp(b) - 2.0 * trace_exp(mid);
  if (radicand < -1e-9)
    throw std::runtime_error("single_dirac_distance: negative radicand " + std::to_string(radicand));
  return std::sqrt(std::max(radicand, 0.0));
}

TensorGrid as_grid(const TensorMeasure& field) {
  if (field.ambient_dim() != 2) throw std::invalid_argument("grid: field must live in 2-D");
  if (field.tensor_dim() != 2) throw std::invalid_argument("grid: tensors must be 2 x 2");
  std::vector<double> xs, ys;
  for (const Point& pt : field.points()) {
    xs.push_back(pt[0]);
    ys.push_back(pt[1]);
  }
  auto unique_sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double x : v)
      if (out.empty() || std::abs(x - out.back()) > 1e-9) out.push_back(x);
    return out;
  };
  const std::vector<double> ux = unique_sorted(xs), uy = unique_sorted(ys);
  TensorGrid grid;
  grid.width = static_cast<int>(ux.size());
  grid.height = static_cast<int>(uy.size());
  if (ux.size() * uy.size() != field.size())
    throw std::invalid_argument("grid: points do not form a regular lattice");
  auto locate = [](const std::vector<double>& axis, double v) {
    const auto it = std::lower_bound(axis.begin(), axis.end(), v - 1e-9);
    return static_cast<std::size_t>(it - axis.begin());
  };
  grid.tensors.assign(field.size(), SymMat(2));
  std::vector<bool> seen(field.size(), false);
  for (std::size_t k = 0; k < field.size(); ++k) {
    const std::size_t cell =
        locate(uy, field.points()[k][1]) * ux.size() + locate(ux, field.points()[k][0]);
    if (seen[cell]) throw std::invalid_argument("grid: duplicate lattice point");
    seen[cell] = true;
    grid.tensors[cell] = field.tensors()[k].mat();
  }
  return grid;
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (double& x : out) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return out;
}

ScalarGrid anisotropic_diffuse(const TensorGrid& grid, std::uint64_t noise_seed, int steps,
                               double dt) {
  if (steps < 0) throw std::invalid_argument("diffuse: steps must be >= 0");
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("diffuse: dt must be >= 0");
  const int w = grid.width, h = grid.height;
  double lambda_max = 0.0;
  for (const SymMat& m : grid.tensors) lambda_max = std::max(lambda_max, eig_sym(m).max_value());
  if (lambda_max > 0.0 && dt > 0.2 / lambda_max)
    throw std::invalid_argument("diffuse: dt exceeds the stability bound 0.2 / lambda_max = " +
                                std::to_string(0.2 / lambda_max));

  ScalarGrid f{w, h, white_noise(static_cast<std::size_t>(w) * h, noise_seed)};
  std::vector<double> fx(f.values.size()), fy(f.values.size());
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  for (int s = 0; s < steps; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double c = f.values[idx(x, y)];
        const double gx = f.values[idx((x + 1) % w, y)] - c;
        const double gy = f.values[idx(x, (y + 1) % h)] - c;
        const SymMat& m = grid.tensors[idx(x, y)];
        fx[idx(x, y)] = m(0, 0) * gx + m(0, 1) * gy;
        fy[idx(x, y)] = m(0, 1) * gx + m(1, 1) * gy;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double div = fx[idx(x, y)] - fx[idx((x + w - 1) % w, y)] + fy[idx(x, y)] -
                           fy[idx(x, (y + h - 1) % h)];
        f.values[idx(x, y)] += dt * div;
      }
    }
  }
  return f;
}

ScalarGrid anisotropic_diffuse(const TensorMeasure& field, std::uint64_t noise_seed, int steps,
                               double dt) {
  return anisotropic_diffuse(as_grid(field), noise_seed, steps, dt);
}

}  // namespace qot
