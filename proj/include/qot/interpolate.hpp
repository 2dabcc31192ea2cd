#ifndef QOT_INTERPOLATE_HPP
#define QOT_INTERPOLATE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "qot/measure.hpp"
#include "qot/symmat.hpp"

namespace qot {

struct InterpolationParams {
  double t = 0.0;
  /// Pairs with tr g_ij below trace_threshold * max_ij tr g_ij are dropped.
  double trace_threshold = 1e-8;
  /// Unset: no merging. 0: atoms at identical positions are merged. r > 0:
  /// an atom joins the first earlier cluster within distance r.
  std::optional<double> merge_radius;
  /// Keep the unsymmetrized products [(1-t) mu_bar_i + t nu_bar_j] g_ij.
  bool keep_raw = false;
};

struct Interpolation {
  TensorMeasure measure;
  /// Only filled when keep_raw is set; one entry per surviving pair, before
  /// merging.
  std::vector<DenseMat> raw;
};

/// Displacement interpolation of (mu, nu) along the coupling g at time t.
/// Each surviving pair produces an atom at (1-t) x_i + t y_j carrying the
/// symmetric part of the marginal-adjusted pair tensor; merged atoms are
/// projected onto the PSD cone last.
Interpolation displacement_interpolate(const TensorMeasure& mu, const TensorMeasure& nu,
                                       const Coupling& g, const InterpolationParams& p);

/// tr(P + Q - 2 exp(log P / 2 + log Q / 2))^{1/2}. Throws std::runtime_error
/// when the radicand is below -1e-9.
double single_dirac_distance(const PsdMat& p, const PsdMat& q);

/// Scalar field on a w x h grid, row-major (index y * width + x).
struct ScalarGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Tensor field arranged on a regular grid.
struct TensorGrid {
  int width = 0;
  int height = 0;
  std::vector<SymMat> tensors;  // row-major, d = 2
};

/// Recovers the w x h lattice behind a 2-D measure whose points form a
/// regular grid. Throws std::invalid_argument otherwise.
TensorGrid as_grid(const TensorMeasure& field);

/// Explicit Euler for df/dt = div(mu grad f) with forward differences for
/// the gradient, backward differences for the divergence, periodic
/// boundaries and unit grid spacing, started from seeded white noise in
/// [0, 1). Rejects dt > 0.2 / lambda_max(mu).
ScalarGrid anisotropic_diffuse(const TensorMeasure& field, std::uint64_t noise_seed, int steps,
                               double dt);
ScalarGrid anisotropic_diffuse(const TensorGrid& grid, std::uint64_t noise_seed, int steps,
                               double dt);

/// Seeded white noise in [0, 1), identical on every platform.
std::vector<double> white_noise(std::size_t n, std::uint64_t seed);

}  // namespace qot

#endif  // QOT_INTERPOLATE_HPP
