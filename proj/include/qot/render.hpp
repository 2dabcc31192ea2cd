#ifndef QOT_RENDER_HPP
#define QOT_RENDER_HPP

#include <optional>
#include <string>

#include "qot/measure.hpp"

namespace qot {

struct RenderOptions {
  /// Semi-axis length per unit eigenvalue, in field coordinates. When unset
  /// it is chosen so the largest glyph spans ~0.45 of the atom spacing.
  std::optional<double> scale;
  /// Draw every k-th atom.
  int subsample = 1;
  /// Output width in pixels; height follows the aspect ratio.
  int pixels = 512;
};

/// Ellipse glyph per atom: centered at the point, semi-axes scale * eigenvalue
/// along the eigenvectors. 3x3 tensors are drawn through their X/Y block.
/// Throws std::invalid_argument for d > 3. Output bytes depend only on the
/// inputs.
std::string render_svg(const TensorMeasure& field, const RenderOptions& opts = {});

}  // namespace qot

#endif  // QOT_RENDER_HPP
