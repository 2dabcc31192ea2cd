#include "qot/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qot {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

SymMat planar_block(const SymMat& s) {
  if (s.dim() <= 2) return s;
  SymMat b(2);
  b.ref(0, 0) = s(0, 0);
  b.ref(0, 1) = s(0, 1);
  b.ref(1, 1) = s(1, 1);
  return b;
}

struct Glyph {
  double x, y;   // y already flipped so that +y points up
  double rx, ry;
  double angle;  // degrees, SVG convention
};

}  // namespace

std::string render_svg(const TensorMeasure& field, const RenderOptions& opts) {
  if (field.tensor_dim() > 3) throw std::invalid_argument("render: tensor dimension must be <= 3");
  if (opts.subsample < 1) throw std::invalid_argument("render: subsample must be >= 1");

  const std::size_t n = field.size();
  double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0, lambda_max = 0;
  std::vector<std::pair<double, double>> centers;
  std::vector<EigenPair> eigs;
  for (std::size_t k = 0; k < n; k += static_cast<std::size_t>(opts.subsample)) {
    const Point& p = field.points()[k];
    const double x = p.empty() ? 0.0 : p[0];
    const double y = p.size() > 1 ? p[1] : 0.0;
    centers.emplace_back(x, -y);
    eigs.push_back(eig_sym(planar_block(field.tensors()[k].mat())));
    lambda_max = std::max(lambda_max, eigs.back().max_value());
  }
  if (!centers.empty()) {
    lo_x = hi_x = centers.front().first;
    lo_y = hi_y = centers.front().second;
    for (const auto& [x, y] : centers) {
      lo_x = std::min(lo_x, x);
      hi_x = std::max(hi_x, x);
      lo_y = std::min(lo_y, y);
      hi_y = std::max(hi_y, y);
    }
  }
  const double extent = std::max(hi_x - lo_x, hi_y - lo_y);
  double scale = 1.0;
  if (opts.scale) {
    scale = *opts.scale;
  } else {
    const bool planar = hi_y > lo_y && hi_x > lo_x;
    const double per_axis = planar ? std::sqrt(static_cast<double>(n)) : static_cast<double>(n);
    const double spacing = extent > 0.0 ? extent / std::max(1.0, per_axis - 1.0) : 1.0;
    scale = 0.45 * spacing / (lambda_max > 0.0 ? lambda_max : 1.0);
  }

  std::vector<Glyph> glyphs;
  double reach = 0.0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const EigenPair& e = eigs[k];
    Glyph g{centers[k].first, centers[k].second, scale * std::max(e.values[0], 0.0), 0.0, 0.0};
    if (e.dim >= 2) {
      g.ry = scale * std::max(e.values[1], 0.0);
      // Flipped y axis: the on-screen angle is the negated field angle.
      g.angle = -std::atan2(e.vec(1, 0), e.vec(0, 0)) * 180.0 / 3.14159265358979323846;
    } else {
      g.ry = g.rx;
    }
    reach = std::max(reach, std::max(g.rx, g.ry));
    glyphs.push_back(g);
  }

  const double pad = reach + 0.02 * (extent > 0.0 ? extent : 1.0);
  const double vx = lo_x - pad, vy = lo_y - pad;
  const double vw = (hi_x - lo_x) + 2 * pad, vh = (hi_y - lo_y) + 2 * pad;
  const int width = opts.pixels;
  const int height = std::max(1, static_cast<int>(std::lround(opts.pixels * vh / vw)));

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"" << num(vx) << ' ' << num(vy) << ' ' << num(vw) << ' ' << num(vh) << "\">\n";
  if (field.tensor_dim() == 3) os << "<!-- only the X/Y components of the tensors are displayed -->\n";
  os << "<rect x=\"" << num(vx) << "\" y=\"" << num(vy) << "\" width=\"" << num(vw)
     << "\" height=\"" << num(vh) << "\" fill=\"white\"/>\n";
  os << "<g fill=\"#2f5fb3\" fill-opacity=\"0.7\" stroke=\"#1b3566\" stroke-width=\""
     << num(0.002 * vw) << "\">\n";
  for (const Glyph& g : glyphs) {
    if (g.rx == g.ry) {
      os << "<circle cx=\"" << num(g.x) << "\" cy=\"" << num(g.y) << "\" r=\"" << num(g.rx)
         << "\"/>\n";
    } else {
      os << "<ellipse cx=\"" << num(g.x) << "\" cy=\"" << num(g.y) << "\" rx=\"" << num(g.rx)
         << "\" ry=\"" << num(g.ry) << "\" transform=\"rotate(" << num(g.angle) << ' '
         << num(g.x) << ' ' << num(g.y) << ")\"/>\n";
    }
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace qot
