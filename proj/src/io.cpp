#include "qot/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qot::io {

using nlohmann::json;

namespace {

std::size_t line_at_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

// Line of the first occurrence of "key", used to anchor semantic errors.
std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::size_t pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 1 : line_at_byte(text, pos);
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + msg);
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) fail(source, 1, "expected a JSON object at top level");
    return j;
  } catch (const json::parse_error& e) {
    fail(source, line_at_byte(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
}

std::int64_t require_int(const json& j, const std::string& key, const std::string& text,
                         const std::string& source, std::int64_t min_value) {
  if (!j.contains(key)) fail(source, 1, "missing key \"" + key + "\"");
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < min_value)
    fail(source, line_of_key(text, key),
         "\"" + key + "\" must be an integer >= " + std::to_string(min_value));
  return v.get<std::int64_t>();
}

const json& require_array(const json& j, const std::string& key, const std::string& text,
                          const std::string& source) {
  if (!j.contains(key)) fail(source, 1, "missing key \"" + key + "\"");
  const json& v = j.at(key);
  if (!v.is_array()) fail(source, line_of_key(text, key), "\"" + key + "\" must be an array");
  return v;
}

std::vector<double> numbers(const json& arr, std::size_t expected, const std::string& what,
                            std::size_t line, const std::string& source) {
  if (!arr.is_array() || arr.size() != expected)
    fail(source, line, what + " must be an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  out.reserve(expected);
  for (const json& x : arr) {
    if (!x.is_number()) fail(source, line, what + " contains a non-number");
    const double v = x.get<double>();
    if (!std::isfinite(v)) fail(source, line, what + " contains a non-finite value");
    out.push_back(v);
  }
  return out;
}

json packed_json(const SymMat& s) {
  json arr = json::array();
  for (double v : s.packed()) arr.push_back(v);
  return arr;
}

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

TensorMeasure parse_field(const std::string& text, const std::string& source, double psd_tol) {
  const json j = parse_json(text, source);
  const int d = static_cast<int>(require_int(j, "d", text, source, 1));
  const int n = static_cast<int>(require_int(j, "n", text, source, 1));
  const json& pts = require_array(j, "points", text, source);
  const json& tens = require_array(j, "tensors", text, source);
  if (pts.size() != tens.size())
    fail(source, line_of_key(text, "tensors"),
         "\"points\" has " + std::to_string(pts.size()) + " entries but \"tensors\" has " +
             std::to_string(tens.size()));
  if (pts.empty()) return TensorMeasure::empty(n, d);
  std::vector<Point> points;
  std::vector<PsdMat> tensors;
  points.reserve(pts.size());
  tensors.reserve(tens.size());
  const std::size_t pl = line_of_key(text, "points"), tl = line_of_key(text, "tensors");
  for (std::size_t k = 0; k < pts.size(); ++k) {
    points.push_back(numbers(pts[k], static_cast<std::size_t>(n), "point " + std::to_string(k), pl, source));
    SymMat s = SymMat::from_packed(
        d, numbers(tens[k], SymMat::packed_count(d), "tensor " + std::to_string(k), tl, source));
    if (!PsdMat::is_psd(s, psd_tol))
      fail(source, tl, "tensor " + std::to_string(k) + " is not positive semidefinite");
    tensors.push_back(PsdMat::assume(std::move(s)));
  }
  return TensorMeasure(std::move(points), std::move(tensors));
}

std::string dump_field(const TensorMeasure& field) {
  json j;
  j["d"] = field.tensor_dim();
  j["n"] = field.ambient_dim();
  j["points"] = json::array();
  j["tensors"] = json::array();
  for (std::size_t k = 0; k < field.size(); ++k) {
    j["points"].push_back(field.points()[k]);
    j["tensors"].push_back(packed_json(field.tensors()[k].mat()));
  }
  return j.dump() + "\n";
}

TensorMeasure load_field(const std::string& path, double psd_tol) {
  return parse_field(read_text(path), path, psd_tol);
}

void save_field(const std::string& path, const TensorMeasure& field) {
  write_text(path, dump_field(field));
}

CouplingFile parse_coupling(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  const auto rows = static_cast<std::size_t>(require_int(j, "rows", text, source, 0));
  const auto cols = static_cast<std::size_t>(require_int(j, "cols", text, source, 0));
  const int d = static_cast<int>(require_int(j, "d", text, source, 1));
  const json& ent = require_array(j, "entries", text, source);
  const std::size_t el = line_of_key(text, "entries");
  if (ent.size() != rows * cols)
    fail(source, el, "expected " + std::to_string(rows * cols) + " entries, got " +
                         std::to_string(ent.size()));
  std::vector<PsdMat> entries;
  entries.reserve(ent.size());
  for (std::size_t k = 0; k < ent.size(); ++k) {
    SymMat s = SymMat::from_packed(
        d, numbers(ent[k], SymMat::packed_count(d), "entry " + std::to_string(k), el, source));
    entries.push_back(PsdMat::assume(std::move(s)));
  }
  CouplingFile out{Coupling(rows, cols, std::move(entries)), std::nullopt};
  if (j.contains("threshold")) {
    if (!j.at("threshold").is_number())
      fail(source, line_of_key(text, "threshold"), "\"threshold\" must be a number");
    out.threshold = j.at("threshold").get<double>();
  }
  return out;
}

std::string dump_coupling(const Coupling& g, std::optional<double> threshold) {
  json j;
  j["rows"] = g.rows();
  j["cols"] = g.cols();
  j["d"] = g.tensor_dim();
  j["entries"] = json::array();
  for (const PsdMat& p : g.entries()) j["entries"].push_back(packed_json(p.mat()));
  if (threshold) j["threshold"] = *threshold;
  return j.dump() + "\n";
}

CouplingFile load_coupling(const std::string& path) { return parse_coupling(read_text(path), path); }

void save_coupling(const std::string& path, const Coupling& g, std::optional<double> threshold) {
  write_text(path, dump_coupling(g, threshold));
}

Coupling sparsify(const Coupling& g, double threshold) {
  double max_trace = 0.0;
  for (const PsdMat& p : g.entries()) max_trace = std::max(max_trace, p.trace());
  const double cut = threshold * max_trace;
  std::vector<PsdMat> entries;
  entries.reserve(g.entries().size());
  for (const PsdMat& p : g.entries())
    entries.push_back(p.trace() < cut ? PsdMat::assume(SymMat(p.dim())) : p);
  return Coupling(g.rows(), g.cols(), std::move(entries));
}

DistanceTable parse_distances(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  DistanceTable t;
  t.rows = static_cast<std::size_t>(require_int(j, "rows", text, source, 1));
  t.cols = static_cast<std::size_t>(require_int(j, "cols", text, source, 1));
  const json& dist = require_array(j, "distances", text, source);
  t.distances = numbers(dist, t.rows * t.cols, "\"distances\"", line_of_key(text, "distances"), source);
  for (std::size_t k = 0; k < t.distances.size(); ++k)
    if (t.distances[k] < 0.0)
      fail(source, line_of_key(text, "distances"), "distance " + std::to_string(k) + " is negative");
  return t;
}

DistanceTable load_distances(const std::string& path) {
  return parse_distances(read_text(path), path);
}

std::string dump_report(const SolveReport& report, const SolverConfig& cfg) {
  json j;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["diverged"] = report.diverged;
  j["primal_value"] = number_or_string(report.primal_value);
  j["dual_value"] = number_or_string(report.dual_value);
  json hist = json::array();
  for (double r : report.residual_history) hist.push_back(number_or_string(r));
  j["residual_history"] = std::move(hist);
  j["eps"] = cfg.eps;
  j["rho1"] = number_or_string(cfg.rho1);
  j["rho2"] = number_or_string(cfg.rho2);
  j["tau1"] = cfg.tau(1);
  j["tau2"] = cfg.tau(2);
  j["tol"] = cfg.tol;
  j["max_iter"] = cfg.max_iter;
  j["trace_constrained"] = cfg.trace_constrained;
  j["hard_marginal_rows"] = std::isinf(cfg.rho1);
  j["hard_marginal_cols"] = std::isinf(cfg.rho2);
  return j.dump(2) + "\n";
}

std::string dump_pgm(const ScalarGrid& grid) {
  std::ostringstream os;
  os << "P2\n" << grid.width << ' ' << grid.height << "\n255\n";
  double lo = 0.0, hi = 0.0;
  if (!grid.values.empty()) {
    const auto [mn, mx] = std::minmax_element(grid.values.begin(), grid.values.end());
    lo = *mn;
    hi = *mx;
  }
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const double v = grid.at(x, y);
      const int level = hi > lo ? static_cast<int>(std::lround(255.0 * (v - lo) / (hi - lo))) : 128;
      os << level << (x + 1 < grid.width ? ' ' : '\n');
    }
  }
  return os.str();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ":0: cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace qot::io
