#ifndef QOT_IO_HPP
#define QOT_IO_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qot/cost.hpp"
#include "qot/interpolate.hpp"
#include "qot/measure.hpp"
#include "qot/solver.hpp"

namespace qot::io {

/// Malformed input file; what() carries a "source:line: message" diagnostic.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor field document:
//   {"d": 2, "n": 2, "points": [[x, y], ...], "tensors": [[a00, a01, a11], ...]}
// Tensors are packed upper triangles, row-major, and must be PSD within
// psd_tol (violations name the offending index).
TensorMeasure parse_field(const std::string& text, const std::string& source = "<field>",
                          double psd_tol = kDefaultPsdTol);
std::string dump_field(const TensorMeasure& field);
TensorMeasure load_field(const std::string& path, double psd_tol = kDefaultPsdTol);
void save_field(const std::string& path, const TensorMeasure& field);

// Coupling document:
//   {"rows": I, "cols": J, "d": d, "entries": [[packed], ...], "threshold": t?}
// Entries are row-major over (i, j).
struct CouplingFile {
  Coupling coupling;
  std::optional<double> threshold;
};
CouplingFile parse_coupling(const std::string& text, const std::string& source = "<coupling>");
std::string dump_coupling(const Coupling& g, std::optional<double> threshold = std::nullopt);
CouplingFile load_coupling(const std::string& path);
void save_coupling(const std::string& path, const Coupling& g,
                   std::optional<double> threshold = std::nullopt);

/// Zeroes entries with trace below threshold * max trace.
Coupling sparsify(const Coupling& g, double threshold);

// Distance table: {"rows": I, "cols": J, "distances": [row-major reals]}
struct DistanceTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> distances;
};
DistanceTable parse_distances(const std::string& text, const std::string& source = "<distances>");
DistanceTable load_distances(const std::string& path);

/// Solve report: iterations, residual history, primal/dual values and the
/// configuration used. Infinite values are written as the strings "inf" /
/// "-inf".
std::string dump_report(const SolveReport& report, const SolverConfig& cfg);

/// Plain (ASCII) portable graymap, values min-max normalized to 0..255.
std::string dump_pgm(const ScalarGrid& grid);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace qot::io

#endif  // QOT_IO_HPP
