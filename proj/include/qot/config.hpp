#ifndef QOT_CONFIG_HPP
#define QOT_CONFIG_HPP

#include <cmath>
#include <limits>
#include <optional>

namespace qot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Coefficient multiplying a dual potential inside the kernel. A hard
/// marginal (rho = +inf) keeps its potential pre-scaled, so it enters with 1.
inline double potential_coefficient(double rho) { return std::isinf(rho) ? 1.0 : rho; }

struct SolverConfig {
  double eps = 0.08 * 0.08;
  double rho1 = 1.0;
  double rho2 = 1.0;
  /// Explicit relaxations; when unset, tau_k = relax * eps / (eps + rho_k),
  /// and tau_k = relax for a hard marginal (the rho -> inf limit of the same
  /// rule applied to the pre-scaled potential).
  std::optional<double> tau1;
  std::optional<double> tau2;
  double relax = 1.8;
  int max_iter = 10000;
  double tol = 1e-9;
  bool trace_constrained = false;
  /// Step multiplier on the trace multiplier updates (1 = undamped).
  double trace_damping = 1.0;
  double psd_tol = 1e-10;
  /// Relative marginal mismatch tolerated by the hard-constraint indicator
  /// when evaluating the primal objective with rho = +inf.
  double hard_tol = 1e-6;

  double tau(int side) const {
    const std::optional<double>& explicit_tau = side == 1 ? tau1 : tau2;
    if (explicit_tau) return *explicit_tau;
    const double rho = side == 1 ? rho1 : rho2;
    if (std::isinf(rho)) return relax;
    return relax * eps / (eps + rho);
  }

  /// Throws std::invalid_argument on eps <= 0, rho <= 0, tau <= 0 or
  /// max_iter < 1.
  void validate() const;
};

}  // namespace qot

#endif  // QOT_CONFIG_HPP
