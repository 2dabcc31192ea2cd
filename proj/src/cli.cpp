#include "qot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "qot/barycenter.hpp"
#include "qot/config.hpp"
#include "qot/cost.hpp"
#include "qot/interpolate.hpp"
#include "qot/io.hpp"
#include "qot/render.hpp"
#include "qot/solver.hpp"

namespace qot::cli {

namespace {

// Input problems detected after argument parsing.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_rho(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "inf" || lower == "+inf" || lower == "infinity") return kInf;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("invalid rho value '" + s + "'");
  }
  if (used != s.size()) throw InputError("invalid rho value '" + s + "'");
  return v;
}

struct SolverFlags {
  double eps = 0.08 * 0.08;
  std::string rho1 = "1";
  std::string rho2 = "1";
  std::optional<double> tau1;
  std::optional<double> tau2;
  double relax = 1.8;
  int max_iter = 10000;
  double tol = 1e-9;
  bool trace = false;

  void attach(CLI::App* cmd, bool with_rhos = true) {
    cmd->add_option("--eps", eps, "Entropic regularization strength")->capture_default_str();
    if (with_rhos) {
      cmd->add_option("--rho1", rho1, "Row marginal penalty (number or inf)")->capture_default_str();
      cmd->add_option("--rho2", rho2, "Column marginal penalty (number or inf)")->capture_default_str();
      cmd->add_flag("--trace-constrained", trace, "Impose the marginal traces exactly");
    }
    cmd->add_option("--tau1", tau1, "Explicit relaxation for the first potential");
    cmd->add_option("--tau2", tau2, "Explicit relaxation for the second potential");
    cmd->add_option("--relax", relax, "Default relaxation multiplier")->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "Iteration cap")->capture_default_str();
    cmd->add_option("--tol", tol, "Stopping tolerance on the fixed-point residual of v")
        ->capture_default_str();
  }

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.eps = eps;
    cfg.rho1 = parse_rho(rho1);
    cfg.rho2 = parse_rho(rho2);
    cfg.tau1 = tau1;
    cfg.tau2 = tau2;
    cfg.relax = relax;
    cfg.max_iter = max_iter;
    cfg.tol = tol;
    cfg.trace_constrained = trace;
    return cfg;
  }
};

struct CostFlags {
  std::string cost_file;
  double alpha = 2.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--cost", cost_file, "Distance table file (raised to --alpha)");
    cmd->add_option("--alpha", alpha, "Exponent of the ground distance")->capture_default_str();
  }

  GroundCost build(const TensorMeasure& mu, const TensorMeasure& nu) const {
    if (!cost_file.empty()) {
      const io::DistanceTable t = io::load_distances(cost_file);
      if (t.rows != mu.size() || t.cols != nu.size())
        throw InputError(cost_file + ": distance table is " + std::to_string(t.rows) + "x" +
                         std::to_string(t.cols) + " but the measures are " +
                         std::to_string(mu.size()) + "x" + std::to_string(nu.size()));
      return from_distance_matrix(t.rows, t.cols, t.distances, alpha);
    }
    if (mu.ambient_dim() != nu.ambient_dim())
      throw InputError("mu and nu live in spaces of different dimension");
    return euclidean_cost(mu.points(), nu.points(), alpha);
  }
};

void check_pair(const TensorMeasure& mu, const TensorMeasure& nu) {
  if (mu.size() == 0 || nu.size() == 0) throw InputError("input measures must be non-empty");
  if (mu.tensor_dim() != nu.tensor_dim())
    throw InputError("mu has tensor dimension " + std::to_string(mu.tensor_dim()) +
                     " but nu has " + std::to_string(nu.tensor_dim()));
}

std::string svg_path(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ".svg";
  return path.substr(0, dot) + ".svg";
}

std::string fixed12(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(12) << v;
  return os.str();
}

int cmd_transport(const SolverFlags& sf, const CostFlags& cf, const std::string& mu_path,
                  const std::string& nu_path, const std::string& out_path,
                  const std::string& report_path, std::optional<double> threshold,
                  std::ostream& out) {
  const TensorMeasure mu = io::load_field(mu_path);
  const TensorMeasure nu = io::load_field(nu_path);
  check_pair(mu, nu);
  const SolverConfig cfg = sf.config();
  const GroundCost cost = cf.build(mu, nu);
  const SolveResult res = sinkhorn_solve(mu, nu, cost, cfg);
  const Coupling g = threshold ? io::sparsify(res.coupling, *threshold) : res.coupling;
  io::save_coupling(out_path, g, threshold);
  if (!report_path.empty()) io::write_text(report_path, io::dump_report(res.report, cfg));
  out << "iterations " << res.report.iterations << (res.report.converged ? " converged" : " not-converged")
      << "\n";
  if (std::isinf(cfg.rho1) || std::isinf(cfg.rho2)) out << "hard marginal constraint engaged\n";
  return res.report.converged ? kExitOk : kExitNotConverged;
}

int cmd_interpolate(const std::string& mu_path, const std::string& nu_path,
                    const std::string& coupling_path, std::optional<double> t, std::optional<int> steps,
                    const std::string& pattern, bool render, double threshold, double merge_radius,
                    std::optional<double> scale) {
  if (t.has_value() == steps.has_value()) throw InputError("give exactly one of --t and --steps");
  if (t && !(*t >= 0.0 && *t <= 1.0)) throw InputError("--t must lie in [0, 1]");
  if (steps && *steps < 1) throw InputError("--steps must be >= 1");
  const TensorMeasure mu = io::load_field(mu_path);
  const TensorMeasure nu = io::load_field(nu_path);
  check_pair(mu, nu);
  const io::CouplingFile cf = io::load_coupling(coupling_path);
  std::vector<double> times;
  if (t) {
    times.push_back(*t);
  } else if (*steps == 1) {
    times.push_back(0.0);
  } else {
    for (int k = 0; k < *steps; ++k) times.push_back(static_cast<double>(k) / (*steps - 1));
  }
  InterpolationParams p;
  p.trace_threshold = threshold;
  if (merge_radius >= 0.0) p.merge_radius = merge_radius;
  for (std::size_t k = 0; k < times.size(); ++k) {
    p.t = times[k];
    const Interpolation frame = displacement_interpolate(mu, nu, cf.coupling, p);
    const std::string path = expand_pattern(pattern, k, times.size());
    io::save_field(path, frame.measure);
    if (render) {
      RenderOptions ro;
      ro.scale = scale;
      io::write_text(svg_path(path), render_svg(frame.measure, ro));
    }
  }
  return kExitOk;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_barycenter(const SolverFlags& sf, double alpha, double rho, const std::string& inputs,
                   const std::string& weights, std::optional<int> grid, const std::string& support,
                   const std::string& pattern, bool render, std::ostream& out) {
  const std::vector<std::string> files = split_commas(inputs);
  if (files.empty()) throw InputError("--inputs needs at least one file");
  std::vector<TensorMeasure> measures;
  for (const std::string& f : files) measures.push_back(io::load_field(f));
  for (const TensorMeasure& m : measures) check_pair(measures.front(), m);

  std::vector<std::vector<double>> weight_sets;
  if (grid) {
    if (!weights.empty()) throw InputError("give either --weights or --grid");
    if (files.size() != 4) throw InputError("--grid needs exactly four inputs");
    if (*grid < 1) throw InputError("--grid must be >= 1");
    const int k = *grid;
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) {
        const double t1 = k == 1 ? 0.0 : static_cast<double>(r) / (k - 1);
        const double t2 = k == 1 ? 0.0 : static_cast<double>(c) / (k - 1);
        const auto w = bilinear_weights(t1, t2);
        weight_sets.emplace_back(w.begin(), w.end());
      }
  } else {
    std::vector<double> w;
    for (const std::string& tok : split_commas(weights)) {
      try {
        w.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw InputError("invalid weight '" + tok + "'");
      }
    }
    if (w.size() != files.size())
      throw InputError("expected " + std::to_string(files.size()) + " weights");
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw InputError("weights must be >= 0");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("weights must sum to 1");
    for (double& x : w) x /= total;
    weight_sets.push_back(std::move(w));
  }

  BarycenterProblem prob;
  prob.inputs = measures;
  prob.rho = rho;
  prob.support = support.empty() ? measures.front().points() : io::load_field(support).points();
  for (const TensorMeasure& m : measures) {
    if (!prob.support.empty() && m.ambient_dim() != static_cast<int>(prob.support.front().size()))
      throw InputError("inputs and support live in spaces of different dimension");
    prob.costs.push_back(euclidean_cost(m.points(), prob.support, alpha));
  }
  SolverConfig cfg = sf.config();
  bool all_converged = true;
  for (std::size_t k = 0; k < weight_sets.size(); ++k) {
    prob.weights = weight_sets[k];
    const BarycenterResult res = barycenter_solve(prob, cfg);
    all_converged = all_converged && res.report.converged;
    const std::string path = expand_pattern(pattern, k, weight_sets.size());
    io::save_field(path, res.barycenter);
    if (render) io::write_text(svg_path(path), render_svg(res.barycenter));
    out << path << " iterations " << res.report.iterations
        << (res.report.converged ? " converged" : " not-converged") << "\n";
  }
  return all_converged ? kExitOk : kExitNotConverged;
}

int cmd_distance(const SolverFlags& sf, const CostFlags& cf, const std::string& mu_path,
                 const std::string& nu_path, const std::vector<std::size_t>& pointwise,
                 std::ostream& out) {
  const TensorMeasure mu = io::load_field(mu_path);
  const TensorMeasure nu = io::load_field(nu_path);
  check_pair(mu, nu);
  if (!pointwise.empty()) {
    if (pointwise.size() != 2) throw InputError("--pointwise takes two indices");
    if (pointwise[0] >= mu.size() || pointwise[1] >= nu.size())
      throw InputError("--pointwise index out of range");
  }
  const SolverConfig cfg = sf.config();
  const SolveResult res = sinkhorn_solve(mu, nu, cf.build(mu, nu), cfg);
  out << "W_eps " << fixed12(res.report.primal_value) << "\n";
  if (!pointwise.empty())
    out << "D " << fixed12(single_dirac_distance(mu.tensors()[pointwise[0]], nu.tensors()[pointwise[1]]))
        << "\n";
  return res.report.converged ? kExitOk : kExitNotConverged;
}

int cmd_render(const std::string& field_path, const std::string& out_path, std::optional<double> scale,
               int subsample) {
  const TensorMeasure field = io::load_field(field_path);
  RenderOptions ro;
  ro.scale = scale;
  ro.subsample = subsample;
  io::write_text(out_path, render_svg(field, ro));
  return kExitOk;
}

int cmd_noise(const std::string& field_path, std::uint64_t seed, int steps, std::optional<double> dt,
              const std::string& out_path) {
  const TensorMeasure field = io::load_field(field_path);
  const TensorGrid grid = as_grid(field);
  double step = 0.0;
  if (dt) {
    step = *dt;
  } else {
    double lambda_max = 0.0;
    for (const SymMat& m : grid.tensors) lambda_max = std::max(lambda_max, eig_sym(m).max_value());
    step = lambda_max > 0.0 ? 0.2 / lambda_max : 0.0;
  }
  io::write_text(out_path, io::dump_pgm(anisotropic_diffuse(grid, seed, steps, step)));
  return kExitOk;
}

}  // namespace

std::string expand_pattern(const std::string& pattern, std::size_t index, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(count > 0 ? count - 1 : 0).size());
  std::string idx = std::to_string(index);
  idx.insert(0, width > idx.size() ? width - idx.size() : 0, '0');
  const std::size_t brace = pattern.find("{}");
  if (brace != std::string::npos) return pattern.substr(0, brace) + idx + pattern.substr(brace + 2);
  if (count <= 1) return pattern;
  const std::size_t slash = pattern.find_last_of('/');
  const std::size_t dot = pattern.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return pattern + "_" + idx;
  return pattern.substr(0, dot) + "_" + idx + pattern.substr(dot);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal transport between tensor-valued measures", "qot"};
  app.require_subcommand(1);

  // transport
  auto* transport = app.add_subcommand("transport", "Solve the regularized transport problem");
  SolverFlags t_solver;
  CostFlags t_cost;
  std::string t_mu, t_nu, t_out, t_report;
  std::optional<double> t_threshold;
  transport->add_option("--mu", t_mu, "Source tensor field")->required();
  transport->add_option("--nu", t_nu, "Target tensor field")->required();
  transport->add_option("--out", t_out, "Coupling output file")->required();
  transport->add_option("--report", t_report, "Solve report output file");
  transport->add_option("--threshold", t_threshold, "Relative trace threshold applied to the saved coupling");
  t_solver.attach(transport);
  t_cost.attach(transport);

  // interpolate
  auto* interp = app.add_subcommand("interpolate", "Displacement interpolation from a coupling");
  std::string i_mu, i_nu, i_coupling, i_out;
  std::optional<double> i_t, i_scale;
  std::optional<int> i_steps;
  bool i_render = false;
  double i_threshold = 1e-8, i_merge = 0.0;
  interp->add_option("--mu", i_mu)->required();
  interp->add_option("--nu", i_nu)->required();
  interp->add_option("--coupling", i_coupling)->required();
  interp->add_option("--t", i_t, "Single interpolation time in [0, 1]");
  interp->add_option("--steps", i_steps, "Number of evenly spaced frames from t=0 to t=1");
  interp->add_option("--out", i_out, "Output path or pattern with {}")->required();
  interp->add_flag("--render", i_render, "Also write an SVG per frame");
  interp->add_option("--threshold", i_threshold, "Relative pair-trace threshold")->capture_default_str();
  interp->add_option("--merge-radius", i_merge, "Merge atoms closer than this (negative: off)")
      ->capture_default_str();
  interp->add_option("--scale", i_scale, "Glyph scale for --render");

  // barycenter
  auto* bary = app.add_subcommand("barycenter", "Weighted barycenter of several tensor fields");
  SolverFlags b_solver;
  std::string b_inputs, b_weights, b_support, b_out;
  std::optional<int> b_grid;
  double b_alpha = 2.0, b_rho = 1.0;
  bool b_render = false;
  bary->add_option("--inputs", b_inputs, "Comma-separated input fields")->required();
  bary->add_option("--weights", b_weights, "Comma-separated weights summing to 1");
  bary->add_option("--grid", b_grid, "K x K bilinear weight lattice over four inputs");
  bary->add_option("--support", b_support, "Field whose points form the barycenter support");
  bary->add_option("--rho", b_rho, "Fidelity penalty")->capture_default_str();
  bary->add_option("--alpha", b_alpha, "Exponent of the Euclidean ground distance")->capture_default_str();
  bary->add_option("--out", b_out, "Output path or pattern with {}")->required();
  bary->add_flag("--render", b_render, "Also write an SVG per barycenter");
  b_solver.attach(bary, false);

  // distance
  auto* dist = app.add_subcommand("distance", "Print the regularized transport value");
  SolverFlags d_solver;
  CostFlags d_cost;
  std::string d_mu, d_nu;
  std::vector<std::size_t> d_pointwise;
  dist->add_option("--mu", d_mu)->required();
  dist->add_option("--nu", d_nu)->required();
  dist->add_option("--pointwise", d_pointwise, "Also print D(mu_i, nu_j) for indices i j")
      ->expected(2);
  d_solver.attach(dist);
  d_cost.attach(dist);

  // render
  auto* rend = app.add_subcommand("render", "Draw a tensor field as SVG ellipses");
  std::string r_field, r_out;
  std::optional<double> r_scale;
  int r_sub = 1;
  rend->add_option("--field", r_field)->required();
  rend->add_option("--out", r_out)->required();
  rend->add_option("--scale", r_scale, "Semi-axis length per unit eigenvalue");
  rend->add_option("--subsample", r_sub, "Draw every k-th atom")->capture_default_str();

  // noise
  auto* noise = app.add_subcommand("noise", "Anisotropic diffusion texture guided by a grid field");
  std::string n_field, n_out;
  std::uint64_t n_seed = 0;
  int n_steps = 50;
  std::optional<double> n_dt;
  noise->add_option("--field", n_field)->required();
  noise->add_option("--seed", n_seed)->capture_default_str();
  noise->add_option("--steps", n_steps)->capture_default_str();
  noise->add_option("--dt", n_dt, "Time step (default 0.2 / lambda_max)");
  noise->add_option("--out", n_out, "Output PGM file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*transport)
      return cmd_transport(t_solver, t_cost, t_mu, t_nu, t_out, t_report, t_threshold, out);
    if (*interp)
      return cmd_interpolate(i_mu, i_nu, i_coupling, i_t, i_steps, i_out, i_render, i_threshold,
                             i_merge, i_scale);
    if (*bary)
      return cmd_barycenter(b_solver, b_alpha, b_rho, b_inputs, b_weights, b_grid, b_support, b_out,
                            b_render, out);
    if (*dist) return cmd_distance(d_solver, d_cost, d_mu, d_nu, d_pointwise, out);
    if (*rend) return cmd_render(r_field, r_out, r_scale, r_sub);
    if (*noise) return cmd_noise(n_field, n_seed, n_steps, n_dt, n_out);
  } catch (const io::FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace qot::cli
