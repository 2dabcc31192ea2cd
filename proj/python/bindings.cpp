#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qot/barycenter.hpp"
#include "qot/cost.hpp"
#include "qot/interpolate.hpp"
#include "qot/io.hpp"
#include "qot/render.hpp"
#include "qot/solver.hpp"

namespace py = pybind11;
using namespace qot;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Fields cross the boundary as (points[n, k], tensors[n, d, d]).

std::vector<Point> to_points(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("points must have shape (n, k)");
  auto r = a.unchecked<2>();
  std::vector<Point> pts(static_cast<std::size_t>(r.shape(0)), Point(static_cast<std::size_t>(r.shape(1))));
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t k = 0; k < r.shape(1); ++k) pts[i][k] = r(i, k);
  return pts;
}

SymMat to_sym(const double* p, int d, const char* what) {
  SymMat s(d);
  double scale = 0.0;
  for (int k = 0; k < d * d; ++k) scale = std::max(scale, std::abs(p[k]));
  for (int r = 0; r < d; ++r)
    for (int c = r; c < d; ++c) {
      if (std::abs(p[r * d + c] - p[c * d + r]) > 1e-12 * (1.0 + scale))
        throw std::invalid_argument(std::string(what) + " must be symmetric");
      s.ref(r, c) = p[r * d + c];
    }
  return s;
}

std::vector<SymMat> to_syms(const Array& a, int expect_ndim, const char* what) {
  if (a.ndim() != expect_ndim || a.shape(expect_ndim - 1) != a.shape(expect_ndim - 2))
    throw std::invalid_argument(std::string(what) + " must be a stack of square matrices");
  const int d = static_cast<int>(a.shape(expect_ndim - 1));
  const std::size_t n = static_cast<std::size_t>(a.size()) / (static_cast<std::size_t>(d) * d);
  std::vector<SymMat> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(to_sym(a.data() + k * d * d, d, what));
  return out;
}

TensorMeasure to_measure(const Array& points, const Array& tensors) {
  if (tensors.ndim() != 3) throw std::invalid_argument("tensors must have shape (n, d, d)");
  std::vector<Point> pts = to_points(points);
  std::vector<PsdMat> ts;
  for (SymMat& s : to_syms(tensors, 3, "tensors")) ts.push_back(PsdMat::make(std::move(s)));
  if (pts.empty() && ts.empty())
    return TensorMeasure::empty(static_cast<int>(points.shape(1)), static_cast<int>(tensors.shape(2)));
  return TensorMeasure(std::move(pts), std::move(ts));
}

py::array_t<double> from_syms(const std::vector<SymMat>& ms, std::vector<py::ssize_t> lead, int d) {
  lead.push_back(d);
  lead.push_back(d);
  py::array_t<double> out(lead);
  double* p = out.mutable_data();
  for (const SymMat& m : ms)
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) *p++ = m(r, c);
  return out;
}

py::array_t<double> from_psds(const std::vector<PsdMat>& ms, std::vector<py::ssize_t> lead, int d) {
  std::vector<SymMat> plain;
  plain.reserve(ms.size());
  for (const PsdMat& m : ms) plain.push_back(m.mat());
  return from_syms(plain, std::move(lead), d);
}

py::array_t<double> from_points(const std::vector<Point>& pts, std::size_t ambient) {
  py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), static_cast<py::ssize_t>(ambient)});
  double* p = out.mutable_data();
  for (const Point& x : pts)
    for (double v : x) *p++ = v;
  return out;
}

py::tuple from_measure(const TensorMeasure& m) {
  return py::make_tuple(from_points(m.points(), static_cast<std::size_t>(m.ambient_dim())),
                        from_psds(m.tensors(), {static_cast<py::ssize_t>(m.size())}, m.tensor_dim()));
}

Coupling to_coupling(const Array& g) {
  if (g.ndim() != 4) throw std::invalid_argument("coupling must have shape (I, J, d, d)");
  std::vector<PsdMat> entries;
  for (SymMat& s : to_syms(g, 4, "coupling entries")) entries.push_back(PsdMat::make(std::move(s)));
  return Coupling(static_cast<std::size_t>(g.shape(0)), static_cast<std::size_t>(g.shape(1)), std::move(entries));
}

SolverConfig make_config(double eps, double rho1, double rho2, std::optional<double> tau1,
                         std::optional<double> tau2, double relax, int max_iter, double tol,
                         bool trace_constrained) {
  SolverConfig cfg;
  cfg.eps = eps;
  cfg.rho1 = rho1;
  cfg.rho2 = rho2;
  cfg.tau1 = tau1;
  cfg.tau2 = tau2;
  cfg.relax = relax;
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  cfg.trace_constrained = trace_constrained;
  return cfg;
}

py::dict report_dict(const SolveReport& r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["diverged"] = r.diverged;
  d["primal_value"] = r.primal_value;
  d["dual_value"] = r.dual_value;
  d["residual_history"] = r.residual_history;
  return d;
}

GroundCost pick_cost(const TensorMeasure& mu, const TensorMeasure& nu, const std::optional<Array>& distances,
                     double alpha) {
  if (!distances) return euclidean_cost(mu.points(), nu.points(), alpha);
  const Array& t = *distances;
  if (t.ndim() != 2 || static_cast<std::size_t>(t.shape(0)) != mu.size() ||
      static_cast<std::size_t>(t.shape(1)) != nu.size())
    throw std::invalid_argument("distances must have shape (len(mu), len(nu))");
  const std::span<const double> table(t.data(), static_cast<std::size_t>(t.size()));
  return from_distance_matrix(mu.size(), nu.size(), table, alpha);
}

py::dict solve(const Array& mu_points, const Array& mu_tensors, const Array& nu_points, const Array& nu_tensors,
               double eps, double rho1, double rho2, std::optional<double> tau1, std::optional<double> tau2,
               double relax, int max_iter, double tol, bool trace_constrained, double alpha,
               const std::optional<Array>& distances) {
  const TensorMeasure mu = to_measure(mu_points, mu_tensors), nu = to_measure(nu_points, nu_tensors);
  const GroundCost cost = pick_cost(mu, nu, distances, alpha);
  const SolverConfig cfg = make_config(eps, rho1, rho2, tau1, tau2, relax, max_iter, tol, trace_constrained);
  SolveResult r;
  {
    py::gil_scoped_release release;
    r = sinkhorn_solve(mu, nu, cost, cfg);
  }
  const int d = mu.tensor_dim();
  py::dict out = report_dict(r.report);
  out["coupling"] = from_psds(r.coupling.entries(),
                              {static_cast<py::ssize_t>(mu.size()), static_cast<py::ssize_t>(nu.size())}, d);
  out["u"] = from_syms(r.state.u, {static_cast<py::ssize_t>(mu.size())}, d);
  out["v"] = from_syms(r.state.v, {static_cast<py::ssize_t>(nu.size())}, d);
  out["alpha"] = r.state.alpha;
  out["beta"] = r.state.beta;
  return out;
}

py::dict barycenter(const std::vector<std::pair<Array, Array>>& inputs, const std::vector<double>& weights,
                    const Array& support, double rho, double eps, double alpha, std::optional<double> tau1,
                    std::optional<double> tau2, double relax, int max_iter, double tol) {
  BarycenterProblem prob;
  prob.support = to_points(support);
  for (const auto& [pts, ts] : inputs) {
    prob.inputs.push_back(to_measure(pts, ts));
    prob.costs.push_back(euclidean_cost(prob.inputs.back().points(), prob.support, alpha));
  }
  prob.weights = weights;
  prob.rho = rho;
  const SolverConfig cfg = make_config(eps, 1.0, kInf, tau1, tau2, relax, max_iter, tol, false);
  BarycenterResult r;
  {
    py::gil_scoped_release release;
    r = barycenter_solve(prob, cfg);
  }
  py::dict out = report_dict(r.report);
  const int d = r.barycenter.tensor_dim();
  out["tensors"] = from_psds(r.barycenter.tensors(), {static_cast<py::ssize_t>(r.barycenter.size())}, d);
  out["points"] = from_points(r.barycenter.points(), static_cast<std::size_t>(r.barycenter.ambient_dim()));
  py::list us, vs;
  for (std::size_t l = 0; l < r.u.size(); ++l) {
    us.append(from_syms(r.u[l], {static_cast<py::ssize_t>(r.u[l].size())}, d));
    vs.append(from_syms(r.v[l], {static_cast<py::ssize_t>(r.v[l].size())}, d));
  }
  out["u"] = us;
  out["v"] = vs;
  return out;
}

py::tuple interpolate(const Array& mu_points, const Array& mu_tensors, const Array& nu_points,
                      const Array& nu_tensors, const Array& coupling, double t, double threshold,
                      std::optional<double> merge_radius) {
  InterpolationParams p;
  p.t = t;
  p.trace_threshold = threshold;
  p.merge_radius = merge_radius;
  const TensorMeasure m = displacement_interpolate(to_measure(mu_points, mu_tensors),
                                                   to_measure(nu_points, nu_tensors), to_coupling(coupling), p)
                              .measure;
  return from_measure(m);
}

}  // namespace

PYBIND11_MODULE(_qot, m) {
  m.doc() = "Entropic transport of tensor-valued measures";

  static py::exception<io::FormatError> format_error(m, "FormatError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const io::FormatError& e) {
      PyErr_SetString(format_error.ptr(), e.what());
    } catch (const std::domain_error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("sinkhorn_solve", &solve, py::arg("mu_points"), py::arg("mu_tensors"), py::arg("nu_points"),
        py::arg("nu_tensors"), py::arg("eps") = 0.0064, py::arg("rho1") = 1.0, py::arg("rho2") = 1.0,
        py::arg("tau1") = py::none(), py::arg("tau2") = py::none(), py::arg("relax") = 1.8,
        py::arg("max_iter") = 10000, py::arg("tol") = 1e-9, py::arg("trace_constrained") = false,
        py::arg("alpha") = 2.0, py::arg("distances") = py::none(),
        "Solve the entropic transport between two tensor fields. rho = float('inf') makes a marginal "
        "hard. Returns a dict with coupling (I, J, d, d), potentials and the solve report.");

  m.def("barycenter", &barycenter, py::arg("inputs"), py::arg("weights"), py::arg("support"),
        py::arg("rho") = 1.0, py::arg("eps") = 0.0064, py::arg("alpha") = 2.0, py::arg("tau1") = py::none(),
        py::arg("tau2") = py::none(), py::arg("relax") = 1.8, py::arg("max_iter") = 10000,
        py::arg("tol") = 1e-9,
        "Weighted barycenter of (points, tensors) inputs on a fixed support.");

  m.def("interpolate", &interpolate, py::arg("mu_points"), py::arg("mu_tensors"), py::arg("nu_points"),
        py::arg("nu_tensors"), py::arg("coupling"), py::arg("t"), py::arg("threshold") = 1e-8,
        py::arg("merge_radius") = 0.0,
        "Displacement interpolation at time t; returns (points, tensors). merge_radius=None disables "
        "merging.");

  m.def(
      "distance",
      [](const Array& p, const Array& q) {
        if (p.ndim() != 2 || q.ndim() != 2) throw std::invalid_argument("expected two square matrices");
        return single_dirac_distance(PsdMat::make(to_syms(p, 2, "P").front()),
                                     PsdMat::make(to_syms(q, 2, "Q").front()));
      },
      py::arg("p"), py::arg("q"), "Transport distance between two single Diracs at the same point.");

  m.def(
      "pointwise_barycenter",
      [](const Array& tensors, const std::vector<double>& weights, double energy, double rho) {
        std::vector<PsdMat> ts;
        for (SymMat& s : to_syms(tensors, 3, "tensors")) ts.push_back(PsdMat::make(std::move(s)));
        const PsdMat r = pointwise_barycenter(ts, weights, energy, rho);
        return from_syms({r.mat()}, {}, r.dim());
      },
      py::arg("tensors"), py::arg("weights"), py::arg("energy") = 0.0, py::arg("rho") = 1.0);

  m.def(
      "load_field", [](const std::string& path) { return from_measure(io::load_field(path)); }, py::arg("path"),
      "Read a tensor field document; returns (points, tensors).");
  m.def(
      "save_field",
      [](const std::string& path, const Array& points, const Array& tensors) {
        io::save_field(path, to_measure(points, tensors));
      },
      py::arg("path"), py::arg("points"), py::arg("tensors"));

  m.def(
      "render_svg",
      [](const Array& points, const Array& tensors, std::optional<double> scale, int subsample) {
        RenderOptions o;
        o.scale = scale;
        o.subsample = subsample;
        return render_svg(to_measure(points, tensors), o);
      },
      py::arg("points"), py::arg("tensors"), py::arg("scale") = py::none(), py::arg("subsample") = 1);

  m.def(
      "exp_sym", [](const Array& s) { return from_syms({exp_sym(to_syms(s, 2, "S").front()).mat()}, {}, int(s.shape(0))); },
      py::arg("s"));
  m.def(
      "log_sym",
      [](const Array& p) { return from_syms({log_sym(PsdMat::make(to_syms(p, 2, "P").front()))}, {}, int(p.shape(0))); },
      py::arg("p"));
}
