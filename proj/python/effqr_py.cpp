#include "effqr/estimator.hpp"
#include "effqr/pinball.hpp"
#include "effqr/selftest.hpp"
#include "effqr/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

namespace py = pybind11;
using namespace effqr;

namespace {

FitConfig make_config(std::optional<double> bandwidth, double bandwidth_constant, double density_floor,
                      const std::string& crossing, std::uint64_t seed) {
  FitConfig cfg;
  if (bandwidth) cfg.bandwidth = BandwidthRule::fixed(*bandwidth);
  else cfg.bandwidth = BandwidthRule::automatic(bandwidth_constant);
  cfg.density_floor = density_floor;
  if (crossing == "sort") cfg.crossing = CrossingRule::Sort;
  else if (crossing == "anchored") cfg.crossing = CrossingRule::Anchored;
  else throw Error(ErrorKind::Usage, "config", "unknown crossing rule '" + crossing + "'");
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

py::dict per_estimator(const std::array<Matrix, 3>& m) {
  py::dict d;
  for (Estimator e : kEstimators) d[estimator_name(e)] = m[static_cast<std::size_t>(e)];
  return d;
}

py::dict report_dict(const EstimateReport& r) {
  py::dict d;
  d["grid"] = r.grid.levels();
  d["TQE"] = r.tqe;
  d["SEF"] = r.sef;
  d["EFF"] = r.eff;
  d["sigma2_eff"] = r.sigma2_eff;
  d["sigma2_sef"] = r.sigma2_sef;
  d["sigma2_tqe"] = r.sigma2_tqe;
  d["mean_score_eff"] = r.mean_score_eff;
  d["mean_score_sef"] = r.mean_score_sef;
  py::dict diag;
  diag["clamped_cells"] = r.diagnostics.clamped_cells;
  diag["crossed_rows"] = r.diagnostics.crossed_rows;
  diag["bandwidth"] = r.diagnostics.bandwidth;
  diag["bandwidth_warning"] = r.diagnostics.bandwidth_warning;
  diag["solver_converged"] = r.diagnostics.solver_converged;
  d["diagnostics"] = diag;
  return d;
}

}  // namespace

PYBIND11_MODULE(_effqr, m) {
  m.doc() = "Efficient multi-level quantile regression";

  // Instances carry .kind: "usage", "data" or "numerical".
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&] { return py::object(py::exception<Error>(m, "Error", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      static const char* kinds[] = {"usage", "data", "numerical"};
      const py::object& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("kind") = kinds[static_cast<int>(e.kind())];
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  m.def("pinball_loss", &pinball_loss, py::arg("u"), py::arg("tau"));

  m.def(
      "fit_quantile",
      [](const Matrix& x, const Vector& y, double tau) { return fit_quantile(x, y, tau, FitConfig{}).beta_hat; },
      py::arg("x"), py::arg("y"), py::arg("tau"), "Koenker-Bassett fit at one level.");

  m.def(
      "estimate",
      [](const Matrix& x, const Vector& y, std::vector<double> grid, std::optional<double> bandwidth,
         double bandwidth_constant, double density_floor, const std::string& crossing) {
        const FitConfig cfg = make_config(bandwidth, bandwidth_constant, density_floor, crossing, 1);
        EstimateReport r = [&] {
          py::gil_scoped_release release;
          return estimate(x, y, make_grid(std::move(grid)), cfg);
        }();
        return report_dict(r);
      },
      py::arg("x"), py::arg("y"), py::arg("grid") = std::vector<double>{0.3, 0.5, 0.7},
      py::arg("bandwidth") = py::none(), py::arg("bandwidth_constant") = 1.0, py::arg("density_floor") = 0.01,
      py::arg("crossing") = "anchored",
      "TQE, SEF and EFF estimates; matrices are p x L.");

  m.def(
      "bootstrap",
      [](const Matrix& x, const Vector& y, std::vector<double> grid, std::size_t replications, std::uint64_t seed,
         std::size_t threads) {
        const FitConfig cfg = make_config(std::nullopt, 1.0, 0.01, "anchored", seed);
        BootstrapResult b = [&] {
          py::gil_scoped_release release;
          return bootstrap_se(make_dataset(y, x), make_grid(std::move(grid)), cfg, replications, seed, threads);
        }();
        py::dict d = report_dict(b.point);
        d["esd"] = per_estimator(b.esd);
        d["pvalue"] = per_estimator(b.pvalue);
        d["replications"] = b.replications;
        d["failures"] = b.failures;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("grid") = std::vector<double>{0.3, 0.5, 0.7},
      py::arg("replications") = 1000, py::arg("seed") = 1, py::arg("threads") = 0);

  m.def(
      "generate",
      [](const std::string& model, std::size_t n, std::uint64_t seed) {
        const Dataset d = generate(parse_model(model), n, seed);
        return py::make_tuple(d.x(), d.y());
      },
      py::arg("model"), py::arg("n"), py::arg("seed") = 1, "Returns (x, y) from one of M1..M5.");

  m.def(
      "true_beta",
      [](const std::string& model, std::vector<double> grid) {
        return parse_model(model).beta(make_grid(std::move(grid)));
      },
      py::arg("model"), py::arg("grid"));

  m.def(
      "simulate",
      [](const std::string& model, std::size_t n, std::vector<double> grid, std::size_t replications,
         std::uint64_t seed, std::size_t threads) {
        const FitConfig cfg = make_config(std::nullopt, 1.0, 0.01, "anchored", seed);
        const SimModel sm = parse_model(model);
        MonteCarloSummary s = [&] {
          py::gil_scoped_release release;
          return run_monte_carlo(sm, n, make_grid(std::move(grid)), replications, cfg, threads);
        }();
        py::dict d;
        d["truth"] = s.truth;
        d["mean"] = per_estimator(s.mean);
        d["sd"] = per_estimator(s.sd);
        d["replications"] = s.replications;
        d["failures"] = s.failures;
        return d;
      },
      py::arg("model"), py::arg("n") = 1000, py::arg("grid") = std::vector<double>{0.5, 0.7},
      py::arg("replications") = 200, py::arg("seed") = 1, py::arg("threads") = 0);

  m.def(
      "selftest",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : run_selftest(seed)) {
          py::dict d;
          d["check"] = r.check;
          d["instance"] = r.instance;
          d["discrepancy"] = r.discrepancy;
          d["tolerance"] = r.tolerance;
          d["pass"] = r.pass;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 1);
}
