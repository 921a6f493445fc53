#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ligm/errors.hpp"
#include "ligm/io.hpp"
#include "ligm/riemann.hpp"
#include "ligm/scheme.hpp"
#include "ligm/verify.hpp"

namespace py = pybind11;
using namespace ligm;

// Component vectors travel as plain Python sequences of floats.
namespace pybind11::detail {
template <class Tag>
struct type_caster<Components<Tag>> {
  PYBIND11_TYPE_CASTER(Components<Tag>, const_name("list[float]"));

  bool load(handle src, bool convert) {
    if (!isinstance<sequence>(src) || isinstance<str>(src)) return false;
    const auto seq = reinterpret_borrow<sequence>(src);
    if (seq.size() > kMaxComponents) return false;
    value = Components<Tag>(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      make_caster<double> item;
      if (!item.load(seq[i], convert)) return false;
      value[i] = cast_op<double>(item);
    }
    return true;
  }

  static handle cast(const Components<Tag>& v, return_value_policy, handle) {
    list out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out.release();
  }
};
}  // namespace pybind11::detail

namespace {

template <class Tag>
py::array_t<double> to_array(const std::vector<Components<Tag>>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  py::array_t<double> out({rows.size(), dim});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < dim; ++c) view(i, c) = rows[i][c];
  }
  return out;
}

std::vector<ConservedState> from_array(const py::array_t<double, py::array::forcecast>& a) {
  if (a.ndim() == 1) {
    std::vector<ConservedState> out;
    for (py::ssize_t i = 0; i < a.shape(0); ++i) out.push_back({a.at(i)});
    return out;
  }
  if (a.ndim() != 2) throw py::value_error("cell data must be 1-D or 2-D");
  std::vector<ConservedState> out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    ConservedState u(static_cast<std::size_t>(a.shape(1)));
    for (py::ssize_t c = 0; c < a.shape(1); ++c) u[c] = a.at(i, c);
    out.push_back(u);
  }
  return out;
}

std::string report_text(const ResidualReport& report, double threshold) {
  std::ostringstream s;
  write_residual_report(s, report);
  write_residual_summary(s, report, threshold);
  return s.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Locally inertial Godunov scheme with dynamical time dilation";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InadmissibleState>(m, "InadmissibleState", error);
  py::register_exception<NonHyperbolic>(m, "NonHyperbolic", error);
  py::register_exception<RiemannError>(m, "RiemannError", error);
  py::register_exception<CflViolation>(m, "CflViolation", error);
  py::register_exception<ConfigError>(m, "ConfigError", error);
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<FormatError>(m, "FormatError", error);
  py::register_exception<CoverageError>(m, "CoverageError", error);
  py::register_exception<RunAborted>(m, "RunAborted", error);

  // -- models ---------------------------------------------------------------

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def(py::init([](double sound_speed, double kappa, double source_coupling,
                       double metric_floor) {
             return ModelParams{sound_speed, kappa, source_coupling, metric_floor};
           }),
           py::kw_only(), py::arg("sound_speed") = 1.0, py::arg("kappa") = 0.0,
           py::arg("source_coupling") = 1.0, py::arg("metric_floor") = 0.0)
      .def_readwrite("sound_speed", &ModelParams::sound_speed)
      .def_readwrite("kappa", &ModelParams::kappa)
      .def_readwrite("source_coupling", &ModelParams::source_coupling)
      .def_readwrite("metric_floor", &ModelParams::metric_floor);

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_property_readonly("id", [](const Model& s) { return std::string(s.id()); })
      .def_property_readonly("state_dim", &Model::state_dim)
      .def_property_readonly("metric_dim", &Model::metric_dim)
      .def_property_readonly("params", &Model::params)
      .def("admissible", py::overload_cast<const ConservedState&>(&Model::admissible, py::const_))
      .def("flux", &Model::flux, py::arg("metric"), py::arg("u"))
      .def("source", &Model::source, py::arg("metric"), py::arg("u"), py::arg("x"))
      .def("metric_rhs", &Model::metric_rhs, py::arg("metric"), py::arg("u"), py::arg("x"))
      .def("wave_speeds", &Model::wave_speeds, py::arg("metric"), py::arg("u"))
      .def("ode_rhs", &Model::ode_rhs, py::arg("metric"), py::arg("metric_slope"), py::arg("u"),
           py::arg("x"), py::arg("correction") = true);

  m.def(
      "make_model",
      [](const std::string& id, const ModelParams& params) {
        return std::const_pointer_cast<Model>(make_model(id, params));
      },
      py::arg("id"), py::arg("params") = ModelParams{});

  // -- Riemann problem --------------------------------------------------------

  py::enum_<WaveType>(m, "WaveType")
      .value("shock", WaveType::kShock)
      .value("rarefaction", WaveType::kRarefaction)
      .value("contact", WaveType::kContact);

  py::class_<Wave>(m, "Wave")
      .def_readonly("type", &Wave::type)
      .def_readonly("family", &Wave::family)
      .def_readonly("left_speed", &Wave::left_speed)
      .def_readonly("right_speed", &Wave::right_speed)
      .def_readonly("left_state", &Wave::left_state)
      .def_readonly("right_state", &Wave::right_state);

  py::class_<RiemannFan>(m, "RiemannFan")
      .def_property_readonly("left_state", &RiemannFan::left_state)
      .def_property_readonly("right_state", &RiemannFan::right_state)
      .def_property_readonly("waves",
                             [](const RiemannFan& f) {
                               return std::vector<Wave>(f.waves().begin(), f.waves().end());
                             })
      .def_property_readonly("min_speed", &RiemannFan::min_speed)
      .def_property_readonly("max_speed", &RiemannFan::max_speed)
      .def("sample", &RiemannFan::sample, py::arg("xi"))
      .def("average", &RiemannFan::average, py::arg("x_a"), py::arg("x_b"), py::arg("t"));

  m.def(
      "solve_riemann",
      [](const Model& model, const MetricState& metric, const ConservedState& left,
         const ConservedState& right) { return solve_riemann(model, metric, left, right); },
      py::arg("model"), py::arg("metric"), py::arg("left"), py::arg("right"));

  // -- scheme -----------------------------------------------------------------

  py::class_<Mesh>(m, "Mesh")
      .def(py::init<double, double, std::size_t>(), py::arg("r_min"), py::arg("r_max"),
           py::arg("interior_points"))
      .def_property_readonly("r_min", &Mesh::r_min)
      .def_property_readonly("r_max", &Mesh::r_max)
      .def_property_readonly("interior_points", &Mesh::interior_points)
      .def_property_readonly("cell_count", &Mesh::cell_count)
      .def_property_readonly("dx", &Mesh::dx)
      .def("edge", &Mesh::edge)
      .def("center", &Mesh::center);

  py::class_<GridState>(m, "GridState")
      .def_readonly("time", &GridState::time)
      .def_readonly("step", &GridState::step)
      .def_property_readonly("u", [](const GridState& s) { return to_array(s.u); })
      .def_property_readonly("metric", [](const GridState& s) { return to_array(s.metric); })
      .def("__eq__", [](const GridState& a, const GridState& b) { return a == b; });

  py::class_<SchemeOptions>(m, "SchemeOptions")
      .def(py::init<>())
      .def_readwrite("cfl", &SchemeOptions::cfl)
      .def_readwrite("t_end", &SchemeOptions::t_end)
      .def_readwrite("correction", &SchemeOptions::correction)
      .def_readwrite("boundary_metric", &SchemeOptions::boundary_metric)
      .def_readwrite("ode_substeps", &SchemeOptions::ode_substeps);

  py::class_<Solver>(m, "Solver")
      .def(py::init([](std::shared_ptr<Model> model, const Mesh& mesh,
                       const SchemeOptions& options) {
             return Solver(std::move(model), mesh, options);
           }),
           py::arg("model"), py::arg("mesh"), py::arg("options"))
      .def_property_readonly("mesh", &Solver::mesh)
      .def_property_readonly("options", &Solver::options)
      .def(
          "initial_state",
          [](const Solver& s, const py::array_t<double, py::array::forcecast>& u, double t0) {
            return s.initial_state(from_array(u), t0);
          },
          py::arg("u"), py::arg("t0") = 0.0)
      .def("cfl_time_step", &Solver::cfl_time_step)
      .def("advance", [](const Solver& s, const GridState& state) { return s.advance(state).next; });

  py::class_<RunOptions>(m, "RunOptions")
      .def(py::init<>())
      .def_readwrite("cadence", &RunOptions::cadence)
      .def_readwrite("max_steps", &RunOptions::max_steps)
      .def_readwrite("store_snapshots", &RunOptions::store_snapshots);

  py::class_<RunStats>(m, "RunStats")
      .def_readonly("steps", &RunStats::steps)
      .def_readonly("dt_min", &RunStats::dt_min)
      .def_readonly("dt_max", &RunStats::dt_max)
      .def_readonly("dilation_constant", &RunStats::dilation_constant)
      .def_readonly("wall_seconds", &RunStats::wall_seconds);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("mesh", &Trajectory::mesh)
      .def_readonly("stats", &Trajectory::stats)
      .def_readonly("step_sizes", &Trajectory::step_sizes)
      .def_property_readonly("snapshot_count",
                             [](const Trajectory& t) { return t.snapshots.size(); })
      .def_property_readonly("times",
                             [](const Trajectory& t) {
                               std::vector<double> out;
                               for (const Snapshot& s : t.snapshots) out.push_back(s.state.time);
                               return out;
                             })
      .def_property_readonly("final_state",
                             [](const Trajectory& t) { return t.final_snapshot().state; });

  m.def("run", &run, py::arg("solver"), py::arg("initial"), py::arg("options") = RunOptions{},
        py::call_guard<py::gil_scoped_release>());

  // -- configuration and persistence -------------------------------------------

  py::class_<RunConfig>(m, "RunConfig")
      .def_readonly("model_id", &RunConfig::model_id)
      .def_readonly("params", &RunConfig::params)
      .def_readonly("n", &RunConfig::n)
      .def_readonly("t_end", &RunConfig::t_end)
      .def_readonly("cfl", &RunConfig::cfl)
      .def_readonly("cadence", &RunConfig::cadence)
      .def_readonly("study_levels", &RunConfig::study_levels)
      .def_readonly("threshold", &RunConfig::threshold)
      .def("to_yaml", [](const RunConfig& c) { return format_config(c); })
      .def_property_readonly("hash", [](const RunConfig& c) { return config_hash(c); });

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("make_solver", &make_solver, py::arg("config"), py::arg("n") = 0);
  m.def("make_initial_state", &make_initial_state, py::arg("solver"), py::arg("config"));
  m.def(
      "run_config",
      [](const RunConfig& config) {
        const Solver s = make_solver(config);
        RunOptions opts;
        opts.cadence = config.cadence;
        return run(s, make_initial_state(s, config), opts);
      },
      py::arg("config"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "checkpoint",
      [](const std::filesystem::path& path, const RunConfig& config, const GridState& state) {
        checkpoint(path, make_header(config, *make_model(config)), state);
      },
      py::arg("path"), py::arg("config"), py::arg("state"));
  m.def(
      "restore",
      [](const std::filesystem::path& path, const RunConfig& config) {
        return restore(path, make_header(config, *make_model(config)));
      },
      py::arg("path"), py::arg("config"));

  // -- verification -------------------------------------------------------------

  m.def(
      "total_variation",
      [](const py::array_t<double, py::array::forcecast>& u) {
        return total_variation(from_array(u));
      },
      py::arg("u"));

  py::class_<AverageBoundResult>(m, "AverageBoundResult")
      .def_readonly("passed", &AverageBoundResult::pass)
      .def_readonly("average", &AverageBoundResult::average)
      .def_readonly("deviation", &AverageBoundResult::deviation)
      .def_readonly("oscillation", &AverageBoundResult::oscillation)
      .def_readonly("total_variation", &AverageBoundResult::total_variation);

  m.def(
      "check_average_bound",
      [](const py::array_t<double, py::array::forcecast>& samples) {
        return check_average_bound(from_array(samples));
      },
      py::arg("samples"));

  py::class_<SlopeFit>(m, "SlopeFit")
      .def_readonly("slope", &SlopeFit::slope)
      .def_readonly("intercept", &SlopeFit::intercept)
      .def_readonly("std_error", &SlopeFit::std_error)
      .def_readonly("ci_low", &SlopeFit::ci_low)
      .def_readonly("ci_high", &SlopeFit::ci_high);

  m.def(
      "fit_log2_slope",
      [](const std::vector<double>& dx, const std::vector<double>& values) {
        return fit_log2_slope(dx, values);
      },
      py::arg("dx"), py::arg("values"));

  py::class_<ResidualReport>(m, "ResidualReport")
      .def_readonly("function_names", &ResidualReport::function_names)
      .def_readonly("epsilon_fits", &ResidualReport::epsilon_fits)
      .def_readonly("jump_fits", &ResidualReport::jump_fits)
      .def_readonly("l1_fit", &ResidualReport::l1_fit)
      .def_readonly("l1_differences", &ResidualReport::l1_differences)
      .def_readonly("variation_spread", &ResidualReport::variation_spread)
      .def_readonly("dt_dx_spread", &ResidualReport::dt_dx_spread)
      .def_property_readonly("dx",
                             [](const ResidualReport& r) {
                               std::vector<double> out;
                               for (const StudyLevel& l : r.levels) out.push_back(l.dx);
                               return out;
                             })
      .def("text", &report_text, py::arg("threshold") = 0.8);

  py::class_<StudyVerdict>(m, "StudyVerdict")
      .def_readonly("epsilon_ok", &StudyVerdict::epsilon_ok)
      .def_readonly("jump_ok", &StudyVerdict::jump_ok)
      .def_readonly("l1_ok", &StudyVerdict::l1_ok)
      .def_readonly("passed", &StudyVerdict::pass);

  m.def(
      "study",
      [](const RunConfig& config) {
        return convergence_study(make_level_factory(config), config.study_levels,
                                 make_study_test_functions(config));
      },
      py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("judge_study", &judge_study, py::arg("report"), py::arg("threshold"));
}
