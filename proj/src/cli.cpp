#include "ligm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "ligm/errors.hpp"
#include "ligm/verify.hpp"

namespace ligm {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::ofstream open_text(const std::filesystem::path& path, CommandOutcome& outcome) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  outcome.artifacts.push_back(path);
  return out;
}

std::string describe(const ConservedState& u) {
  std::ostringstream os;
  os << u;
  return os.str();
}

// ---------------------------------------------------------------------------
// check suites

struct SuiteResult {
  std::size_t passed = 0;
  std::optional<std::string> witness;
};

SuiteResult average_bound_suite(std::mt19937_64& rng, std::size_t count, bool corrupt) {
  std::uniform_int_distribution<int> pieces(1, 8);
  std::uniform_int_distribution<int> samples_per_set(1, 32);
  std::uniform_real_distribution<double> value(-5.0, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SuiteResult result;
  std::vector<ConservedState> samples;
  for (std::size_t k = 0; k < count; ++k) {
    // A random step function on [0, 1] with `m` pieces, sampled at sorted
    // random points; scalar and two-component sets alternate.
    const std::size_t dim = k % 2 ? 2 : 1;
    const int m = pieces(rng);
    std::vector<double> breaks(static_cast<std::size_t>(m - 1));
    for (double& b : breaks) b = unit(rng);
    std::sort(breaks.begin(), breaks.end());
    std::vector<ConservedState> levels(static_cast<std::size_t>(m), ConservedState(dim));
    for (ConservedState& l : levels) {
      for (double& v : l) v = value(rng);
    }
    const int s = samples_per_set(rng);
    std::vector<double> xs(static_cast<std::size_t>(s));
    for (double& x : xs) x = unit(rng);
    std::sort(xs.begin(), xs.end());
    samples.clear();
    for (double x : xs) {
      const auto piece = std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin();
      samples.push_back(levels[static_cast<std::size_t>(piece)]);
    }
    const AverageBoundResult r = check_average_bound(samples, corrupt);
    if (!r.pass) {
      std::ostringstream os;
      os << "set " << k << ": average " << r.average << " deviates " << r.deviation
         << " from sample " << r.witness << " " << samples[r.witness] << ", oscillation "
         << r.oscillation << ", TV " << r.total_variation;
      result.witness = os.str();
      return result;
    }
    ++result.passed;
  }
  return result;
}

struct ShockedCellResult {
  OdeAverageStudy study;
  bool pass = false;
};

constexpr double kLemmaMedianBound = 10.0;

ShockedCellResult shocked_cell(const Model& model, const ShockedCellSetup& setup) {
  static constexpr double levels[] = {0.02, 0.01, 0.005, 0.0025};
  ShockedCellResult r;
  r.study = ode_average_study(model, setup, levels);
  r.pass = std::isfinite(r.study.max_over_median) &&
           r.study.max_over_median <= kLemmaMedianBound && !r.study.monotone_growth;
  return r;
}

SuiteResult shocked_cell_suite(std::mt19937_64& rng, std::size_t count) {
  ModelParams params;
  params.kappa = 0.1;
  const auto model = make_model("synthetic", params);
  std::uniform_real_distribution<double> value(-1.5, 1.5);
  std::uniform_real_distribution<double> slope(-0.3, 0.3);
  SuiteResult result;
  for (std::size_t k = 0; k < count; ++k) {
    ShockedCellSetup setup;
    setup.left = {value(rng)};
    setup.center = {value(rng)};
    setup.right = {value(rng)};
    setup.metric = {1.0};
    setup.metric_slope = {slope(rng)};
    const ShockedCellResult r = shocked_cell(*model, setup);
    if (!r.pass) {
      std::ostringstream os;
      os << "cell " << k << ": data " << setup.left << " " << setup.center << " " << setup.right
         << ", max/median " << r.study.max_over_median
         << (r.study.monotone_growth ? ", growing" : "");
      result.witness = os.str();
      return result;
    }
    ++result.passed;
  }
  return result;
}

struct RandomState {
  MetricState metric;
  ConservedState u;
};

RandomState random_state(const Model& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> metric(0.5, 2.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> density(0.1, 3.0);
  RandomState s;
  s.metric = {metric(rng)};
  if (model.state_dim() == 1) {
    s.u = {2.0 * unit(rng)};
  } else {
    const double rho = density(rng);
    s.u = {rho, rho * unit(rng)};
  }
  return s;
}

SuiteResult gradient_suite(const Model& model, std::mt19937_64& rng, std::size_t count) {
  constexpr double kStep = 1e-6;
  constexpr double kTolerance = 1e-6;
  SuiteResult result;
  for (std::size_t k = 0; k < count; ++k) {
    const RandomState s = random_state(model, rng);
    const FluxGradient grad = model.flux_grad_metric(s.metric, s.u);
    for (std::size_t c = 0; c < model.metric_dim(); ++c) {
      MetricState up = s.metric;
      MetricState down = s.metric;
      const double h = kStep * std::max(1.0, std::abs(s.metric[c]));
      up[c] += h;
      down[c] -= h;
      const ConservedState fd = (model.flux(up, s.u) - model.flux(down, s.u)) * (0.5 / h);
      const double err = (fd - grad.column(c)).norm_inf();
      if (err > kTolerance * (1.0 + grad.column(c).norm_inf())) {
        result.witness = std::string(model.id()) + " at u=" + describe(s.u) +
                         ": finite difference differs by " + fmt("%.3e", err);
        return result;
      }
    }
    ++result.passed;
  }
  return result;
}

SuiteResult wave_speed_suite(const Model& model, std::mt19937_64& rng, std::size_t count) {
  constexpr double kTolerance = 1e-10;
  SuiteResult result;
  for (std::size_t k = 0; k < count; ++k) {
    const RandomState s = random_state(model, rng);
    const StateJacobian jac = model.flux_jacobian(s.metric, s.u);
    const WaveSpeeds speeds = model.wave_speeds(s.metric, s.u);
    std::vector<double> eig;
    if (model.state_dim() == 1) {
      eig = {jac(0, 0)};
    } else {
      const double half_trace = 0.5 * (jac(0, 0) + jac(1, 1));
      const double det = jac(0, 0) * jac(1, 1) - jac(0, 1) * jac(1, 0);
      const double disc = half_trace * half_trace - det;
      if (disc < 0.0) {
        result.witness = std::string(model.id()) + " at u=" + describe(s.u) + ": complex eigenvalues";
        return result;
      }
      eig = {half_trace - std::sqrt(disc), half_trace + std::sqrt(disc)};
    }
    for (std::size_t c = 0; c < eig.size(); ++c) {
      if (std::abs(eig[c] - speeds[c]) > kTolerance * (1.0 + std::abs(eig[c]))) {
        result.witness = std::string(model.id()) + " at u=" + describe(s.u) + ": speed " +
                         fmt("%.17g", speeds[c]) + " vs eigenvalue " + fmt("%.17g", eig[c]);
        return result;
      }
    }
    ++result.passed;
  }
  return result;
}

void report_suite(CommandOutcome& outcome, const std::string& name, std::size_t count,
                  const SuiteResult& r, const std::string& unit) {
  if (r.witness) {
    outcome.lines.push_back(name + ": FAIL after " + std::to_string(r.passed) + " pass; " +
                            *r.witness);
    outcome.exit_code = kExitAssertionFailure;
  } else if (count == 0) {
    outcome.lines.push_back(name + ": 0 " + unit + " (vacuous pass)");
  } else {
    outcome.lines.push_back(name + ": " + std::to_string(r.passed) + " pass");
  }
}

}  // namespace

std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& flag,
                                         const RunConfig& config) {
  if (flag) return *flag;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "ligm_out";
}

CommandOutcome guarded(const std::function<CommandOutcome()>& command) {
  CommandOutcome outcome;
  try {
    return command();
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitUsage;
    outcome.lines.push_back(std::string("config error: ") + e.what());
  } catch (const ParseError& e) {
    outcome.exit_code = kExitUsage;
    outcome.lines.push_back(std::string("parse error: ") + e.what());
  } catch (const FormatError& e) {
    outcome.exit_code = kExitUsage;
    outcome.lines.push_back(std::string("format error: ") + e.what());
  } catch (const std::exception& e) {
    outcome.exit_code = kExitRuntimeAbort;
    outcome.lines.push_back(std::string("aborted: ") + e.what());
  }
  return outcome;
}

CommandOutcome cmd_run(const RunRequest& request) {
  RunConfig config = load_config(request.config);
  if (request.no_correction) config.correction = false;
  const std::filesystem::path dir = resolve_output_dir(request.out, config);
  std::filesystem::create_directories(dir);

  const Solver solver = make_solver(config);
  const ArtifactHeader header = make_header(config, solver.model());
  GridState state = request.resume ? restore(*request.resume, header)
                                   : make_initial_state(solver, config);

  CommandOutcome outcome;
  Trajectory trajectory;
  trajectory.mesh = solver.mesh();
  trajectory.correction = config.correction;
  VariationRecorder variation;
  RunOptions options;
  options.cadence = config.cadence;
  options.max_steps = config.checkpoint_every;
  options.observer = [&](const Snapshot& s) { variation(s); };

  const auto start = std::chrono::steady_clock::now();
  std::optional<std::string> abort;
  try {
    do {
      continue_run(solver, state, trajectory, options);
      state = trajectory.final_snapshot().state;
      checkpoint(dir / "checkpoint.bin", header, state);
    } while (state.time < config.t_end);
  } catch (const RunAborted& e) {
    abort = e.what();
    trajectory = e.partial();
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_config(config, dir / "config.yaml");
  outcome.artifacts.push_back(dir / "config.yaml");
  write_snapshots(dir / "trajectory.bin", header, trajectory.snapshots);
  outcome.artifacts.push_back(dir / "trajectory.bin");
  outcome.artifacts.push_back(dir / "checkpoint.bin");
  {
    std::ofstream out = open_text(dir / "snapshots.tsv", outcome);
    bool first = true;
    for (const Snapshot& s : trajectory.snapshots) {
      export_table(out, s, solver.mesh(), first);
      first = false;
    }
  }
  {
    std::ofstream out = open_text(dir / "final.tsv", outcome);
    export_table(out, trajectory.final_snapshot(), solver.mesh());
  }
  {
    std::ofstream out = open_text(dir / "tv.tsv", outcome);
    write_variation_table(out, variation.history());
  }
  {
    std::ofstream out = open_text(dir / "run_summary.txt", outcome);
    write_run_summary(out, trajectory, variation.history());
  }

  const RunStats& st = trajectory.stats;
  outcome.lines.push_back("steps = " + std::to_string(st.steps));
  outcome.lines.push_back("t_final = " + fmt("%.17g", trajectory.final_snapshot().state.time));
  outcome.lines.push_back("dt_min = " + fmt("%.6e", st.dt_min) + ", dt_max = " +
                          fmt("%.6e", st.dt_max));
  outcome.lines.push_back("C = max dt / dt_min = " + fmt("%.6f", st.dilation_constant));
  outcome.lines.push_back("max TV = " + fmt("%.6e", variation.history().max_value));
  outcome.lines.push_back("wall = " + fmt("%.3f", wall) + " s");
  outcome.lines.push_back("output = " + dir.string());
  if (abort) {
    outcome.lines.push_back("aborted: " + *abort);
    outcome.exit_code = kExitRuntimeAbort;
  }
  return outcome;
}

CommandOutcome cmd_study(const StudyRequest& request) {
  RunConfig config = load_config(request.config);
  if (request.no_correction) config.correction = false;
  const double threshold = request.threshold.value_or(config.threshold);
  if (!std::isfinite(threshold)) throw ConfigError("threshold", "must be finite");
  if (config.study_levels.size() < 4) {
    throw ConfigError("study.levels", "need at least 4 refinement levels, got " +
                                          std::to_string(config.study_levels.size()));
  }
  const std::filesystem::path dir = resolve_output_dir(request.out, config);
  std::filesystem::create_directories(dir);

  const std::vector<TestFunction> functions = make_study_test_functions(config);
  const auto start = std::chrono::steady_clock::now();
  const ResidualReport report =
      convergence_study(make_level_factory(config), config.study_levels, functions);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  CommandOutcome outcome;
  write_config(config, dir / "config.yaml");
  outcome.artifacts.push_back(dir / "config.yaml");
  {
    std::ofstream out = open_text(dir / "study_report.txt", outcome);
    write_residual_report(out, report);
  }
  {
    std::ofstream out = open_text(dir / "study_summary.txt", outcome);
    write_residual_summary(out, report, threshold);
  }
  {
    std::ofstream out = open_text(dir / "study_residuals.tsv", outcome);
    out << "n\tdx";
    for (const std::string& name : report.function_names) out << "\teps_" << name << "\teps1_" << name;
    out << "\tmax_tv\tdt_min\n";
    for (const StudyLevel& l : report.levels) {
      out << l.n << '\t' << fmt("%.17g", l.dx);
      for (const ResidualTerms& r : l.residuals) {
        out << '\t' << fmt("%.17g", r.epsilon.norm1()) << '\t' << fmt("%.17g", r.jump.norm1());
      }
      out << '\t' << fmt("%.17g", l.variation.max_value) << '\t' << fmt("%.17g", l.stats.dt_min)
          << '\n';
    }
  }

  std::ostringstream table;
  write_residual_report(table, report);
  std::istringstream lines(table.str());
  for (std::string line; std::getline(lines, line);) outcome.lines.push_back(line);

  const StudyVerdict verdict = judge_study(report, threshold);
  outcome.lines.push_back("threshold = " + fmt("%.3f", threshold) + ": eps " +
                          (verdict.epsilon_ok ? "ok" : "BELOW") + ", eps1 " +
                          (verdict.jump_ok ? "ok" : "BELOW") + ", L1 " +
                          (verdict.l1_ok ? "ok" : "BELOW"));
  outcome.lines.push_back("wall = " + fmt("%.3f", wall) + " s");
  outcome.lines.push_back("output = " + dir.string());
  outcome.exit_code = verdict.pass ? kExitPass : kExitAssertionFailure;
  return outcome;
}

CommandOutcome cmd_check(const CheckRequest& request) {
  CommandOutcome outcome;
  std::mt19937_64 rng(request.seed);
  const std::size_t count = request.count;

  report_suite(outcome, "lemma 2.3", count,
               average_bound_suite(rng, count, request.corrupt_average), "sample sets");

  {
    ModelParams params;
    params.kappa = 0.1;
    const auto model = make_model("synthetic", params);
    ShockedCellSetup setup;
    setup.left = {1.0};
    setup.center = {0.0};
    setup.right = {0.0};
    setup.metric = {1.0};
    setup.metric_slope = {0.1};
    const ShockedCellResult r = shocked_cell(*model, setup);
    std::string constants;
    for (const auto& m : r.study.measurements) constants += " " + fmt("%.4g", m.constant);
    outcome.lines.push_back("ode average shocked cell: C =" + constants + ", max/median " +
                            fmt("%.3f", r.study.max_over_median) +
                            (r.pass ? " pass" : " FAIL"));
    if (!r.pass) outcome.exit_code = kExitAssertionFailure;
  }
  const std::size_t cells = count / 1000;
  report_suite(outcome, "ode average random cells", cells, shocked_cell_suite(rng, cells),
               "cells");

  const std::size_t oracle_count = count / 10;
  ModelParams params;
  params.kappa = 0.1;
  params.sound_speed = 0.8;
  for (const char* id : {"synthetic", "isothermal"}) {
    const auto model = make_model(id, params);
    report_suite(outcome, std::string("flux gradient ") + id, oracle_count,
                 gradient_suite(*model, rng, oracle_count), "states");
    report_suite(outcome, std::string("wave speeds ") + id, oracle_count,
                 wave_speed_suite(*model, rng, oracle_count), "states");
  }
  return outcome;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Locally inertial Godunov solver with dynamical time dilation"};
  app.require_subcommand(1);

  RunRequest run_request;
  std::string out_dir;
  std::string resume;
  CLI::App* run = app.add_subcommand("run", "Run one simulation and persist its trajectory");
  run->add_option("--config", run_request.config, "Run configuration (YAML)")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--no-correction", run_request.no_correction, "Drop the -A'.grad_A f term");
  run->add_option("--resume", resume, "Continue from a checkpoint");

  StudyRequest study_request;
  double threshold = 0.0;
  CLI::App* study = app.add_subcommand("study", "Residual convergence study over mesh levels");
  study->add_option("--config", study_request.config, "Study configuration (YAML)")->required();
  study->add_option("--out", out_dir, "Output directory");
  study->add_flag("--no-correction", study_request.no_correction, "Drop the -A'.grad_A f term");
  CLI::Option* threshold_opt =
      study->add_option("--threshold", threshold, "Minimum fitted slope (default 0.8)");

  CheckRequest check_request;
  CLI::App* check = app.add_subcommand("check", "Randomized lemma and oracle checks");
  check->add_option("--seed", check_request.seed, "Random seed");
  check->add_option("--count", check_request.count, "Number of random sample sets");
  check->add_flag("--corrupt-average", check_request.corrupt_average)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  std::function<CommandOutcome()> command;
  if (*run) {
    if (!out_dir.empty()) run_request.out = out_dir;
    if (!resume.empty()) run_request.resume = resume;
    command = [&] { return cmd_run(run_request); };
  } else if (*study) {
    if (!out_dir.empty()) study_request.out = out_dir;
    if (threshold_opt->count()) study_request.threshold = threshold;
    command = [&] { return cmd_study(study_request); };
  } else {
    command = [&] { return cmd_check(check_request); };
  }
  const CommandOutcome outcome = guarded(command);
  std::ostream& stream = outcome.exit_code == kExitUsage || outcome.exit_code == kExitRuntimeAbort
                             ? std::cerr
                             : std::cout;
  for (const std::string& line : outcome.lines) stream << line << '\n';
  return outcome.exit_code;
}

}  // namespace ligm
