#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ligm/model.hpp"
#include "ligm/scheme.hpp"
#include "ligm/verify.hpp"

namespace ligm {

/// Initial cell data, sampled at cell centers.
///   constant: u = value
///   step:     u = left for x < x_jump, right otherwise
///   sine:     u = base + amplitude·sin(2π·wavenumber·(x − r_min)/(r_max − r_min))
///   table:    piecewise-linear through (x_k, u_k), constant beyond the ends
struct InitialProfile {
  std::string kind;
  std::vector<double> value;
  std::vector<double> left;
  std::vector<double> right;
  double x_jump = 0.0;
  std::vector<double> base;
  std::vector<double> amplitude;
  double wavenumber = 1.0;
  std::vector<double> table_x;
  std::vector<std::vector<double>> table_u;

  bool operator==(const InitialProfile&) const = default;
};

struct RunConfig {
  // model
  std::string model_id;
  ModelParams params;
  // mesh
  double r_min = 0.0;
  double r_max = 1.0;
  std::size_t n = 0;
  // time
  double t0 = 0.0;
  double t_end = 0.0;
  double cfl = 0.45;
  InitialProfile initial;
  // metric
  std::vector<double> boundary_metric;
  // scheme
  bool correction = true;
  int ode_substeps = 4;
  // output
  std::string output_dir;
  std::size_t cadence = 1;
  std::size_t checkpoint_every = 0;
  // study
  std::vector<std::size_t> study_levels;
  std::vector<SupportBox> test_boxes;
  double threshold = 0.8;

  bool operator==(const RunConfig&) const = default;
};

/// Parses YAML text with sections model, mesh, time, initial, metric, scheme,
/// output and study. Unknown sections or keys are errors. Throws ParseError
/// for malformed text and ConfigError naming the field for invalid values.
RunConfig parse_config(std::string_view text);
/// Throws ConfigError("config", "config not found: ...") if the file is missing.
RunConfig load_config(const std::filesystem::path& path);
/// Canonical YAML; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);
/// Semantic checks; throws ConfigError naming the field.
void validate(const RunConfig& config);

/// FNV-1a 64 over the canonical text of the physics sections (model, mesh,
/// time, initial, metric, scheme).
std::uint64_t config_hash(const RunConfig& config);

std::shared_ptr<const Model> make_model(const RunConfig& config);
/// Solver for the configured mesh, or with `n` interior points if nonzero.
Solver make_solver(const RunConfig& config, std::size_t n = 0);
std::vector<ConservedState> sample_initial(const InitialProfile& profile, const Mesh& mesh,
                                           std::size_t state_dim);
GridState make_initial_state(const Solver& solver, const RunConfig& config);
LevelFactory make_level_factory(const RunConfig& config);
/// Test functions from study.test_functions, or the three default boxes.
std::vector<TestFunction> make_study_test_functions(const RunConfig& config);
std::vector<SupportBox> default_test_boxes(const RunConfig& config);

// ---------------------------------------------------------------------------
// Binary persistence. Little-endian IEEE doubles; every file starts with a
// magic tag, format version, config hash, model id, mesh and dimensions.

inline constexpr std::uint32_t kFormatVersion = 1;

struct ArtifactHeader {
  std::uint64_t config_hash = 0;
  std::string model_id;
  Mesh mesh;
  std::uint32_t state_dim = 0;
  std::uint32_t metric_dim = 0;

  bool operator==(const ArtifactHeader&) const = default;
};

ArtifactHeader make_header(const RunConfig& config, const Model& model);

void write_snapshot(std::ostream& out, const ArtifactHeader& header, const Snapshot& snapshot);
/// Throws FormatError: kCorrupt on bad magic or truncation, kVersionMismatch
/// on format version, model or config hash, kMeshMismatch on mesh or dims.
Snapshot read_snapshot(std::istream& in, const ArtifactHeader& expected);

void write_snapshots(const std::filesystem::path& path, const ArtifactHeader& header,
                     const std::vector<Snapshot>& snapshots);
std::vector<Snapshot> read_snapshots(const std::filesystem::path& path,
                                     const ArtifactHeader& expected);

void write_checkpoint(std::ostream& out, const ArtifactHeader& header, const GridState& state);
GridState read_checkpoint(std::istream& in, const ArtifactHeader& expected);
void checkpoint(const std::filesystem::path& path, const ArtifactHeader& header,
                const GridState& state);
GridState restore(const std::filesystem::path& path, const ArtifactHeader& expected);

/// One tab-separated row per cell: t, x, u components, A components, ū
/// components (ū equals u on the final snapshot). %.17g throughout.
void export_table(std::ostream& out, const Snapshot& snapshot, const Mesh& mesh,
                  bool with_header = true);

// ---------------------------------------------------------------------------
// Reports. Text tables for reading plus `key = value` summaries for scripts.

void write_run_summary(std::ostream& out, const Trajectory& trajectory,
                       const VariationHistory& variation);
void write_variation_table(std::ostream& out, const VariationHistory& variation);
void write_residual_report(std::ostream& out, const ResidualReport& report);
void write_residual_summary(std::ostream& out, const ResidualReport& report, double threshold);

}  // namespace ligm
