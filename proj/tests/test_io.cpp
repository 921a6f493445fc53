#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ligm/errors.hpp"
#include "ligm/io.hpp"

using namespace ligm;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
model:
  id: synthetic
mesh:
  r_min: 0.0
  r_max: 1.0
  n: 9
time:
  t0: 0.0
  t_end: 0.1
initial:
  profile: constant
  value: [1.0]
)";

const char* kFull = R"(
model:
  id: synthetic
  kappa: 0.1
  source_coupling: 0.75
mesh:
  r_min: 0.0
  r_max: 1.0
  n: 99
time:
  t0: 0.0
  t_end: 0.25
  cfl: 0.4
initial:
  profile: sine
  base: [1.0]
  amplitude: [0.5]
  wavenumber: 2
metric:
  boundary: [1.25]
scheme:
  correction: false
  ode_substeps: 6
output:
  directory: out/run
  cadence: 3
  checkpoint_every: 40
study:
  levels: [49, 99, 199, 399]
  test_functions:
    - [0.02, 0.2, 0.3, 0.7]
    - [0.05, 0.22, 0.1, 0.3]
  threshold: 0.75
)";

template <class F>
FormatError::Kind format_error_kind(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError thrown");
  return FormatError::Kind::kCorrupt;
}

std::string config_error_field(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ligm_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool bitwise_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

template <class C>
bool bitwise_equal(const C& a, const C& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bitwise_equal(a[i], b[i])) return false;
  }
  return true;
}

template <class C>
bool bitwise_equal(const std::vector<C>& a, const std::vector<C>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bitwise_equal(a[i], b[i])) return false;
  }
  return true;
}

bool bitwise_equal(const GridState& a, const GridState& b) {
  return bitwise_equal(a.time, b.time) && a.step == b.step && bitwise_equal(a.u, b.u) &&
         bitwise_equal(a.metric, b.metric) && bitwise_equal(a.metric_edges, b.metric_edges) &&
         bitwise_equal(a.metric_slope, b.metric_slope);
}

}  // namespace

TEST_CASE("minimal config gets documented defaults") {
  const RunConfig c = parse_config(kMinimal);
  CHECK(c.model_id == "synthetic");
  CHECK(c.n == 9);
  CHECK(c.cfl == 0.45);
  CHECK(c.cadence == 1);
  CHECK(c.correction);
  CHECK(c.ode_substeps == 4);
  CHECK(c.checkpoint_every == 0);
  CHECK(c.threshold == 0.8);
  REQUIRE(c.boundary_metric.size() == 1);
  CHECK(c.boundary_metric[0] == 1.0);
}

TEST_CASE("config round trip") {
  const RunConfig c = parse_config(kFull);
  CHECK(c.correction == false);
  CHECK(c.test_boxes.size() == 2);
  CHECK(parse_config(format_config(c)) == c);
  CHECK(format_config(parse_config(format_config(c))) == format_config(c));

  RunConfig t = parse_config(kMinimal);
  t.initial.kind = "table";
  t.initial.value.clear();
  t.initial.table_x = {0.0, 0.5, 1.0};
  t.initial.table_u = {{1.0}, {0.1 + 0.2}, {2.0}};
  CHECK(parse_config(format_config(t)) == t);

  const fs::path dir = scratch_dir("config");
  write_config(c, dir / "c.yaml");
  CHECK(load_config(dir / "c.yaml") == c);
}

TEST_CASE("config hash tracks physics only") {
  const RunConfig c = parse_config(kFull);
  RunConfig other = c;
  other.output_dir = "elsewhere";
  other.cadence = 7;
  other.threshold = 0.5;
  CHECK(config_hash(other) == config_hash(c));
  other.params.kappa = 0.2;
  CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("invalid configs name the field") {
  CHECK(config_error_field(replace(kFull, "cfl: 0.4", "cfl: 1.5")).find("cfl") !=
        std::string::npos);
  CHECK(config_error_field(replace(kFull, "n: 99", "n: 1")) == "mesh.n");
  CHECK(config_error_field(replace(kFull, "t_end: 0.25", "t_end: -1")).find("t_end") !=
        std::string::npos);
  CHECK(config_error_field(replace(kFull, "profile: sine", "profile: gaussian"))
            .find("initial") != std::string::npos);
  CHECK(config_error_field(replace(kFull, "id: synthetic", "id: euler")) == "model.id");
  CHECK(config_error_field(replace(kFull, "levels: [49, 99, 199, 399]", "levels: [49, x]"))
            .find("study.levels") != std::string::npos);
}

TEST_CASE("unknown keys report their position") {
  try {
    parse_config(replace(kFull, "  cfl: 0.4", "  cfl: 0.4\n  clf: 0.3"));
    FAIL("accepted unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("clf") != std::string::npos);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(std::string(kFull) + "extra:\n  a: 1\n"), ConfigError);
}

TEST_CASE("malformed text is a parse error") {
  CHECK_THROWS_AS(parse_config("model: [unclosed\n"), ParseError);
  CHECK_THROWS_AS(parse_config("model:\n  id: synthetic\n bad indent: 1\n"), ParseError);
}

TEST_CASE("missing config file") {
  try {
    load_config("/nonexistent/ligm.yaml");
    FAIL("loaded a missing file");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("config not found") != std::string::npos);
  }
}

TEST_CASE("snapshots round-trip bitwise") {
  const RunConfig c = parse_config(kFull);
  const Solver s = make_solver(c);
  const ArtifactHeader header = make_header(c, s.model());
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> v(-1e3, 1e3);
  const double specials[] = {-0.0, 5e-324, 1e308, -1e-300, 0.1 + 0.2};
  const std::size_t cells = s.mesh().cell_count();
  std::vector<Snapshot> snaps;
  for (int k = 0; k < 100; ++k) {
    Snapshot snap;
    snap.state.time = v(rng);
    snap.state.step = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < cells; ++i) {
      snap.state.u.push_back({i < 5 ? specials[i] : v(rng)});
      snap.state.metric.push_back({v(rng)});
      snap.state.metric_slope.push_back({v(rng)});
    }
    for (std::size_t i = 0; i <= cells; ++i) snap.state.metric_edges.push_back({v(rng)});
    if (k % 3) {
      snap.dt = v(rng);
      for (std::size_t i = 0; i < cells; ++i) snap.averages.push_back({v(rng)});
      for (std::size_t i = 0; i + 1 < cells; ++i) snap.traces.push_back({v(rng)});
    }
    snaps.push_back(snap);
  }
  const fs::path dir = scratch_dir("snapshots");
  write_snapshots(dir / "t.bin", header, snaps);
  const std::vector<Snapshot> back = read_snapshots(dir / "t.bin", header);
  REQUIRE(back.size() == snaps.size());
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    CHECK(bitwise_equal(back[k].state, snaps[k].state));
    CHECK(bitwise_equal(back[k].dt, snaps[k].dt));
    CHECK(bitwise_equal(back[k].averages, snaps[k].averages));
    CHECK(bitwise_equal(back[k].traces, snaps[k].traces));
  }
}

TEST_CASE("artifact header checks") {
  const RunConfig c = parse_config(kFull);
  const Solver s = make_solver(c);
  const ArtifactHeader header = make_header(c, s.model());
  const GridState st = make_initial_state(s, c);
  std::stringstream buf;
  write_checkpoint(buf, header, st);
  const std::string bytes = buf.str();

  SUBCASE("round trip") {
    std::istringstream in(bytes);
    CHECK(bitwise_equal(read_checkpoint(in, header), st));
  }
  SUBCASE("different mesh") {
    RunConfig finer = c;
    finer.n = 199;
    const ArtifactHeader other = make_header(finer, s.model());
    std::istringstream in(bytes);
    CHECK(format_error_kind([&] { read_checkpoint(in, other); }) ==
          FormatError::Kind::kMeshMismatch);
  }
  SUBCASE("different model") {
    RunConfig iso = c;
    iso.model_id = "isothermal";
    iso.params.sound_speed = 0.5;
    iso.initial.base = {1.0, 0.0};
    iso.initial.amplitude = {0.5, 0.0};
    const auto model = make_model(iso);
    std::istringstream in(bytes);
    CHECK(format_error_kind([&] { read_checkpoint(in, make_header(iso, *model)); }) ==
          FormatError::Kind::kVersionMismatch);
  }
  SUBCASE("different physics") {
    RunConfig other = c;
    other.params.kappa = 0.3;
    std::istringstream in(bytes);
    CHECK(format_error_kind([&] { read_checkpoint(in, make_header(other, s.model())); }) ==
          FormatError::Kind::kVersionMismatch);
  }
  SUBCASE("truncated") {
    std::istringstream in(bytes.substr(0, bytes.size() - 9));
    CHECK(format_error_kind([&] { read_checkpoint(in, header); }) == FormatError::Kind::kCorrupt);
  }
  SUBCASE("bad magic") {
    std::string broken = bytes;
    broken[0] = 'X';
    std::istringstream in(broken);
    CHECK(format_error_kind([&] { read_checkpoint(in, header); }) == FormatError::Kind::kCorrupt);
  }
  SUBCASE("snapshot file is not a checkpoint") {
    std::stringstream snap;
    write_snapshot(snap, header, Snapshot{st, 0.0, {}, {}});
    std::istringstream in(snap.str());
    CHECK(format_error_kind([&] { read_checkpoint(in, header); }) == FormatError::Kind::kCorrupt);
  }
}

TEST_CASE("checkpoint at step 50 of 100 reproduces the run bitwise") {
  RunConfig c = parse_config(kFull);
  c.correction = true;
  c.t_end = 10.0;
  const Solver s = make_solver(c);
  const ArtifactHeader header = make_header(c, s.model());
  const GridState init = make_initial_state(s, c);

  RunOptions whole_opts;
  whole_opts.max_steps = 100;
  const Trajectory whole = run(s, init, whole_opts);
  REQUIRE(whole.final_snapshot().state.step == 100);

  RunOptions half;
  half.max_steps = 50;
  const Trajectory first = run(s, init, half);
  const fs::path dir = scratch_dir("checkpoint");
  checkpoint(dir / "ck.bin", header, first.final_snapshot().state);
  Trajectory second;
  second.mesh = s.mesh();
  continue_run(s, restore(dir / "ck.bin", header), second, half);
  CHECK(bitwise_equal(second.final_snapshot().state, whole.final_snapshot().state));
}

TEST_CASE("initial profiles") {
  RunConfig c = parse_config(kMinimal);
  const Mesh mesh(0.0, 1.0, 9);
  c.initial = {};
  c.initial.kind = "step";
  c.initial.left = {2.0};
  c.initial.right = {-1.0};
  c.initial.x_jump = 0.5;
  auto u = sample_initial(c.initial, mesh, 1);
  CHECK(u[4][0] == 2.0);
  CHECK(u[5][0] == -1.0);

  c.initial = {};
  c.initial.kind = "table";
  c.initial.table_x = {0.0, 1.0};
  c.initial.table_u = {{0.0}, {2.0}};
  u = sample_initial(c.initial, mesh, 1);
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(u[i][0] == doctest::Approx(2.0 * mesh.center(i)));
  }

  c.initial = {};
  c.initial.kind = "sine";
  c.initial.base = {1.0};
  c.initial.amplitude = {0.5};
  u = sample_initial(c.initial, mesh, 1);
  CHECK(u[2][0] == doctest::Approx(1.0 + 0.5 * std::sin(2.0 * M_PI * mesh.center(2))));
  CHECK_THROWS_AS(sample_initial(c.initial, mesh, 2), ConfigError);
}

TEST_CASE("table export") {
  const RunConfig c = parse_config(kMinimal);
  const Solver s = make_solver(c);
  const Snapshot snap{make_initial_state(s, c), 0.0, {}, {}};
  std::ostringstream out;
  export_table(out, snap, s.mesh());
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t\tx\tu0\tA0\tubar0");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == s.mesh().cell_count());
}
