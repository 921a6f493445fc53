#include "ligm/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ligm/errors.hpp"

namespace ligm {

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are written in native little-endian layout");

namespace {

// ---------------------------------------------------------------------------
// YAML reading

std::string where(const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) return {};
  return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

void check_keys(const YAML::Node& section, const std::string& name,
                const std::set<std::string>& allowed) {
  for (auto it = section.begin(); it != section.end(); ++it) {
    const std::string key = it->first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError(name + "." + key, "unknown key" + where(it->first));
    }
  }
}

double read_double(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw ConfigError(field, "expected a number" + where(node));
  try {
    return node.as<double>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(field, "expected a number, got '" + node.Scalar() + "'" + where(node));
  }
}

std::size_t read_count(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw ConfigError(field, "expected an integer" + where(node));
  long long v = 0;
  try {
    v = node.as<long long>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(field, "expected an integer, got '" + node.Scalar() + "'" + where(node));
  }
  if (v < 0) throw ConfigError(field, "must be non-negative" + where(node));
  return static_cast<std::size_t>(v);
}

bool read_bool(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw ConfigError(field, "expected true or false" + where(node));
  try {
    return node.as<bool>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(field, "expected true or false, got '" + node.Scalar() + "'" + where(node));
  }
}

std::string read_string(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw ConfigError(field, "expected a string" + where(node));
  return node.Scalar();
}

// A scalar is accepted as a one-element list.
std::vector<double> read_doubles(const YAML::Node& node, const std::string& field) {
  if (node.IsScalar()) return {read_double(node, field)};
  if (!node.IsSequence()) throw ConfigError(field, "expected a list of numbers" + where(node));
  std::vector<double> out;
  for (std::size_t k = 0; k < node.size(); ++k) {
    out.push_back(read_double(node[k], field + "[" + std::to_string(k) + "]"));
  }
  return out;
}

const std::set<std::string> kSections = {"model", "mesh", "time", "initial",
                                         "metric", "scheme", "output", "study"};

void parse_model(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "model", {"id", "kappa", "source_coupling", "sound_speed", "metric_floor"});
  if (!s["id"]) throw ConfigError("model.id", "required");
  c.model_id = read_string(s["id"], "model.id");
  if (s["kappa"]) c.params.kappa = read_double(s["kappa"], "model.kappa");
  if (s["source_coupling"]) {
    c.params.source_coupling = read_double(s["source_coupling"], "model.source_coupling");
  }
  if (s["sound_speed"]) c.params.sound_speed = read_double(s["sound_speed"], "model.sound_speed");
  if (s["metric_floor"]) {
    c.params.metric_floor = read_double(s["metric_floor"], "model.metric_floor");
  }
}

void parse_mesh(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "mesh", {"r_min", "r_max", "n"});
  for (const char* key : {"r_min", "r_max", "n"}) {
    if (!s[key]) throw ConfigError(std::string("mesh.") + key, "required");
  }
  c.r_min = read_double(s["r_min"], "mesh.r_min");
  c.r_max = read_double(s["r_max"], "mesh.r_max");
  c.n = read_count(s["n"], "mesh.n");
}

void parse_time(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "time", {"t0", "t_end", "cfl"});
  if (!s["t_end"]) throw ConfigError("time.t_end", "required");
  if (s["t0"]) c.t0 = read_double(s["t0"], "time.t0");
  c.t_end = read_double(s["t_end"], "time.t_end");
  if (s["cfl"]) c.cfl = read_double(s["cfl"], "time.cfl");
}

void parse_initial(const YAML::Node& s, RunConfig& c) {
  if (!s["profile"]) throw ConfigError("initial.profile", "required");
  InitialProfile& p = c.initial;
  p.kind = read_string(s["profile"], "initial.profile");
  auto require = [&](const char* key) {
    if (!s[key]) throw ConfigError(std::string("initial.") + key, "required by profile " + p.kind);
    return s[key];
  };
  if (p.kind == "constant") {
    check_keys(s, "initial", {"profile", "value"});
    p.value = read_doubles(require("value"), "initial.value");
  } else if (p.kind == "step") {
    check_keys(s, "initial", {"profile", "left", "right", "x_jump"});
    p.left = read_doubles(require("left"), "initial.left");
    p.right = read_doubles(require("right"), "initial.right");
    p.x_jump = read_double(require("x_jump"), "initial.x_jump");
  } else if (p.kind == "sine") {
    check_keys(s, "initial", {"profile", "base", "amplitude", "wavenumber"});
    p.base = read_doubles(require("base"), "initial.base");
    p.amplitude = read_doubles(require("amplitude"), "initial.amplitude");
    if (s["wavenumber"]) p.wavenumber = read_double(s["wavenumber"], "initial.wavenumber");
  } else if (p.kind == "table") {
    check_keys(s, "initial", {"profile", "x", "u"});
    p.table_x = read_doubles(require("x"), "initial.x");
    const YAML::Node u = require("u");
    if (!u.IsSequence()) throw ConfigError("initial.u", "expected a list of states" + where(u));
    for (std::size_t k = 0; k < u.size(); ++k) {
      p.table_u.push_back(read_doubles(u[k], "initial.u[" + std::to_string(k) + "]"));
    }
  } else {
    throw ConfigError("initial.profile", "unknown profile '" + p.kind + "'" + where(s["profile"]));
  }
}

void parse_metric(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "metric", {"boundary"});
  if (s["boundary"]) c.boundary_metric = read_doubles(s["boundary"], "metric.boundary");
}

void parse_scheme(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "scheme", {"correction", "ode_substeps"});
  if (s["correction"]) c.correction = read_bool(s["correction"], "scheme.correction");
  if (s["ode_substeps"]) {
    c.ode_substeps = static_cast<int>(read_count(s["ode_substeps"], "scheme.ode_substeps"));
  }
}

void parse_output(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "output", {"directory", "cadence", "checkpoint_every"});
  if (s["directory"]) c.output_dir = read_string(s["directory"], "output.directory");
  if (s["cadence"]) c.cadence = read_count(s["cadence"], "output.cadence");
  if (s["checkpoint_every"]) {
    c.checkpoint_every = read_count(s["checkpoint_every"], "output.checkpoint_every");
  }
}

void parse_study(const YAML::Node& s, RunConfig& c) {
  check_keys(s, "study", {"levels", "test_functions", "threshold"});
  if (s["levels"]) {
    const YAML::Node levels = s["levels"];
    if (!levels.IsSequence()) throw ConfigError("study.levels", "expected a list" + where(levels));
    for (std::size_t k = 0; k < levels.size(); ++k) {
      c.study_levels.push_back(read_count(levels[k], "study.levels[" + std::to_string(k) + "]"));
    }
  }
  if (s["test_functions"]) {
    const YAML::Node boxes = s["test_functions"];
    if (!boxes.IsSequence()) {
      throw ConfigError("study.test_functions", "expected a list of boxes" + where(boxes));
    }
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const std::string field = "study.test_functions[" + std::to_string(k) + "]";
      const std::vector<double> v = read_doubles(boxes[k], field);
      if (v.size() != 4) throw ConfigError(field, "expected [t_a, t_b, x_a, x_b]" + where(boxes[k]));
      c.test_boxes.push_back({v[0], v[1], v[2], v[3]});
    }
  }
  if (s["threshold"]) c.threshold = read_double(s["threshold"], "study.threshold");
}

// ---------------------------------------------------------------------------
// YAML writing

void emit_list(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

std::string emit(const RunConfig& c, bool physics_only) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << c.model_id;
  out << YAML::Key << "kappa" << YAML::Value << c.params.kappa;
  out << YAML::Key << "source_coupling" << YAML::Value << c.params.source_coupling;
  out << YAML::Key << "sound_speed" << YAML::Value << c.params.sound_speed;
  out << YAML::Key << "metric_floor" << YAML::Value << c.params.metric_floor;
  out << YAML::EndMap;

  out << YAML::Key << "mesh" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "r_min" << YAML::Value << c.r_min;
  out << YAML::Key << "r_max" << YAML::Value << c.r_max;
  out << YAML::Key << "n" << YAML::Value << c.n;
  out << YAML::EndMap;

  out << YAML::Key << "time" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t0" << YAML::Value << c.t0;
  out << YAML::Key << "t_end" << YAML::Value << c.t_end;
  out << YAML::Key << "cfl" << YAML::Value << c.cfl;
  out << YAML::EndMap;

  const InitialProfile& p = c.initial;
  out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "profile" << YAML::Value << p.kind;
  if (p.kind == "constant") {
    out << YAML::Key << "value" << YAML::Value;
    emit_list(out, p.value);
  } else if (p.kind == "step") {
    out << YAML::Key << "left" << YAML::Value;
    emit_list(out, p.left);
    out << YAML::Key << "right" << YAML::Value;
    emit_list(out, p.right);
    out << YAML::Key << "x_jump" << YAML::Value << p.x_jump;
  } else if (p.kind == "sine") {
    out << YAML::Key << "base" << YAML::Value;
    emit_list(out, p.base);
    out << YAML::Key << "amplitude" << YAML::Value;
    emit_list(out, p.amplitude);
    out << YAML::Key << "wavenumber" << YAML::Value << p.wavenumber;
  } else if (p.kind == "table") {
    out << YAML::Key << "x" << YAML::Value;
    emit_list(out, p.table_x);
    out << YAML::Key << "u" << YAML::Value << YAML::BeginSeq;
    for (const auto& row : p.table_u) emit_list(out, row);
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  out << YAML::Key << "metric" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "boundary" << YAML::Value;
  emit_list(out, c.boundary_metric);
  out << YAML::EndMap;

  out << YAML::Key << "scheme" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "correction" << YAML::Value << c.correction;
  out << YAML::Key << "ode_substeps" << YAML::Value << c.ode_substeps;
  out << YAML::EndMap;

  if (!physics_only) {
    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "directory" << YAML::Value << c.output_dir;
    out << YAML::Key << "cadence" << YAML::Value << c.cadence;
    out << YAML::Key << "checkpoint_every" << YAML::Value << c.checkpoint_every;
    out << YAML::EndMap;

    out << YAML::Key << "study" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "levels" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (std::size_t n : c.study_levels) out << n;
    out << YAML::EndSeq;
    out << YAML::Key << "test_functions" << YAML::Value << YAML::BeginSeq;
    for (const SupportBox& b : c.test_boxes) emit_list(out, {b.t_a, b.t_b, b.x_a, b.x_b});
    out << YAML::EndSeq;
    out << YAML::Key << "threshold" << YAML::Value << c.threshold;
    out << YAML::EndMap;
  }

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

template <class C>
C to_components(const std::vector<double>& v) {
  C out(v.size());
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

void check_dim(const std::vector<double>& v, std::size_t dim, const std::string& field) {
  if (v.size() != dim) {
    throw ConfigError(field, "expected " + std::to_string(dim) + " components, got " +
                                 std::to_string(v.size()));
  }
}

// ---------------------------------------------------------------------------
// Binary helpers

template <class T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T take(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError(FormatError::Kind::kCorrupt, "truncated artifact");
  return value;
}

constexpr char kSnapshotMagic[8] = {'L', 'I', 'G', 'M', 'S', 'N', 'A', 'P'};
constexpr char kTrajectoryMagic[8] = {'L', 'I', 'G', 'M', 'T', 'R', 'A', 'J'};
constexpr char kCheckpointMagic[8] = {'L', 'I', 'G', 'M', 'C', 'K', 'P', 'T'};

void put_header(std::ostream& out, const char (&magic)[8], const ArtifactHeader& h) {
  out.write(magic, 8);
  put(out, kFormatVersion);
  put(out, h.config_hash);
  put(out, static_cast<std::uint32_t>(h.model_id.size()));
  out.write(h.model_id.data(), static_cast<std::streamsize>(h.model_id.size()));
  put(out, static_cast<std::uint64_t>(h.mesh.interior_points()));
  put(out, h.mesh.r_min());
  put(out, h.mesh.r_max());
  put(out, h.state_dim);
  put(out, h.metric_dim);
}

void take_header(std::istream& in, const char (&magic)[8], const ArtifactHeader& expected) {
  char tag[8] = {};
  in.read(tag, 8);
  if (!in || !std::equal(tag, tag + 8, magic)) {
    throw FormatError(FormatError::Kind::kCorrupt,
                      "not a " + std::string(magic, 8) + " artifact (bad magic)");
  }
  const auto version = take<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      "format version " + std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  }
  const auto hash = take<std::uint64_t>(in);
  const auto id_len = take<std::uint32_t>(in);
  if (id_len > 256) throw FormatError(FormatError::Kind::kCorrupt, "implausible model id length");
  std::string id(id_len, '\0');
  in.read(id.data(), id_len);
  if (!in) throw FormatError(FormatError::Kind::kCorrupt, "truncated artifact");
  if (id != expected.model_id) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      "artifact written for model '" + id + "', expected '" +
                          expected.model_id + "'");
  }
  const auto n = take<std::uint64_t>(in);
  const auto r_min = take<double>(in);
  const auto r_max = take<double>(in);
  const auto state_dim = take<std::uint32_t>(in);
  const auto metric_dim = take<std::uint32_t>(in);
  if (n != expected.mesh.interior_points() || r_min != expected.mesh.r_min() ||
      r_max != expected.mesh.r_max()) {
    std::ostringstream os;
    os << "artifact mesh n=" << n << " on [" << r_min << ", " << r_max << "], expected n="
       << expected.mesh.interior_points() << " on [" << expected.mesh.r_min() << ", "
       << expected.mesh.r_max() << "]";
    throw FormatError(FormatError::Kind::kMeshMismatch, os.str());
  }
  if (state_dim != expected.state_dim || metric_dim != expected.metric_dim) {
    throw FormatError(FormatError::Kind::kMeshMismatch, "artifact dimensions differ");
  }
  if (hash != expected.config_hash) {
    std::ostringstream os;
    os << "config hash " << std::hex << hash << ", expected " << expected.config_hash;
    throw FormatError(FormatError::Kind::kVersionMismatch, os.str());
  }
}

template <class C>
void put_array(std::ostream& out, const std::vector<C>& values) {
  put(out, static_cast<std::uint64_t>(values.size()));
  for (const C& c : values) {
    for (double v : c) put(out, v);
  }
}

template <class C>
std::vector<C> take_array(std::istream& in, std::size_t dim, std::size_t expected_a,
                          std::size_t expected_b, const char* what) {
  const auto count = take<std::uint64_t>(in);
  if (count != expected_a && count != expected_b) {
    throw FormatError(FormatError::Kind::kCorrupt, std::string("bad length for ") + what);
  }
  std::vector<C> out(count, C(dim));
  for (C& c : out) {
    for (double& v : c) v = take<double>(in);
  }
  return out;
}

void put_state(std::ostream& out, const GridState& s) {
  put(out, s.time);
  put(out, static_cast<std::uint64_t>(s.step));
  put_array(out, s.u);
  put_array(out, s.metric);
  put_array(out, s.metric_edges);
  put_array(out, s.metric_slope);
}

GridState take_state(std::istream& in, const ArtifactHeader& h) {
  const std::size_t cells = h.mesh.cell_count();
  GridState s;
  s.time = take<double>(in);
  s.step = take<std::uint64_t>(in);
  s.u = take_array<ConservedState>(in, h.state_dim, cells, cells, "u");
  s.metric = take_array<MetricState>(in, h.metric_dim, cells, cells, "metric");
  s.metric_edges = take_array<MetricState>(in, h.metric_dim, cells + 1, cells + 1, "metric edges");
  s.metric_slope = take_array<MetricState>(in, h.metric_dim, cells, cells, "metric slope");
  return s;
}

void put_snapshot_body(std::ostream& out, const Snapshot& snapshot) {
  put_state(out, snapshot.state);
  put(out, snapshot.dt);
  put_array(out, snapshot.averages);
  put_array(out, snapshot.traces);
}

Snapshot take_snapshot_body(std::istream& in, const ArtifactHeader& h) {
  Snapshot s;
  s.state = take_state(in, h);
  s.dt = take<double>(in);
  s.averages = take_array<ConservedState>(in, h.state_dim, h.mesh.cell_count(), 0, "averages");
  s.traces = take_array<ConservedState>(in, h.state_dim, h.mesh.interior_points(), 0, "traces");
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.mark.line + 1, e.mark.column + 1, e.msg);
  }
  if (!root.IsMap()) throw ParseError(1, 1, "expected a mapping of sections");
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string key = it->first.as<std::string>();
    if (!kSections.count(key)) throw ConfigError(key, "unknown section" + where(it->first));
    if (!it->second.IsMap()) throw ConfigError(key, "expected a mapping" + where(it->second));
  }
  for (const char* required : {"model", "mesh", "time", "initial"}) {
    if (!root[required]) throw ConfigError(required, "section is required");
  }

  RunConfig c;
  parse_model(root["model"], c);
  parse_mesh(root["mesh"], c);
  parse_time(root["time"], c);
  parse_initial(root["initial"], c);
  if (root["metric"]) parse_metric(root["metric"], c);
  if (root["scheme"]) parse_scheme(root["scheme"], c);
  if (root["output"]) parse_output(root["output"], c);
  if (root["study"]) parse_study(root["study"], c);
  if (c.boundary_metric.empty()) {
    c.boundary_metric.assign(make_model(c.model_id, c.params)->metric_dim(), 1.0);
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "config not found: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_config(const RunConfig& config) { return emit(config, false); }

void write_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << format_config(config);
}

void validate(const RunConfig& c) {
  const auto model = make_model(c.model_id, c.params);
  if (!(std::isfinite(c.r_min) && std::isfinite(c.r_max) && c.r_min < c.r_max)) {
    throw ConfigError("mesh.r_min", "need finite r_min < r_max");
  }
  if (c.n < 2) throw ConfigError("mesh.n", "need at least 2 interior gridpoints");
  if (!(c.cfl > 0.0 && c.cfl < 1.0)) throw ConfigError("time.cfl", "must lie in (0, 1)");
  if (!(std::isfinite(c.t0) && std::isfinite(c.t_end) && c.t0 <= c.t_end)) {
    throw ConfigError("time.t_end", "need finite t0 <= t_end");
  }

  const std::size_t d = model->state_dim();
  const InitialProfile& p = c.initial;
  if (p.kind == "constant") {
    check_dim(p.value, d, "initial.value");
  } else if (p.kind == "step") {
    check_dim(p.left, d, "initial.left");
    check_dim(p.right, d, "initial.right");
    if (!std::isfinite(p.x_jump)) throw ConfigError("initial.x_jump", "must be finite");
  } else if (p.kind == "sine") {
    check_dim(p.base, d, "initial.base");
    check_dim(p.amplitude, d, "initial.amplitude");
    if (!std::isfinite(p.wavenumber)) throw ConfigError("initial.wavenumber", "must be finite");
  } else if (p.kind == "table") {
    if (p.table_x.size() < 1 || p.table_x.size() != p.table_u.size()) {
      throw ConfigError("initial.u", "need as many states as abscissae, at least one");
    }
    if (!std::is_sorted(p.table_x.begin(), p.table_x.end()) ||
        std::adjacent_find(p.table_x.begin(), p.table_x.end()) != p.table_x.end()) {
      throw ConfigError("initial.x", "abscissae must be strictly increasing");
    }
    for (std::size_t k = 0; k < p.table_u.size(); ++k) {
      check_dim(p.table_u[k], d, "initial.u[" + std::to_string(k) + "]");
    }
  } else {
    throw ConfigError("initial.profile", "unknown profile '" + p.kind + "'");
  }

  check_dim(c.boundary_metric, model->metric_dim(), "metric.boundary");
  if (!model->admissible(to_components<MetricState>(c.boundary_metric))) {
    throw ConfigError("metric.boundary", "inadmissible boundary metric");
  }
  if (c.ode_substeps < 1) throw ConfigError("scheme.ode_substeps", "must be positive");
  if (c.cadence < 1) throw ConfigError("output.cadence", "must be positive");
  for (std::size_t k = 0; k < c.study_levels.size(); ++k) {
    if (c.study_levels[k] < 2) {
      throw ConfigError("study.levels[" + std::to_string(k) + "]", "need at least 2 gridpoints");
    }
  }
  make_test_functions(c.test_boxes, {c.t0, c.t_end, c.r_min, c.r_max});
  if (!std::isfinite(c.threshold)) throw ConfigError("study.threshold", "must be finite");
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : emit(config, true)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::shared_ptr<const Model> make_model(const RunConfig& config) {
  return make_model(config.model_id, config.params);
}

Solver make_solver(const RunConfig& config, std::size_t n) {
  SchemeOptions options;
  options.cfl = config.cfl;
  options.t_end = config.t_end;
  options.correction = config.correction;
  options.boundary_metric = to_components<MetricState>(config.boundary_metric);
  options.ode_substeps = config.ode_substeps;
  return Solver(make_model(config), Mesh(config.r_min, config.r_max, n ? n : config.n), options);
}

std::vector<ConservedState> sample_initial(const InitialProfile& p, const Mesh& mesh,
                                           std::size_t state_dim) {
  const double length = mesh.r_max() - mesh.r_min();
  auto at = [&](double x) -> std::vector<double> {
    if (p.kind == "constant") return p.value;
    if (p.kind == "step") return x < p.x_jump ? p.left : p.right;
    if (p.kind == "sine") {
      const double s = std::sin(2.0 * M_PI * p.wavenumber * (x - mesh.r_min()) / length);
      std::vector<double> u(p.base.size());
      for (std::size_t c = 0; c < u.size(); ++c) u[c] = p.base[c] + p.amplitude[c] * s;
      return u;
    }
    if (p.kind == "table") {
      if (x <= p.table_x.front()) return p.table_u.front();
      if (x >= p.table_x.back()) return p.table_u.back();
      const auto it = std::upper_bound(p.table_x.begin(), p.table_x.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - p.table_x.begin());
      const double w = (x - p.table_x[k - 1]) / (p.table_x[k] - p.table_x[k - 1]);
      std::vector<double> u(p.table_u[k].size());
      for (std::size_t c = 0; c < u.size(); ++c) {
        u[c] = (1.0 - w) * p.table_u[k - 1][c] + w * p.table_u[k][c];
      }
      return u;
    }
    throw ConfigError("initial.profile", "unknown profile '" + p.kind + "'");
  };
  std::vector<ConservedState> out;
  out.reserve(mesh.cell_count());
  for (std::size_t i = 0; i < mesh.cell_count(); ++i) {
    const std::vector<double> u = at(mesh.center(i));
    check_dim(u, state_dim, "initial");
    out.push_back(to_components<ConservedState>(u));
  }
  return out;
}

GridState make_initial_state(const Solver& solver, const RunConfig& config) {
  return solver.initial_state(
      sample_initial(config.initial, solver.mesh(), solver.model().state_dim()), config.t0);
}

LevelFactory make_level_factory(const RunConfig& config) {
  return [config](std::size_t n) {
    Solver solver = make_solver(config, n);
    GridState initial = make_initial_state(solver, config);
    return std::make_pair(std::move(solver), std::move(initial));
  };
}

std::vector<SupportBox> default_test_boxes(const RunConfig& c) {
  const double span_t = c.t_end - c.t0;
  const double t_a = c.t0 + 0.08 * span_t;
  const double t_b = c.t_end - 0.08 * span_t;
  const double length = c.r_max - c.r_min;
  auto x = [&](double f) { return c.r_min + f * length; };
  return {{t_a, t_b, x(0.35), x(0.75)}, {t_a, t_b, x(0.05), x(0.30)}, {t_a, t_b, x(0.80), x(0.97)}};
}

std::vector<TestFunction> make_study_test_functions(const RunConfig& config) {
  const std::vector<SupportBox> boxes =
      config.test_boxes.empty() ? default_test_boxes(config) : config.test_boxes;
  return make_test_functions(boxes, {config.t0, config.t_end, config.r_min, config.r_max});
}

// ---------------------------------------------------------------------------
// Binary artifacts

ArtifactHeader make_header(const RunConfig& config, const Model& model) {
  ArtifactHeader h;
  h.config_hash = config_hash(config);
  h.model_id = std::string(model.id());
  h.mesh = Mesh(config.r_min, config.r_max, config.n);
  h.state_dim = static_cast<std::uint32_t>(model.state_dim());
  h.metric_dim = static_cast<std::uint32_t>(model.metric_dim());
  return h;
}

void write_snapshot(std::ostream& out, const ArtifactHeader& header, const Snapshot& snapshot) {
  put_header(out, kSnapshotMagic, header);
  put_snapshot_body(out, snapshot);
}

Snapshot read_snapshot(std::istream& in, const ArtifactHeader& expected) {
  take_header(in, kSnapshotMagic, expected);
  return take_snapshot_body(in, expected);
}

void write_snapshots(const std::filesystem::path& path, const ArtifactHeader& header,
                     const std::vector<Snapshot>& snapshots) {
  std::ofstream out = open_out(path);
  put_header(out, kTrajectoryMagic, header);
  put(out, static_cast<std::uint64_t>(snapshots.size()));
  for (const Snapshot& s : snapshots) put_snapshot_body(out, s);
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<Snapshot> read_snapshots(const std::filesystem::path& path,
                                     const ArtifactHeader& expected) {
  std::ifstream in = open_in(path);
  take_header(in, kTrajectoryMagic, expected);
  const auto count = take<std::uint64_t>(in);
  std::vector<Snapshot> out;
  for (std::uint64_t k = 0; k < count; ++k) out.push_back(take_snapshot_body(in, expected));
  return out;
}

void write_checkpoint(std::ostream& out, const ArtifactHeader& header, const GridState& state) {
  put_header(out, kCheckpointMagic, header);
  put_state(out, state);
}

GridState read_checkpoint(std::istream& in, const ArtifactHeader& expected) {
  take_header(in, kCheckpointMagic, expected);
  return take_state(in, expected);
}

void checkpoint(const std::filesystem::path& path, const ArtifactHeader& header,
                const GridState& state) {
  std::ofstream out = open_out(path);
  write_checkpoint(out, header, state);
  if (!out) throw Error("write failed: " + path.string());
}

GridState restore(const std::filesystem::path& path, const ArtifactHeader& expected) {
  std::ifstream in = open_in(path);
  return read_checkpoint(in, expected);
}

void export_table(std::ostream& out, const Snapshot& snapshot, const Mesh& mesh,
                  bool with_header) {
  const GridState& s = snapshot.state;
  const std::size_t d = s.u.empty() ? 0 : s.u[0].size();
  const std::size_t m = s.metric.empty() ? 0 : s.metric[0].size();
  if (with_header) {
    out << "t\tx";
    for (std::size_t c = 0; c < d; ++c) out << "\tu" << c;
    for (std::size_t c = 0; c < m; ++c) out << "\tA" << c;
    for (std::size_t c = 0; c < d; ++c) out << "\tubar" << c;
    out << '\n';
  }
  const std::string t = fmt("%.17g", s.time);
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    const ConservedState& avg = snapshot.averages.empty() ? s.u[i] : snapshot.averages[i];
    out << t << '\t' << fmt("%.17g", mesh.center(i));
    for (double v : s.u[i]) out << '\t' << fmt("%.17g", v);
    for (double v : s.metric[i]) out << '\t' << fmt("%.17g", v);
    for (double v : avg) out << '\t' << fmt("%.17g", v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports

void write_run_summary(std::ostream& out, const Trajectory& trajectory,
                       const VariationHistory& variation) {
  const RunStats& s = trajectory.stats;
  const GridState& last = trajectory.final_snapshot().state;
  out << "cells = " << trajectory.mesh.cell_count() << '\n'
      << "dx = " << fmt("%.17g", trajectory.mesh.dx()) << '\n'
      << "correction = " << (trajectory.correction ? "true" : "false") << '\n'
      << "steps = " << s.steps << '\n'
      << "t_final = " << fmt("%.17g", last.time) << '\n'
      << "dt_min = " << fmt("%.17g", s.dt_min) << '\n'
      << "dt_max = " << fmt("%.17g", s.dt_max) << '\n'
      << "dt_min_all = " << fmt("%.17g", s.dt_min_all) << '\n'
      << "dilation_constant = " << fmt("%.17g", s.dilation_constant) << '\n'
      << "max_tv = " << fmt("%.17g", variation.max_value) << '\n';
}

void write_variation_table(std::ostream& out, const VariationHistory& variation) {
  out << "t\ttv\n";
  for (std::size_t k = 0; k < variation.times.size(); ++k) {
    out << fmt("%.17g", variation.times[k]) << '\t' << fmt("%.17g", variation.values[k]) << '\n';
  }
}

void write_residual_report(std::ostream& out, const ResidualReport& r) {
  out << "levels\n";
  out << "      n            dx   steps        dt_min     dt_min/dx         C        max_tv\n";
  for (const StudyLevel& l : r.levels) {
    char line[160];
    std::snprintf(line, sizeof line, "%7zu  %12.6e  %6zu  %12.6e  %12.6e  %8.5f  %12.6e\n", l.n,
                  l.dx, l.stats.steps, l.stats.dt_min, l.stats.dt_min / l.dx,
                  l.stats.dilation_constant, l.variation.max_value);
    out << line;
  }
  out << "\nresiduals (1-norm)\n";
  out << "function        n           eps          eps1\n";
  for (std::size_t f = 0; f < r.function_names.size(); ++f) {
    for (const StudyLevel& l : r.levels) {
      char line[160];
      std::snprintf(line, sizeof line, "%-10s %6zu  %12.6e  %12.6e\n", r.function_names[f].c_str(),
                    l.n, l.residuals[f].epsilon.norm1(), l.residuals[f].jump.norm1());
      out << line;
    }
  }
  out << "\nfitted slopes (log2 |value| vs log2 dx, 95% interval)\n";
  out << "quantity          slope   std_err            interval\n";
  auto row = [&](const std::string& name, const SlopeFit& fit) {
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %8.4f  %8.4f  [%8.4f, %8.4f]\n", name.c_str(),
                  fit.slope, fit.std_error, fit.ci_low, fit.ci_high);
    out << line;
  };
  for (std::size_t f = 0; f < r.function_names.size(); ++f) {
    row("eps " + r.function_names[f], r.epsilon_fits[f]);
    row("eps1 " + r.function_names[f], r.jump_fits[f]);
  }
  row("L1", r.l1_fit);
  out << "\nL1 differences between successive levels\n";
  for (std::size_t k = 0; k < r.l1_differences.size(); ++k) {
    char line[160];
    std::snprintf(line, sizeof line, "%6zu -> %6zu  %12.6e", r.levels[k].n, r.levels[k + 1].n,
                  r.l1_differences[k]);
    out << line;
    if (k > 0) out << "  ratio " << fmt("%.4f", r.cauchy_ratios[k - 1]);
    out << '\n';
  }
  out << "\nmax TV spread " << fmt("%.6f", r.variation_spread) << ", dt/dx spread "
      << fmt("%.6f", r.dt_dx_spread) << '\n';
}

void write_residual_summary(std::ostream& out, const ResidualReport& r, double threshold) {
  for (std::size_t f = 0; f < r.function_names.size(); ++f) {
    out << "eps_slope." << r.function_names[f] << " = " << fmt("%.17g", r.epsilon_fits[f].slope)
        << '\n';
    out << "eps1_slope." << r.function_names[f] << " = " << fmt("%.17g", r.jump_fits[f].slope)
        << '\n';
  }
  out << "l1_slope = " << fmt("%.17g", r.l1_fit.slope) << '\n';
  double min_ratio = INFINITY;
  for (double q : r.cauchy_ratios) min_ratio = std::min(min_ratio, q);
  out << "min_cauchy_ratio = " << fmt("%.17g", min_ratio) << '\n';
  out << "tv_spread = " << fmt("%.17g", r.variation_spread) << '\n';
  out << "dt_dx_spread = " << fmt("%.17g", r.dt_dx_spread) << '\n';
  out << "threshold = " << fmt("%.17g", threshold) << '\n';
  out << "pass = " << (judge_study(r, threshold).pass ? "true" : "false") << '\n';
}

}  // namespace ligm
