#include "hemicontrol/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace hemicontrol {

namespace {

std::string format_error(const std::string& source, int line, const std::string& message) {
  return line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::invalid_argument("expected an integer, got '" + text + "'");
  return v;
}

int to_int(const std::string& text, int lo) {
  const long long v = to_integer(text);
  if (v < lo || v > 1'000'000'000)
    throw std::invalid_argument("integer out of range: " + text);
  return static_cast<int>(v);
}

bool to_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes")
    return true;
  if (text == "false" || text == "0" || text == "no")
    return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::vector<double> to_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(to_double(trim(item)));
  if (out.empty())
    throw std::invalid_argument("expected a comma-separated list of numbers");
  return out;
}

BoundaryTag to_tag(const std::string& text) {
  const int t = to_int(text, 1);
  if (t > 3)
    throw std::invalid_argument("boundary tag must be 1, 2 or 3, got " + text);
  return static_cast<BoundaryTag>(t);
}

TaggingScheme to_tagging(const std::string& text) {
  if (text == "default")
    return {};
  std::stringstream ss(text);
  std::string item;
  std::vector<BoundaryTag> tags;
  while (std::getline(ss, item, ','))
    tags.push_back(to_tag(trim(item)));
  if (tags.size() != 4)
    throw std::invalid_argument("mesh.tagging is 'default' or four tags left,right,bottom,top");
  return {tags[0], tags[1], tags[2], tags[3]};
}

double positive(double v, const char* what) {
  if (!(v > 0.0))
    throw std::invalid_argument(std::string(what) + " must be positive");
  return v;
}

const std::vector<std::string> kCatalog{"x", "bump", "manufactured_u", "manufactured_g", "manufactured_q",
                                        "limit_state"};
const std::vector<std::string> kCommands{"solve-state",   "solve-hvi",   "optimize-limit", "optimize-alpha",
                                         "sweep-state",   "sweep-control", "verify-j"};

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"mesh.n", [](RunConfig& c, const std::string& v) { c.mesh_n = to_int(v, 2); }},
      {"mesh.tagging", [](RunConfig& c, const std::string& v) { c.tagging = to_tagging(v); }},
      {"data.g", [](RunConfig& c, const std::string& v) { c.g = FieldSpec::parse(v); }},
      {"data.q", [](RunConfig& c, const std::string& v) { c.q = FieldSpec::parse(v); }},
      {"data.z_d", [](RunConfig& c, const std::string& v) { c.z_d = FieldSpec::parse(v); }},
      {"data.z_d_source", [](RunConfig& c, const std::string& v) { c.z_d_source = FieldSpec::parse(v); }},
      {"data.b", [](RunConfig& c, const std::string& v) { c.b = to_double(v); }},
      {"control.M", [](RunConfig& c, const std::string& v) { c.M = positive(to_double(v), "control.M"); }},
      {"j.kind",
       [](RunConfig& c, const std::string& v) {
         if (v != "quadratic" && v != "abs" && v != "kinked" && v != "negative_abs")
           throw std::invalid_argument("j.kind must be quadratic, abs, kinked or negative_abs, got '" + v + "'");
         c.j_kind = v;
       }},
      {"j.b", [](RunConfig& c, const std::string& v) { c.j_b = to_double(v); }},
      {"j.radius", [](RunConfig& c, const std::string& v) { c.j_grid.radius = positive(to_double(v), "j.radius"); }},
      {"j.samples", [](RunConfig& c, const std::string& v) { c.j_grid.points = static_cast<std::size_t>(to_int(v, 1000)); }},
      {"solver.epsilon_schedule", [](RunConfig& c, const std::string& v) { c.solver.epsilon_schedule = to_list(v); }},
      {"solver.newton_tol", [](RunConfig& c, const std::string& v) { c.solver.newton_tol = to_double(v); }},
      {"solver.max_newton", [](RunConfig& c, const std::string& v) { c.solver.max_newton = to_int(v, 1); }},
      {"solver.linear_tol", [](RunConfig& c, const std::string& v) { c.solver.linear_tol = to_double(v); }},
      {"solver.damping", [](RunConfig& c, const std::string& v) { c.solver.damping = to_double(v); }},
      {"solver.max_backtracks", [](RunConfig& c, const std::string& v) { c.solver.max_backtracks = to_int(v, 0); }},
      {"solver.max_active_set", [](RunConfig& c, const std::string& v) { c.solver.max_active_set = to_int(v, 1); }},
      {"solver.certify_trials", [](RunConfig& c, const std::string& v) { c.solver.certify_trials = to_int(v, 0); }},
      {"opt.tol", [](RunConfig& c, const std::string& v) { c.opt.tol = positive(to_double(v), "opt.tol"); }},
      {"opt.max_iters", [](RunConfig& c, const std::string& v) { c.opt.max_iters = to_int(v, 0); }},
      {"opt.armijo_c", [](RunConfig& c, const std::string& v) { c.opt.armijo_c = to_double(v); }},
      {"experiment.alpha",
       [](RunConfig& c, const std::string& v) { c.alpha = positive(to_double(v), "experiment.alpha"); }},
      {"experiment.alphas", [](RunConfig& c, const std::string& v) { c.alphas = to_list(v); }},
      {"experiment.state_fraction", [](RunConfig& c, const std::string& v) { c.state_fraction = to_double(v); }},
      {"experiment.control_fraction", [](RunConfig& c, const std::string& v) { c.control_fraction = to_double(v); }},
      {"experiment.timing", [](RunConfig& c, const std::string& v) { c.timing = to_bool(v); }},
      {"seed", [](RunConfig& c, const std::string& v) {
         const long long s = to_integer(v);
         if (s < 0)
           throw std::invalid_argument("seed must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
         c.solver.seed = c.seed;
       }},
      {"threads", [](RunConfig& c, const std::string& v) { c.threads = to_int(v, 1); }},
      {"output.dir", [](RunConfig& c, const std::string& v) {
         if (v.empty())
           throw std::invalid_argument("output.dir is empty");
         c.output_dir = v;
       }},
  };
  return table;
}

} // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(format_error(source, line, message)), line_(line) {}

FieldSpec FieldSpec::parse(const std::string& text) {
  if (text == "zero")
    return {};
  if (text.starts_with("constant:"))
    return {Kind::Constant, to_double(text.substr(9)), {}};
  if (text.starts_with("expr:")) {
    const std::string id = text.substr(5);
    if (std::find(kCatalog.begin(), kCatalog.end(), id) == kCatalog.end())
      throw std::invalid_argument("unknown catalog field '" + id + "'");
    return {Kind::Expr, 0.0, id};
  }
  throw std::invalid_argument("field spec must be zero, constant:<v> or expr:<id>, got '" + text + "'");
}

std::string FieldSpec::str() const {
  switch (kind) {
  case Kind::Zero:
    return "zero";
  case Kind::Constant: {
    char buf[64];
    std::snprintf(buf, sizeof buf, "constant:%.17g", value);
    return buf;
  }
  case Kind::Expr:
    return "expr:" + id;
  }
  return {};
}

double evaluate_catalog(const std::string& id, double x, double y) {
  using std::numbers::pi;
  if (id == "x")
    return x;
  if (id == "bump")
    return std::sin(pi * x) * std::sin(pi * y);
  if (id == "manufactured_u")
    return std::sin(pi * x / 2) + std::sin(pi * x) * std::cosh(y);
  if (id == "manufactured_g")
    return pi * pi / 4 * std::sin(pi * x / 2) + (pi * pi - 1) * std::sin(pi * x) * std::cosh(y);
  if (id == "manufactured_q")
    return -std::sin(pi * x) * std::sinh(y);
  throw std::invalid_argument("catalog field '" + id + "' has no pointwise formula");
}

Field materialize(const FieldSpec& spec, const Mesh2D& mesh, FieldRole role) {
  switch (spec.kind) {
  case FieldSpec::Kind::Zero:
    return Field::zeros(role, static_cast<int>(mesh.vertices.size()));
  case FieldSpec::Kind::Constant:
    return Field::constant(role, static_cast<int>(mesh.vertices.size()), spec.value);
  case FieldSpec::Kind::Expr:
    break;
  }
  const std::string id = spec.id;
  evaluate_catalog(id, 0.0, 0.0);  // rejects non-pointwise ids up front
  return interpolate(mesh, [id](double x, double y) { return evaluate_catalog(id, x, y); }, role);
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : entries) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::require_for(const std::string& command) const {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
    throw ConfigError(source, 0, "unknown command '" + command + "'");

  const bool needs_j = command == "solve-hvi" || command == "optimize-alpha" || command == "sweep-state" ||
                       command == "sweep-control" || command == "verify-j";
  const bool needs_M = command == "optimize-limit" || command == "optimize-alpha" || command == "sweep-control";

  if (command != "verify-j" && !b)
    throw ConfigError(source, 0, "missing required key 'data.b'");
  if (needs_M && !M)
    throw ConfigError(source, 0, "missing required key 'control.M'");
  if (needs_j && !j_kind)
    throw ConfigError(source, 0, "missing required key 'j.kind'");
  if (needs_j && !j_b && !b)
    throw ConfigError(source, 0, "missing required key 'j.b'");
  if (j_b && b && *j_b != *b)
    throw ConfigError(source, 0, "j.b = " + entries.at("j.b") + " must equal data.b = " + entries.at("data.b"));
  if (command == "sweep-state" || command == "sweep-control") {
    bool ok = alphas.size() >= 3;
    for (std::size_t k = 0; k < alphas.size(); ++k)
      ok = ok && alphas[k] > 0.0 && (k == 0 || alphas[k] > alphas[k - 1]);
    if (!ok)
      throw ConfigError(source, 0, "experiment.alphas must hold at least 3 strictly increasing positive values");
  }
  if (z_d_source.kind == FieldSpec::Kind::Expr && z_d_source.id == "limit_state")
    throw ConfigError(source, 0, "data.z_d_source cannot itself be limit_state");
  if ((g.kind == FieldSpec::Kind::Expr && g.id == "limit_state") ||
      (q.kind == FieldSpec::Kind::Expr && q.id == "limit_state"))
    throw ConfigError(source, 0, "limit_state is only available for data.z_d");
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
  if (!(opt.armijo_c > 0.0 && opt.armijo_c < 1.0))
    throw ConfigError(source, 0, "opt.armijo_c must lie in (0, 1)");
}

Superpotential RunConfig::superpotential() const {
  if (!j_kind)
    throw ConfigError(source, 0, "missing required key 'j.kind'");
  const double jb = j_b ? *j_b : *b;
  if (*j_kind == "quadratic")
    return quadratic_well(jb);
  if (*j_kind == "abs")
    return abs_well(jb);
  if (*j_kind == "kinked")
    return kinked_well(jb);
  return negative_abs_well(jb);
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty())
      continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source, line, "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      throw ConfigError(source, line, "unknown key '" + key + "'");
    if (const auto prev = seen.find(key); prev != seen.end())
      throw ConfigError(source, line, "duplicate key '" + key + "' (first set on line " +
                                          std::to_string(prev->second) + ")");
    if (value.empty())
      throw ConfigError(source, line, "missing value for '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, line, key + ": " + e.what());
    }
    seen.emplace(key, line);
    cfg.entries[key] = value;
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(path, 0, "cannot open config file");
  return parse_config(in, path);
}

} // namespace hemicontrol
