#pragma once

#include "hemicontrol/control.hpp"
#include "hemicontrol/mesh.hpp"
#include "hemicontrol/state.hpp"
#include "hemicontrol/superpotential.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hemicontrol {

inline constexpr const char* kVersion = "0.1.0";

/// Parse or validation failure; `line` is 0 when no single line is to blame.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

private:
  int line_;
};

/// `zero`, `constant:<v>` or `expr:<id>`. Catalog ids:
///   x                 f = x
///   bump              f = sin(pi x) sin(pi y)
///   manufactured_u    sin(pi x / 2) + sin(pi x) cosh(y)
///   manufactured_g    -Laplacian of manufactured_u
///   manufactured_q    -sin(pi x) sinh(y), the outward flux datum on y = 0 and y = 1
///   limit_state       solution of the limit state problem for the control
///                     `data.z_d_source` (only meaningful for data.z_d)
struct FieldSpec {
  enum class Kind { Zero, Constant, Expr };
  Kind kind = Kind::Zero;
  double value = 0.0;
  std::string id;

  /// Throws std::invalid_argument on an unknown form or catalog id.
  static FieldSpec parse(const std::string& text);
  std::string str() const;
};

/// Pointwise analytic catalog entry; throws std::invalid_argument for
/// limit_state, which is not pointwise.
double evaluate_catalog(const std::string& id, double x, double y);

struct RunConfig {
  int mesh_n = 16;
  TaggingScheme tagging;

  FieldSpec g;
  FieldSpec q;
  FieldSpec z_d;
  FieldSpec z_d_source{FieldSpec::Kind::Constant, 0.5, {}};
  std::optional<double> b;
  std::optional<double> M;

  std::optional<std::string> j_kind;
  std::optional<double> j_b;
  SamplingGrid j_grid;

  HviSolverConfig solver;
  OptimizerConfig opt;

  double alpha = 1.0;
  std::vector<double> alphas{1.0, 10.0, 100.0, 1000.0, 10000.0};
  double state_fraction = 0.05;
  double control_fraction = 0.05;
  bool timing = false;

  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = ".";

  /// Normalized `key = value` listing of every parsed key, sorted by key.
  std::map<std::string, std::string> entries;
  std::string source = "<config>";

  /// FNV-1a 64 over the normalized entries, as 16 hex digits.
  std::string hash() const;

  /// Checks the keys the command needs and the j/data coupling. Throws ConfigError.
  void require_for(const std::string& command) const;

  Superpotential superpotential() const;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
/// Throws ConfigError if the file cannot be read.
RunConfig load_config(const std::string& path);

/// Nodal values of a spec on the mesh. Throws std::invalid_argument for
/// limit_state, which needs a solve and is resolved by the runner.
Field materialize(const FieldSpec& spec, const Mesh2D& mesh, FieldRole role);

} // namespace hemicontrol
