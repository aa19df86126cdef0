#pragma once

#include "hemicontrol/control.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hemicontrol {

/// Throws std::invalid_argument unless there are >= 3 strictly increasing
/// positive values.
void check_alpha_grid(const std::vector<double>& alphas);

/// Least-squares slope of log(err) against log(alpha), skipping zero or
/// non-finite errors. Empty if fewer than two usable points remain.
std::optional<double> fit_loglog_exponent(const std::vector<double>& alphas, const std::vector<double>& errors);

/// Each value strictly below its predecessor, except that values at or below
/// `floor` count as zero and may repeat. Once every Gamma3 node is pinned at a
/// kink the error is zero up to solver roundoff from some finite alpha on.
/// False on any non-finite entry.
bool decreasing_to_zero(const std::vector<double>& values, double floor = 0.0);

/// Resolution floor for errors measured against a reference of size `scale`.
inline double error_floor(double scale) { return 1e-10 * (1.0 + scale); }

struct StateSweepPoint {
  double alpha = 0.0;
  double error_V = 0.0;
  bool certified = false;
  double wall_time = 0.0;
};

struct StateSweep {
  std::vector<StateSweepPoint> points;
  std::optional<double> exponent;
  double final_ratio = 0.0;  // error(last) / error(first); 0 when the last is at the floor
  double floor = 0.0;        // error_floor of the limit state's V norm
  bool decreasing = false;

  std::vector<double> alphas() const;
  std::vector<double> errors() const;
};

struct SweepOptions {
  int threads = 1;
  bool timing = false;            // wall_time stays 0 unless set
  double state_fraction = 0.05;   // required final/initial for state_err_V
  double control_fraction = 0.05; // required final/initial for control_err_H
};

/// ||u_{alpha g} - u_{infinity g}||_V for every alpha, solving the limit
/// problem once.
StateSweep sweep_state(const FemSystem& sys, const Field& g, const Field& q, double b,
                       const std::vector<double>& alphas, const Superpotential& j, const HviSolverConfig& cfg = {},
                       const SweepOptions& options = {});

struct SweepRecord {
  double alpha = 0.0;
  double state_err_V = 0.0;
  double control_err_H = 0.0;
  double cost_gap = 0.0;
  bool certified = false;
  double wall_time = 0.0;
  bool optimizer_converged = false;
  std::string failure;  // non-empty when the alpha problem threw
};

struct ControlSweep {
  OptimalPair limit;
  std::vector<SweepRecord> records;
  bool state_decreasing = false;
  bool control_decreasing = false;
  bool state_fraction_met = false;
  bool control_fraction_met = false;
  std::optional<double> state_exponent;
  std::optional<double> control_exponent;

  bool all_certified() const;
  bool passed() const;
};

/// Solves the limit control problem once and the alpha problem per grid
/// point. Per-alpha failures are recorded in the record and the sweep goes on.
/// Throws std::invalid_argument if j and the problem disagree on b.
ControlSweep sweep_control(const ControlProblem& cp, const std::vector<double>& alphas, const Superpotential& j,
                           const HviSolverConfig& cfg = {}, const OptimizerConfig& opt = {},
                           const SweepOptions& options = {});

/// `alpha,state_err_V,control_err_H,cost_gap,certified,wall_time_s` with 17
/// significant digits, preceded by `comment` as a `#` line.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records, const std::string& comment);
void write_sweep_csv(std::ostream& os, const StateSweep& sweep, const std::string& comment);

struct PlotSeries {
  std::string label;
  std::vector<double> values;
};

/// Log-log polyline plot of error curves against alpha. Zero and non-finite
/// values are left out of the curves.
std::string loglog_svg(const std::vector<double>& alphas, const std::vector<PlotSeries>& series,
                       const std::string& comment);

} // namespace hemicontrol
