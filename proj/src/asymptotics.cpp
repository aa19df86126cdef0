#include "hemicontrol/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace hemicontrol {

namespace {

// Runs task(k) for k in [0, count) on up to `threads` workers. Each task
// writes only its own slot, so results do not depend on scheduling.
template <class Task>
void for_each_index(std::size_t count, int threads, const Task& task) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k)
      task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++)
        task(k);
    });
}

double ratio(double last, double first, double floor) {
  if (last <= floor)
    return 0.0;
  return first == 0.0 ? std::numeric_limits<double>::infinity() : last / first;
}

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace

void check_alpha_grid(const std::vector<double>& alphas) {
  if (alphas.size() < 3)
    throw std::invalid_argument("alpha grid needs at least 3 values, got " + std::to_string(alphas.size()));
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 0.0) || !std::isfinite(alphas[k]))
      throw std::invalid_argument("alpha grid values must be positive and finite");
    if (k > 0 && !(alphas[k] > alphas[k - 1]))
      throw std::invalid_argument("alpha grid must be strictly increasing");
  }
}

std::optional<double> fit_loglog_exponent(const std::vector<double>& alphas, const std::vector<double>& errors) {
  if (alphas.size() != errors.size())
    throw std::invalid_argument("fit_loglog_exponent: size mismatch");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < alphas.size(); ++k)
    if (errors[k] > 0.0 && std::isfinite(errors[k]) && alphas[k] > 0.0)
      pts.emplace_back(std::log(alphas[k]), std::log(errors[k]));
  if (pts.size() < 2)
    return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0)
    return std::nullopt;
  return sxy / sxx;
}

bool decreasing_to_zero(const std::vector<double>& values, double floor) {
  for (double v : values)
    if (!std::isfinite(v) || v < 0.0)
      return false;
  for (std::size_t k = 1; k < values.size(); ++k) {
    const bool both_zero = values[k] <= floor && values[k - 1] <= floor;
    if (!(values[k] < values[k - 1]) && !both_zero)
      return false;
  }
  return true;
}

std::vector<double> StateSweep::alphas() const {
  std::vector<double> out;
  for (const auto& p : points)
    out.push_back(p.alpha);
  return out;
}

std::vector<double> StateSweep::errors() const {
  std::vector<double> out;
  for (const auto& p : points)
    out.push_back(p.error_V);
  return out;
}

StateSweep sweep_state(const FemSystem& sys, const Field& g, const Field& q, double b,
                       const std::vector<double>& alphas, const Superpotential& j, const HviSolverConfig& cfg,
                       const SweepOptions& options) {
  check_alpha_grid(alphas);
  cfg.validate();
  if (j.b() != b)
    throw std::invalid_argument("sweep_state: superpotential b differs from the Gamma3 value of the limit problem");

  const StateSolution limit = solve_mixed_dirichlet(sys, g, q, b, cfg.linear_tol);
  StateSweep sweep;
  sweep.points.resize(alphas.size());
  for_each_index(alphas.size(), options.threads, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    const StateSolution s = solve_hemivariational(sys, g, q, alphas[k], j, cfg);
    StateSweepPoint& p = sweep.points[k];
    p.alpha = alphas[k];
    p.error_V = norm(sys, Vector(s.u.values - limit.u.values), NormKind::V);
    p.certified = s.certified;
    if (options.timing)
      p.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  const std::vector<double> errs = sweep.errors();
  sweep.floor = error_floor(norm(sys, limit.u, NormKind::V));
  sweep.exponent = fit_loglog_exponent(alphas, errs);
  sweep.final_ratio = ratio(errs.back(), errs.front(), sweep.floor);
  sweep.decreasing = decreasing_to_zero(errs, sweep.floor);
  return sweep;
}

bool ControlSweep::all_certified() const {
  return std::all_of(records.begin(), records.end(), [](const SweepRecord& r) { return r.certified; });
}

bool ControlSweep::passed() const {
  return all_certified() && state_decreasing && control_decreasing && state_fraction_met && control_fraction_met;
}

ControlSweep sweep_control(const ControlProblem& cp, const std::vector<double>& alphas, const Superpotential& j,
                           const HviSolverConfig& cfg, const OptimizerConfig& opt, const SweepOptions& options) {
  check_alpha_grid(alphas);
  cp.validate();
  cfg.validate();
  if (j.b() != cp.b)
    throw std::invalid_argument("sweep_control: superpotential b differs from the Gamma3 value of the limit problem");

  const FemSystem& sys = cp.sys();
  ControlSweep sweep;
  sweep.limit = solve_optimal_control_limit(cp, opt.tol);
  if (!sweep.limit.converged)
    throw SolverError("sweep_control: limit control problem did not converge");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  sweep.records.resize(alphas.size());
  for_each_index(alphas.size(), options.threads, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRecord& r = sweep.records[k];
    r.alpha = alphas[k];
    try {
      const OptimalPair pair = solve_optimal_control_alpha(cp, alphas[k], j, cfg, opt, sweep.limit.g_opt);
      r.state_err_V = norm(sys, Vector(pair.u_opt.u.values - sweep.limit.u_opt.u.values), NormKind::V);
      r.control_err_H = norm(sys, Vector(pair.g_opt.values - sweep.limit.g_opt.values), NormKind::H);
      r.cost_gap = std::abs(pair.cost - sweep.limit.cost);
      r.certified = pair.u_opt.certified;
      r.optimizer_converged = pair.converged;
    } catch (const std::exception& e) {
      r.state_err_V = r.control_err_H = r.cost_gap = nan;
      r.failure = e.what();
    }
    if (options.timing)
      r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<double> state, control;
  for (const auto& r : sweep.records) {
    state.push_back(r.state_err_V);
    control.push_back(r.control_err_H);
  }
  const double state_floor = error_floor(norm(sys, sweep.limit.u_opt.u, NormKind::V));
  const double control_floor = error_floor(norm(sys, sweep.limit.g_opt, NormKind::H));
  sweep.state_decreasing = decreasing_to_zero(state, state_floor);
  sweep.control_decreasing = decreasing_to_zero(control, control_floor);
  sweep.state_fraction_met = ratio(state.back(), state.front(), state_floor) <= options.state_fraction;
  sweep.control_fraction_met = ratio(control.back(), control.front(), control_floor) <= options.control_fraction;
  sweep.state_exponent = fit_loglog_exponent(alphas, state);
  sweep.control_exponent = fit_loglog_exponent(alphas, control);
  return sweep;
}

namespace {
constexpr const char* kSweepHeader = "alpha,state_err_V,control_err_H,cost_gap,certified,wall_time_s";
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& records, const std::string& comment) {
  os << "# " << comment << '\n' << kSweepHeader << '\n';
  for (const auto& r : records)
    os << fmt17(r.alpha) << ',' << fmt17(r.state_err_V) << ',' << fmt17(r.control_err_H) << ',' << fmt17(r.cost_gap)
       << ',' << (r.certified ? 1 : 0) << ',' << fmt17(r.wall_time) << '\n';
}

// State sweeps have no control or cost; those columns stay empty.
void write_sweep_csv(std::ostream& os, const StateSweep& sweep, const std::string& comment) {
  os << "# " << comment << '\n' << kSweepHeader << '\n';
  for (const auto& p : sweep.points)
    os << fmt17(p.alpha) << ',' << fmt17(p.error_V) << ",,," << (p.certified ? 1 : 0) << ',' << fmt17(p.wall_time)
       << '\n';
}

std::string loglog_svg(const std::vector<double>& alphas, const std::vector<PlotSeries>& series,
                       const std::string& comment) {
  constexpr double width = 480, height = 360, left = 60, right = 20, top = 20, bottom = 40;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series)
    for (double v : s.values)
      if (v > 0.0 && std::isfinite(v)) {
        ymin = std::min(ymin, std::log10(v));
        ymax = std::max(ymax, std::log10(v));
      }
  if (!std::isfinite(ymin)) {
    ymin = -1.0;
    ymax = 0.0;
  }
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1.0);
  const double xmin = std::floor(std::log10(alphas.front()));
  const double xmax = std::max(std::ceil(std::log10(alphas.back())), xmin + 1.0);

  auto px = [&](double a) { return left + (std::log10(a) - xmin) / (xmax - xmin) * (width - left - right); };
  auto py = [&](double v) { return top + (ymax - std::log10(v)) / (ymax - ymin) * (height - top - bottom); };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<!-- # " << comment << " -->\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right << "\" height=\""
     << height - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = xmin; e <= xmax; e += 1.0)
    os << "<text x=\"" << px(std::pow(10.0, e)) << "\" y=\"" << height - 15 << "\" font-size=\"11\" "
       << "text-anchor=\"middle\">1e" << e << "</text>\n";
  for (double e = ymin; e <= ymax; e += 1.0)
    os << "<text x=\"" << left - 5 << "\" y=\"" << py(std::pow(10.0, e)) + 4 << "\" font-size=\"11\" "
       << "text-anchor=\"end\">1e" << e << "</text>\n";
  os << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 2
     << "\" font-size=\"12\" text-anchor=\"middle\">alpha</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 4];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t k = 0; k < alphas.size() && k < series[s].values.size(); ++k) {
      const double v = series[s].values[k];
      if (v > 0.0 && std::isfinite(v))
        os << px(alphas[k]) << ',' << py(v) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << width - right - 5 << "\" y=\"" << top + 15 * (s + 1) << "\" font-size=\"11\" fill=\""
       << color << "\" text-anchor=\"end\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace hemicontrol
