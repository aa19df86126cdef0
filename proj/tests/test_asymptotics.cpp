#include <doctest.h>

#include "hemicontrol/asymptotics.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

using namespace hemicontrol;

namespace {

const std::vector<double> kGrid{1.0, 10.0, 100.0, 1000.0, 1e4};

std::shared_ptr<const FemSystem> system_n(int n) {
  return std::make_shared<const FemSystem>(assemble(generate_unit_square(n)));
}

ControlProblem limit_target_problem(std::shared_ptr<const FemSystem> sys, double b) {
  ControlProblem cp;
  cp.system = sys;
  cp.M = 1.0;
  cp.b = b;
  cp.q = sys->zeros(FieldRole::Flux);
  cp.z_d = Field{FieldRole::Target,
                 solve_mixed_dirichlet(*sys, sys->constant(FieldRole::Control, 0.5), cp.q, b).u.values};
  return cp;
}

} // namespace

TEST_CASE("alpha grid validation") {
  CHECK_NOTHROW(check_alpha_grid(kGrid));
  CHECK_THROWS_AS(check_alpha_grid({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(check_alpha_grid({1.0, 10.0}), std::invalid_argument);
  CHECK_THROWS_AS(check_alpha_grid({1.0, 10.0, 10.0}), std::invalid_argument);
  CHECK_THROWS_AS(check_alpha_grid({0.0, 1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(check_alpha_grid({3.0, 2.0, 1.0}), std::invalid_argument);
}

TEST_CASE("log-log exponent fit") {
  std::vector<double> e;
  for (double a : kGrid)
    e.push_back(3.0 * std::pow(a, -1.5));
  REQUIRE(fit_loglog_exponent(kGrid, e).has_value());
  CHECK(*fit_loglog_exponent(kGrid, e) == doctest::Approx(-1.5).epsilon(1e-12));
  e[4] = 0.0;
  CHECK(*fit_loglog_exponent(kGrid, e) == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK_FALSE(fit_loglog_exponent(kGrid, {0, 0, 0, 0, 1.0}).has_value());
}

TEST_CASE("decreasing_to_zero") {
  CHECK(decreasing_to_zero({3, 2, 1}));
  CHECK_FALSE(decreasing_to_zero({3, 3, 1}));
  CHECK_FALSE(decreasing_to_zero({3, 4, 1}));
  CHECK(decreasing_to_zero({3, 1e-13, 2e-13}, 1e-12));
  CHECK_FALSE(decreasing_to_zero({3, 1e-13, 2.0}, 1e-12));
  CHECK(decreasing_to_zero({0, 0, 0}));
  CHECK_FALSE(decreasing_to_zero({3, NAN, 1}));
}

TEST_CASE("state sweep: quadratic closed form") {
  // With g = q = 0 the states are c x and b x, so the error is
  // b / (1 + 2 alpha) times ||x||_V = sqrt(4/3).
  const FemSystem sys = assemble(generate_unit_square(8));
  const Field zero = sys.zeros(FieldRole::Control);
  const double b = 1.0;
  const StateSweep sw = sweep_state(sys, zero, sys.zeros(FieldRole::Flux), b, kGrid, quadratic_well(b));
  REQUIRE(sw.points.size() == kGrid.size());
  for (const auto& p : sw.points) {
    CHECK(p.certified);
    CHECK(p.error_V == doctest::Approx(b / (1 + 2 * p.alpha) * std::sqrt(4.0 / 3)).epsilon(1e-8));
    CHECK(p.wall_time == 0.0);
  }
  CHECK(sw.decreasing);
  REQUIRE(sw.exponent.has_value());
  CHECK(*sw.exponent >= -1.2);
  CHECK(*sw.exponent <= -0.8);
  CHECK(sw.final_ratio <= 1e-2);
}

TEST_CASE("state sweep: quadratic errors match the Robin oracle") {
  const FemSystem sys = assemble(generate_unit_square(8));
  const Field g = sys.constant(FieldRole::Control, 0.5);
  const Field q = sys.constant(FieldRole::Flux, 0.2);
  const double b = 0.6;
  const StateSweep sw = sweep_state(sys, g, q, b, kGrid, quadratic_well(b));
  const StateSolution lim = solve_mixed_dirichlet(sys, g, q, b);
  for (const auto& p : sw.points) {
    const StateSolution r = solve_robin(sys, g, q, p.alpha, b, RobinMass::Lumped);
    const double oracle = norm(sys, Vector(r.u.values - lim.u.values), NormKind::V);
    CHECK(std::abs(p.error_V - oracle) <= 1e-8);
  }
}

TEST_CASE("state sweep: zero data gives zero errors") {
  const FemSystem sys = assemble(generate_unit_square(6));
  const StateSweep sw =
      sweep_state(sys, sys.zeros(FieldRole::Control), sys.zeros(FieldRole::Flux), 0.0, kGrid, abs_well(0.0));
  for (const auto& p : sw.points) {
    CHECK(p.error_V == 0.0);
    CHECK(p.certified);
  }
  CHECK(sw.decreasing);
  CHECK_FALSE(sw.exponent.has_value());
}

TEST_CASE("sweeps reject a mismatched b and a short grid") {
  const FemSystem sys = assemble(generate_unit_square(4));
  const Field zero = sys.zeros(FieldRole::Control);
  CHECK_THROWS_AS(sweep_state(sys, zero, sys.zeros(FieldRole::Flux), 1.0, kGrid, abs_well(0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(sweep_state(sys, zero, sys.zeros(FieldRole::Flux), 1.0, {10.0}, abs_well(1.0)),
                  std::invalid_argument);
  const ControlProblem cp = limit_target_problem(system_n(4), 1.0);
  CHECK_THROWS_AS(sweep_control(cp, kGrid, kinked_well(2.0)), std::invalid_argument);
  CHECK_THROWS_AS(sweep_control(cp, {1.0}, kinked_well(1.0)), std::invalid_argument);
}

TEST_CASE("control sweep: kinked well converges to the limit pair") {
  const ControlProblem cp = limit_target_problem(system_n(8), 1.0);
  const ControlSweep sw = sweep_control(cp, kGrid, kinked_well(1.0));
  REQUIRE(sw.records.size() == kGrid.size());
  CHECK(sw.all_certified());
  CHECK(sw.state_decreasing);
  CHECK(sw.control_decreasing);
  CHECK(sw.state_fraction_met);
  CHECK(sw.control_fraction_met);
  CHECK(sw.passed());
  CHECK(sw.records.back().cost_gap <= 1e-3 * (1 + sw.limit.cost));
  for (const auto& r : sw.records) {
    CHECK(r.failure.empty());
    CHECK(r.state_err_V >= 0.0);
    CHECK(r.control_err_H >= 0.0);
    CHECK(r.cost_gap >= 0.0);
  }
}

TEST_CASE("control sweep: quadratic well tracks the linear-state oracle") {
  const auto sys = system_n(8);
  const ControlProblem cp = limit_target_problem(sys, 1.0);
  const ControlSweep sw = sweep_control(cp, kGrid, quadratic_well(1.0));
  CHECK(sw.passed());
  CHECK(sw.records.back().cost_gap <= 1e-3 * (1 + sw.limit.cost));
  REQUIRE(sw.control_exponent.has_value());
  CHECK(*sw.control_exponent < 0.0);
  for (const auto& r : sw.records) {
    const OptimalPair oracle = solve_optimal_control_robin(cp, r.alpha);
    const double oracle_err = norm(*sys, Vector(oracle.g_opt.values - sw.limit.g_opt.values), NormKind::H);
    CHECK(std::abs(r.control_err_H - oracle_err) <= 1e-6);
  }
}

TEST_CASE("sweep CSV is byte-reproducible and independent of thread count") {
  const ControlProblem cp = limit_target_problem(system_n(6), 1.0);
  SweepOptions one, four;
  four.threads = 4;
  std::ostringstream a, b, c;
  write_sweep_csv(a, sweep_control(cp, kGrid, kinked_well(1.0), {}, {}, one).records, "run");
  write_sweep_csv(b, sweep_control(cp, kGrid, kinked_well(1.0), {}, {}, one).records, "run");
  write_sweep_csv(c, sweep_control(cp, kGrid, kinked_well(1.0), {}, {}, four).records, "run");
  CHECK(a.str() == b.str());
  CHECK(a.str() == c.str());

  std::istringstream lines(a.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "# run");
  std::getline(lines, line);
  CHECK(line == "alpha,state_err_V,control_err_H,cost_gap,certified,wall_time_s");
  int rows = 0;
  while (std::getline(lines, line))
    ++rows;
  CHECK(rows == 5);
}

TEST_CASE("state sweep CSV leaves the control columns empty") {
  const FemSystem sys = assemble(generate_unit_square(4));
  const StateSweep sw = sweep_state(sys, sys.constant(FieldRole::Control, 1.0), sys.zeros(FieldRole::Flux), 1.0,
                                    {1.0, 10.0, 100.0}, quadratic_well(1.0));
  std::ostringstream os;
  write_sweep_csv(os, sw, "state");
  std::istringstream lines(os.str());
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  std::getline(lines, line);
  CHECK(line.rfind("1,", 0) == 0);
  CHECK(line.find(",,,") != std::string::npos);
}

TEST_CASE("log-log SVG") {
  const std::string svg = loglog_svg({1, 10, 100}, {{"err", {1.0, 0.1, 0.0}}}, "hdr");
  CHECK(svg.rfind("<!-- # hdr -->", 0) == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("err") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}
