#include "hemicontrol/runner.hpp"

#include "hemicontrol/asymptotics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>
#include <vector>

namespace hemicontrol {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

class Summary {
public:
  void add(const std::string& key, const std::string& value) { lines_.emplace_back(key, value); }
  void add(const std::string& key, double value) { add(key, num(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : lines_)
      os << k << " = " << v << '\n';
  }

private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

struct Context {
  const RunConfig& cfg;
  fs::path dir;
  std::string header;  // config hash and version, written first in every file
  std::ostream& err;
  Summary summary;
};

void write_file(const Context& ctx, const std::string& name, const std::string& body) {
  std::ofstream out(ctx.dir / name, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + (ctx.dir / name).string());
  out << body;
}

void write_summary(const Context& ctx) {
  std::ostringstream os;
  os << "# " << ctx.header << '\n';
  ctx.summary.write(os);
  write_file(ctx, "summary.txt", os.str());
}

void write_result(const Context& ctx, const FemSystem& sys, const Vector& u, const Vector& g, const Vector& p) {
  std::ostringstream os;
  os << "# " << ctx.header << '\n' << "node,x,y,u,g,p\n";
  for (int i = 0; i < sys.dof_count; ++i) {
    const Point& v = sys.mesh.vertices[static_cast<std::size_t>(i)];
    os << i << ',' << num(v.x) << ',' << num(v.y) << ',' << num(u[i]) << ',' << num(g[i]) << ',' << num(p[i])
       << '\n';
  }
  write_file(ctx, "result.csv", os.str());
}

// Constants of the discrete problem and the smallness verdict for each alpha.
void add_constants(Context& ctx, const FemSystem& sys, const std::optional<Superpotential>& j,
                   const std::vector<double>& alphas) {
  const CoercivityEstimate ce = estimate_coercivity(sys);
  const double trace = estimate_trace_norm(sys);
  ctx.summary.add("m_a", ce.m_a);
  ctx.summary.add("M_a", ce.M_a);
  ctx.summary.add("trace_norm", trace);
  if (!j) {
    ctx.summary.add("smallness", std::string("n/a (no superpotential)"));
    return;
  }
  const double m_j = j->declared_m_j() ? *j->declared_m_j() : verify_hypotheses(*j, ctx.cfg.j_grid).m_j_estimate;
  ctx.summary.add("m_j", m_j);
  ctx.summary.add("smallness_alpha_limit",
                  m_j > 0.0 ? num(ce.m_a / (m_j * trace * trace)) : std::string("inf"));
  for (double a : alphas)
    ctx.summary.add("smallness[alpha=" + num(a) + "]", smallness_check(ce.m_a, a, m_j, trace));
}

struct Problem {
  std::shared_ptr<const FemSystem> sys;
  Field g{FieldRole::Control, {}};
  Field q{FieldRole::Flux, {}};
  Field z_d{FieldRole::Target, {}};
  double b = 0.0;
};

Problem build_problem(const RunConfig& cfg) {
  Problem pr;
  pr.sys = std::make_shared<const FemSystem>(assemble(generate_unit_square(cfg.mesh_n, cfg.tagging)));
  const Mesh2D& mesh = pr.sys->mesh;
  pr.b = cfg.b.value_or(cfg.j_b.value_or(0.0));
  pr.g = materialize(cfg.g, mesh, FieldRole::Control);
  pr.q = materialize(cfg.q, mesh, FieldRole::Flux);
  if (cfg.z_d.kind == FieldSpec::Kind::Expr && cfg.z_d.id == "limit_state") {
    const Field source = materialize(cfg.z_d_source, mesh, FieldRole::Control);
    pr.z_d = solve_mixed_dirichlet(*pr.sys, source, pr.q, pr.b, cfg.solver.linear_tol).u;
    pr.z_d.role = FieldRole::Target;
  } else {
    pr.z_d = materialize(cfg.z_d, mesh, FieldRole::Target);
  }
  return pr;
}

ControlProblem control_problem(const RunConfig& cfg, const Problem& pr) {
  ControlProblem cp{pr.sys, pr.z_d, *cfg.M, pr.q, pr.b};
  cp.validate();
  return cp;
}

void add_state_norms(Context& ctx, const FemSystem& sys, const StateSolution& s) {
  ctx.summary.add("u_norm_H", norm(sys, s.u, NormKind::H));
  ctx.summary.add("u_norm_V", norm(sys, s.u, NormKind::V));
  ctx.summary.add("u_norm_L2_gamma3", norm(sys, s.u, NormKind::L2Gamma3));
}

void add_certification(Context& ctx, const FemSystem& sys, const StateSolution& s, const Vector& load) {
  ctx.summary.add("converged", s.converged);
  ctx.summary.add("certified", s.certified);
  ctx.summary.add("worst_violation", s.worst_violation);
  ctx.summary.add("certification_threshold", certification_threshold(sys, load));
  ctx.summary.add("iterations", s.iterations);
}

int cmd_solve_state(Context& ctx) {
  const Problem pr = build_problem(ctx.cfg);
  const FemSystem& sys = *pr.sys;
  const StateSolution s = solve_mixed_dirichlet(sys, pr.g, pr.q, pr.b, ctx.cfg.solver.linear_tol);
  ctx.summary.add("command", std::string("solve-state"));
  add_state_norms(ctx, sys, s);
  ctx.summary.add("residual_norm", s.residual_norm);
  ctx.summary.add("iterations", s.iterations);
  add_constants(ctx, sys, std::nullopt, {});
  write_result(ctx, sys, s.u.values, pr.g.values, Vector::Zero(sys.dof_count));
  write_summary(ctx);
  return kExitOk;
}

int cmd_solve_hvi(Context& ctx) {
  const Problem pr = build_problem(ctx.cfg);
  const FemSystem& sys = *pr.sys;
  const Superpotential j = ctx.cfg.superpotential();
  const StateSolution s = solve_hemivariational(sys, pr.g, pr.q, ctx.cfg.alpha, j, ctx.cfg.solver);
  ctx.summary.add("command", std::string("solve-hvi"));
  ctx.summary.add("j", j.name());
  ctx.summary.add("alpha", ctx.cfg.alpha);
  add_state_norms(ctx, sys, s);
  add_certification(ctx, sys, s, load_vector(sys, pr.g, pr.q));
  add_constants(ctx, sys, j, {ctx.cfg.alpha});
  write_result(ctx, sys, s.u.values, pr.g.values, Vector::Zero(sys.dof_count));
  write_summary(ctx);
  if (!s.certified) {
    ctx.err << "solve-hvi: state failed certification (worst violation " << num(s.worst_violation) << ")\n";
    return kExitCertificationFailure;
  }
  return kExitOk;
}

int cmd_optimize_limit(Context& ctx) {
  const Problem pr = build_problem(ctx.cfg);
  const FemSystem& sys = *pr.sys;
  const ControlProblem cp = control_problem(ctx.cfg, pr);
  const OptimalPair pair = solve_optimal_control_limit(cp, ctx.cfg.opt.tol);
  const Field p = adjoint_limit(cp, pair.g_opt);
  ctx.summary.add("command", std::string("optimize-limit"));
  ctx.summary.add("cost", pair.cost);
  ctx.summary.add("grad_norm_H", pair.grad_norm);
  ctx.summary.add("control_norm_H", norm(sys, pair.g_opt, NormKind::H));
  add_state_norms(ctx, sys, pair.u_opt);
  ctx.summary.add("optimizer_iterations", pair.iterations);
  ctx.summary.add("optimizer_converged", pair.converged);
  add_constants(ctx, sys, std::nullopt, {});
  write_result(ctx, sys, pair.u_opt.u.values, pair.g_opt.values, p.values);
  write_summary(ctx);
  if (!pair.converged) {
    ctx.err << "optimize-limit: optimizer stopped at gradient norm " << num(pair.grad_norm) << "\n";
    return kExitSolverFailure;
  }
  return kExitOk;
}

int cmd_optimize_alpha(Context& ctx) {
  const Problem pr = build_problem(ctx.cfg);
  const FemSystem& sys = *pr.sys;
  const ControlProblem cp = control_problem(ctx.cfg, pr);
  const Superpotential j = ctx.cfg.superpotential();
  const double alpha = ctx.cfg.alpha;
  const OptimalPair pair = solve_optimal_control_alpha(cp, alpha, j, ctx.cfg.solver, ctx.cfg.opt);
  const SmoothedCost sc = smoothed_cost(cp, alpha, smooth(j, ctx.cfg.solver.epsilon_schedule.back()), pair.g_opt,
                                        pair.u_opt.u.values, ctx.cfg.solver);
  ctx.summary.add("command", std::string("optimize-alpha"));
  ctx.summary.add("j", j.name());
  ctx.summary.add("alpha", alpha);
  ctx.summary.add("cost", pair.cost);
  ctx.summary.add("smoothed_cost", sc.J);
  ctx.summary.add("grad_norm_H", pair.grad_norm);
  ctx.summary.add("control_norm_H", norm(sys, pair.g_opt, NormKind::H));
  add_state_norms(ctx, sys, pair.u_opt);
  ctx.summary.add("optimizer_iterations", pair.iterations);
  ctx.summary.add("optimizer_converged", pair.converged);
  add_certification(ctx, sys, pair.u_opt, load_vector(sys, pair.g_opt, pr.q));
  ctx.summary.add("note", std::string("descent optimizer; for nonconvex j the result may be a local optimum"));
  add_constants(ctx, sys, j, {alpha});
  write_result(ctx, sys, pair.u_opt.u.values, pair.g_opt.values, sc.adjoint.values);
  write_summary(ctx);
  if (!pair.converged) {
    ctx.err << "optimize-alpha: optimizer stopped at gradient norm " << num(pair.grad_norm) << "\n";
    return kExitSolverFailure;
  }
  if (!pair.u_opt.certified) {
    ctx.err << "optimize-alpha: optimal state failed certification\n";
    return kExitCertificationFailure;
  }
  return kExitOk;
}

SweepOptions sweep_options(const RunConfig& cfg) {
  SweepOptions o;
  o.threads = cfg.threads;
  o.timing = cfg.timing;
  o.state_fraction = cfg.state_fraction;
  o.control_fraction = cfg.control_fraction;
  return o;
}

void add_exponent(Context& ctx, const std::string& key, const std::optional<double>& e) {
  ctx.summary.add(key, e ? num(*e) : std::string("n/a"));
}

int cmd_sweep_state(Context& ctx) {
  const Problem pr = build_problem(ctx.cfg);
  const FemSystem& sys = *pr.sys;
  const Superpotential j = ctx.cfg.superpotential();
  const StateSweep sweep =
      sweep_state(sys, pr.g, pr.q, pr.b, ctx.cfg.alphas, j, ctx.cfg.solver, sweep_options(ctx.cfg));

  std::ostringstream csv;
  write_sweep_csv(csv, sweep, ctx.header);
  write_file(ctx, "sweep.csv", csv.str());
  write_file(ctx, "plot.svg", loglog_svg(sweep.alphas(), {{"state_err_V", sweep.errors()}}, ctx.header));
  const StateSolution limit = solve_mixed_dirichlet(sys, pr.g, pr.q, pr.b, ctx.cfg.solver.linear_tol);
  write_result(ctx, sys, limit.u.values, pr.g.values, Vector::Zero(sys.dof_count));

  bool certified = true;
  ctx.summary.add("command", std::string("sweep-state"));
  ctx.summary.add("j", j.name());
  ctx.summary.add("result_fields", std::string("limit state"));
  for (const auto& p : sweep.points) {
    ctx.summary.add("state_err_V[alpha=" + num(p.alpha) + "]", p.error_V);
    certified = certified && p.certified;
  }
  ctx.summary.add("decreasing", sweep.decreasing);
  ctx.summary.add("final_ratio", sweep.final_ratio);
  add_exponent(ctx, "fitted_exponent", sweep.exponent);
  ctx.summary.add("all_certified", certified);
  add_constants(ctx, sys, j, ctx.cfg.alphas);
  write_summary(ctx);
  if (!certified) {
    ctx.err << "sweep-state: at least one state failed certification\n";
    return kExitCertificationFailure;
  }
  return kExitOk;
}

int cmd_sweep_control(Context& ctx) {
  const Problem pr = build_problem(ctx.cfg);
  const FemSystem& sys = *pr.sys;
  const ControlProblem cp = control_problem(ctx.cfg, pr);
  const Superpotential j = ctx.cfg.superpotential();
  const ControlSweep sweep = sweep_control(cp, ctx.cfg.alphas, j, ctx.cfg.solver, ctx.cfg.opt, sweep_options(ctx.cfg));

  std::ostringstream csv;
  write_sweep_csv(csv, sweep.records, ctx.header);
  write_file(ctx, "sweep.csv", csv.str());
  std::vector<double> state, control, gap;
  for (const auto& r : sweep.records) {
    state.push_back(r.state_err_V);
    control.push_back(r.control_err_H);
    gap.push_back(r.cost_gap);
  }
  write_file(ctx, "plot.svg",
             loglog_svg(ctx.cfg.alphas, {{"state_err_V", state}, {"control_err_H", control}, {"cost_gap", gap}},
                        ctx.header));

  write_result(ctx, sys, sweep.limit.u_opt.u.values, sweep.limit.g_opt.values,
               adjoint_limit(cp, sweep.limit.g_opt).values);

  ctx.summary.add("command", std::string("sweep-control"));
  ctx.summary.add("j", j.name());
  ctx.summary.add("result_fields", std::string("limit optimal pair and adjoint"));
  ctx.summary.add("limit_cost", sweep.limit.cost);
  ctx.summary.add("limit_control_norm_H", norm(sys, sweep.limit.g_opt, NormKind::H));
  bool failed = false;
  for (const auto& r : sweep.records) {
    const std::string tag = "[alpha=" + num(r.alpha) + "]";
    if (!r.failure.empty()) {
      ctx.summary.add("failure" + tag, r.failure);
      ctx.err << "sweep-control: alpha " << num(r.alpha) << ": " << r.failure << "\n";
      failed = true;
    }
    ctx.summary.add("optimizer_converged" + tag, r.optimizer_converged);
  }
  ctx.summary.add("state_decreasing", sweep.state_decreasing);
  ctx.summary.add("control_decreasing", sweep.control_decreasing);
  ctx.summary.add("state_fraction_met", sweep.state_fraction_met);
  ctx.summary.add("control_fraction_met", sweep.control_fraction_met);
  add_exponent(ctx, "state_exponent", sweep.state_exponent);
  add_exponent(ctx, "control_exponent", sweep.control_exponent);
  ctx.summary.add("all_certified", sweep.all_certified());
  ctx.summary.add("note", std::string("errors come from a descent optimizer; for nonconvex j the alpha optima "
                                      "may be local, so convergence is observed, not verified"));
  add_constants(ctx, sys, j, ctx.cfg.alphas);
  write_summary(ctx);
  if (failed)
    return kExitSolverFailure;
  if (!sweep.all_certified()) {
    ctx.err << "sweep-control: at least one optimal state failed certification\n";
    return kExitCertificationFailure;
  }
  return kExitOk;
}

int cmd_verify_j(Context& ctx) {
  const Superpotential j = ctx.cfg.superpotential();
  const HypothesisReport report = verify_hypotheses(j, ctx.cfg.j_grid);
  ctx.summary.add("command", std::string("verify-j"));
  ctx.summary.add("j", j.name());
  ctx.summary.add("samples", static_cast<int>(report.samples));
  ctx.summary.add("growth_margin", report.growth_margin);
  ctx.summary.add("sign_max", report.sign_max);
  ctx.summary.add("uniqueness_margin", report.uniqueness_margin);
  ctx.summary.add("m_j_estimate", report.m_j_estimate);
  ctx.summary.add("growth_violations", static_cast<int>(report.count(HypothesisCondition::Growth)));
  ctx.summary.add("sign_violations", static_cast<int>(report.count(HypothesisCondition::Sign)));
  ctx.summary.add("uniqueness_violations", static_cast<int>(report.count(HypothesisCondition::Uniqueness)));
  ctx.summary.add("passed", report.passed());

  const Problem pr = build_problem(ctx.cfg);
  add_constants(ctx, *pr.sys, j, {ctx.cfg.alpha});
  write_summary(ctx);
  if (!report.passed()) {
    ctx.err << "verify-j: " << report.violations.size() << " hypothesis violations for " << j.name() << "\n";
    return kExitCertificationFailure;
  }
  return kExitOk;
}

} // namespace

int run(const std::string& command, const RunConfig& config, const std::optional<std::string>& out_dir,
        std::ostream& err) {
  try {
    config.require_for(command);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfigError;
  }

  Context ctx{config, fs::path(out_dir.value_or(config.output_dir)),
              "config " + config.hash() + " hemicontrol " + kVersion, err, {}};
  try {
    fs::create_directories(ctx.dir);
    if (command == "solve-state")
      return cmd_solve_state(ctx);
    if (command == "solve-hvi")
      return cmd_solve_hvi(ctx);
    if (command == "optimize-limit")
      return cmd_optimize_limit(ctx);
    if (command == "optimize-alpha")
      return cmd_optimize_alpha(ctx);
    if (command == "sweep-state")
      return cmd_sweep_state(ctx);
    if (command == "sweep-control")
      return cmd_sweep_control(ctx);
    return cmd_verify_j(ctx);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << command << ": invalid input: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << command << ": " << e.what() << '\n';
    return kExitSolverFailure;
  }
}

int run(const std::string& command, const std::string& config_path, const std::optional<std::string>& out_dir,
        std::ostream& err) {
  try {
    return run(command, load_config(config_path), out_dir, err);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfigError;
  }
}

} // namespace hemicontrol
