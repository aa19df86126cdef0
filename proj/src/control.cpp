#include "hemicontrol/control.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace hemicontrol {

namespace {

constexpr double kInnerTol = 1e-13;

double h_inner(const FemSystem& sys, const Vector& a, const Vector& b) { return a.dot(sys.mass_domain * b); }
double h_norm(const FemSystem& sys, const Vector& a) { return std::sqrt(std::max(0.0, h_inner(sys, a, a))); }

// Affine control-to-state map u(g) = S g + u(0) with its H-adjoint S*.
struct LinearStateModel {
  std::function<Vector(const Vector&)> state;
  std::function<Vector(const Vector&)> sensitivity;
  std::function<Vector(const Vector&)> adjoint;
};

LinearStateModel limit_model(const ControlProblem& cp) {
  const FemSystem& sys = cp.sys();
  LinearStateModel m;
  m.state = [&cp, &sys](const Vector& g) {
    return solve_mixed_dirichlet(sys, Field{FieldRole::Control, g}, cp.q, cp.b, kInnerTol).u.values;
  };
  m.sensitivity = [&sys](const Vector& d) {
    return solve_mixed_dirichlet(sys, Field{FieldRole::Control, d}, sys.zeros(FieldRole::Flux), 0.0, kInnerTol)
        .u.values;
  };
  m.adjoint = [&sys](const Vector& w) {
    const Vector rhs = sys.free_K0.restrict(Vector(sys.mass_domain * w));
    Vector p = Vector::Zero(rhs.size());
    const CgResult cg = pcg(sys.stiffness_K0, rhs, p, kInnerTol, std::max(1000, 10 * static_cast<int>(rhs.size())));
    if (!cg.converged)
      throw SolverError("limit adjoint: CG did not converge after " + std::to_string(cg.iterations) + " iterations");
    return sys.free_K0.extend(p);
  };
  return m;
}

LinearStateModel robin_model(const ControlProblem& cp, double alpha) {
  const FemSystem& sys = cp.sys();
  LinearStateModel m;
  m.state = [&cp, &sys, alpha](const Vector& g) {
    return solve_robin(sys, Field{FieldRole::Control, g}, cp.q, alpha, cp.b, RobinMass::Lumped, kInnerTol).u.values;
  };
  m.sensitivity = [&sys, alpha](const Vector& d) {
    return solve_robin(sys, Field{FieldRole::Control, d}, sys.zeros(FieldRole::Flux), alpha, 0.0, RobinMass::Lumped,
                       kInnerTol)
        .u.values;
  };
  // The lumped Robin operator is symmetric, so its adjoint solve is another
  // Robin solve with the tracking residual as a source and no data.
  m.adjoint = [&sys, alpha](const Vector& w) {
    return solve_robin(sys, Field{FieldRole::Control, w}, sys.zeros(FieldRole::Flux), alpha, 0.0, RobinMass::Lumped,
                       kInnerTol)
        .u.values;
  };
  return m;
}

struct QuadraticSolve {
  Vector g;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// CG on (M I + S*S) g = S*(z_d - u(0)) in the H inner product.
QuadraticSolve minimize_quadratic(const ControlProblem& cp, const LinearStateModel& model, double tol, Vector g) {
  const FemSystem& sys = cp.sys();
  const Vector& z = cp.z_d.values;
  auto gradient = [&](const Vector& x) { return Vector(cp.M * x + model.adjoint(Vector(model.state(x) - z))); };

  const double reference = 1.0 + h_norm(sys, gradient(Vector::Zero(sys.dof_count)));
  const double target = tol * reference;
  const int max_iterations = std::max(100, 2 * sys.dof_count);

  QuadraticSolve out;
  // A few restarts from the true gradient guard against recurrence drift.
  for (int restart = 0; restart < 4; ++restart) {
    Vector r = -gradient(g);
    double rr = h_inner(sys, r, r);
    out.grad_norm = std::sqrt(rr);
    if (out.grad_norm <= target) {
      out.converged = true;
      break;
    }
    Vector d = r;
    for (int it = 0; it < max_iterations && std::sqrt(rr) > target; ++it) {
      const Vector Hd = cp.M * d + model.adjoint(model.sensitivity(d));
      const double curvature = h_inner(sys, d, Hd);
      if (!(curvature > 0.0))
        throw SolverError("control CG breakdown: non-positive curvature " + std::to_string(curvature));
      const double step = rr / curvature;
      g += step * d;
      r -= step * Hd;
      const double rr_next = h_inner(sys, r, r);
      d = r + (rr_next / rr) * d;
      rr = rr_next;
      ++out.iterations;
    }
  }
  if (!out.converged) {
    out.grad_norm = h_norm(sys, gradient(g));
    out.converged = out.grad_norm <= target;
  }
  out.g = std::move(g);
  return out;
}

Vector smoothed_homotopy_state(const FemSystem& sys, const Vector& load, double alpha, const Superpotential& j,
                               const HviSolverConfig& cfg, bool& converged) {
  Vector u = hvi_initial_guess(sys, load, alpha, j, cfg.linear_tol);
  converged = true;
  for (double eps : cfg.epsilon_schedule) {
    const SmoothedState level = solve_smoothed_hvi(sys, load, alpha, smooth(j, eps), u, cfg);
    converged = converged && level.converged;
    u = level.u;
  }
  return u;
}

} // namespace

void ControlProblem::validate() const {
  if (!system)
    throw std::invalid_argument("ControlProblem: no FEM system");
  if (!(M > 0.0))
    throw std::invalid_argument("ControlProblem: M must be positive");
  if (z_d.size() != system->dof_count || q.size() != system->dof_count)
    throw std::invalid_argument("ControlProblem: z_d and q must have one value per vertex");
}

double tracking_cost(const ControlProblem& cp, const Vector& u, const Vector& g) {
  const Vector e = u - cp.z_d.values;
  return 0.5 * h_inner(cp.sys(), e, e) + 0.5 * cp.M * h_inner(cp.sys(), g, g);
}

CostValue cost_limit(const ControlProblem& cp, const Field& g) {
  cp.validate();
  CostValue out;
  out.u = solve_mixed_dirichlet(cp.sys(), g, cp.q, cp.b);
  out.J = tracking_cost(cp, out.u.u.values, g.values);
  return out;
}

Field adjoint_limit(const ControlProblem& cp, const Field& g) {
  cp.validate();
  const LinearStateModel model = limit_model(cp);
  return {FieldRole::Adjoint, model.adjoint(Vector(model.state(g.values) - cp.z_d.values))};
}

Field gradient_limit(const ControlProblem& cp, const Field& g) {
  const Field p = adjoint_limit(cp, g);
  return {FieldRole::Control, cp.M * g.values + p.values};
}

OptimalPair solve_optimal_control_limit(const ControlProblem& cp, double tol, const std::optional<Field>& start) {
  cp.validate();
  const FemSystem& sys = cp.sys();
  Vector g0 = start ? start->values : Vector::Zero(sys.dof_count);
  if (g0.size() != sys.dof_count)
    throw std::invalid_argument("solve_optimal_control_limit: start has the wrong size");

  const QuadraticSolve qs = minimize_quadratic(cp, limit_model(cp), tol, std::move(g0));
  OptimalPair pair;
  pair.g_opt = Field{FieldRole::Control, qs.g};
  pair.u_opt = solve_mixed_dirichlet(sys, pair.g_opt, cp.q, cp.b, kInnerTol);
  pair.cost = tracking_cost(cp, pair.u_opt.u.values, qs.g);
  pair.grad_norm = qs.grad_norm;
  pair.iterations = qs.iterations;
  pair.converged = qs.converged;
  return pair;
}

OptimalPair solve_optimal_control_robin(const ControlProblem& cp, double alpha, double tol) {
  cp.validate();
  if (!(alpha > 0.0))
    throw std::invalid_argument("solve_optimal_control_robin: alpha must be positive");
  const FemSystem& sys = cp.sys();
  const QuadraticSolve qs = minimize_quadratic(cp, robin_model(cp, alpha), tol, Vector::Zero(sys.dof_count));
  OptimalPair pair;
  pair.g_opt = Field{FieldRole::Control, qs.g};
  pair.u_opt = solve_robin(sys, pair.g_opt, cp.q, alpha, cp.b, RobinMass::Lumped, kInnerTol);
  pair.cost = tracking_cost(cp, pair.u_opt.u.values, qs.g);
  pair.grad_norm = qs.grad_norm;
  pair.iterations = qs.iterations;
  pair.converged = qs.converged;
  return pair;
}

CostValue cost_alpha(const ControlProblem& cp, double alpha, const Superpotential& j, const Field& g,
                     const HviSolverConfig& cfg) {
  cp.validate();
  CostValue out;
  out.u = solve_hemivariational(cp.sys(), g, cp.q, alpha, j, cfg);
  out.J = tracking_cost(cp, out.u.u.values, g.values);
  return out;
}

SmoothedCost smoothed_cost(const ControlProblem& cp, double alpha, const SmoothedDerivative& jeps, const Field& g,
                           const Vector& warm, const HviSolverConfig& cfg) {
  const FemSystem& sys = cp.sys();
  const Vector load = load_vector(sys, g, cp.q);

  SmoothedCost out;
  SmoothedState st = solve_smoothed_hvi(sys, load, alpha, jeps, warm, cfg);
  if (!st.converged) {
    bool homotopy_ok = false;
    Vector u = smoothed_homotopy_state(sys, load, alpha, jeps.superpotential(), cfg, homotopy_ok);
    st = solve_smoothed_hvi(sys, load, alpha, jeps, u, cfg);
  }
  out.u = st.u;
  out.converged = st.converged;
  out.J = tracking_cost(cp, out.u, g.values);

  const SparseMatrix J = smoothed_jacobian(sys, out.u, alpha, jeps);
  const Vector rhs = sys.free_V0.restrict(Vector(sys.mass_domain * (out.u - cp.z_d.values)));
  Vector p = Vector::Zero(rhs.size());
  solve_symmetric(J, rhs, p, kInnerTol);
  out.adjoint = Field{FieldRole::Adjoint, sys.free_V0.extend(p)};
  out.gradient = Field{FieldRole::Control, cp.M * g.values + out.adjoint.values};
  return out;
}

namespace {

struct DescentResult {
  Field g{FieldRole::Control, {}};
  double J = std::numeric_limits<double>::infinity();
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

DescentResult steepest_descent(const ControlProblem& cp, double alpha, const SmoothedDerivative& jeps, Field g,
                               const HviSolverConfig& cfg, const OptimizerConfig& opt) {
  const FemSystem& sys = cp.sys();
  bool homotopy_ok = false;
  const Vector warm =
      smoothed_homotopy_state(sys, load_vector(sys, g, cp.q), alpha, jeps.superpotential(), cfg, homotopy_ok);
  SmoothedCost current = smoothed_cost(cp, alpha, jeps, g, warm, cfg);

  DescentResult out;
  double step = 1.0 / cp.M;
  for (int it = 0;; ++it) {
    out.grad_norm = h_norm(sys, current.gradient.values);
    if (out.grad_norm <= opt.tol) {
      out.converged = current.converged;
      break;
    }
    if (it >= opt.max_iters)
      break;

    const Vector direction = -current.gradient.values;
    const double slope = out.grad_norm * out.grad_norm;
    bool accepted = false;
    SmoothedCost trial;
    for (int k = 0; k < 60; ++k) {
      Field candidate{FieldRole::Control, g.values + step * direction};
      trial = smoothed_cost(cp, alpha, jeps, candidate, current.u, cfg);
      const double required = opt.armijo_c * step * slope;
      // Below the roundoff of J the sufficient-decrease margin is not
      // resolvable; a non-increasing cost must then also shrink the gradient,
      // so steps that only ride on rounding noise are refused.
      const bool resolvable = required > 64.0 * std::numeric_limits<double>::epsilon() * std::abs(current.J);
      const bool accept = resolvable ? trial.J <= current.J - required
                                     : trial.J <= current.J && h_norm(sys, trial.gradient.values) < out.grad_norm;
      if (trial.converged && accept) {
        accepted = true;
        g = std::move(candidate);
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      break;

    // Barzilai-Borwein step in the H metric for the next trial.
    const Vector s = step * direction;
    const Vector y = trial.gradient.values - current.gradient.values;
    const double sy = h_inner(sys, s, y);
    step = sy > 0.0 ? std::clamp(h_inner(sys, s, s) / sy, 1e-6 / cp.M, 1e3 / cp.M) : 1.0 / cp.M;
    current = std::move(trial);
    out.iterations = it + 1;
  }
  out.g = std::move(g);
  out.J = current.J;
  return out;
}

} // namespace

OptimalPair solve_optimal_control_alpha(const ControlProblem& cp, double alpha, const Superpotential& j,
                                        const HviSolverConfig& cfg, const OptimizerConfig& opt,
                                        const std::optional<Field>& limit_control) {
  cp.validate();
  cfg.validate();
  if (!(alpha > 0.0))
    throw std::invalid_argument("solve_optimal_control_alpha: alpha must be positive");
  if (!(opt.tol > 0.0) || opt.max_iters < 0 || !(opt.armijo_c > 0.0 && opt.armijo_c < 1.0))
    throw std::invalid_argument("solve_optimal_control_alpha: invalid optimizer configuration");

  const FemSystem& sys = cp.sys();
  const SmoothedDerivative jeps = smooth(j, cfg.epsilon_schedule.back());
  const Field g_limit = limit_control ? *limit_control : solve_optimal_control_limit(cp, opt.tol).g_opt;

  DescentResult best;
  for (const Field& start : {sys.zeros(FieldRole::Control), g_limit}) {
    DescentResult run = steepest_descent(cp, alpha, jeps, start, cfg, opt);
    if (run.J < best.J)
      best = std::move(run);
  }

  OptimalPair pair;
  pair.g_opt = best.g;
  pair.u_opt = solve_hemivariational(sys, best.g, cp.q, alpha, j, cfg);
  pair.cost = tracking_cost(cp, pair.u_opt.u.values, best.g.values);
  pair.grad_norm = best.grad_norm;
  pair.iterations = best.iterations;
  pair.converged = best.converged;
  return pair;
}

} // namespace hemicontrol
