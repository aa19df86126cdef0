#pragma once

#include "hemicontrol/fem.hpp"
#include "hemicontrol/state.hpp"
#include "hemicontrol/superpotential.hpp"

#include <memory>
#include <optional>

namespace hemicontrol {

/// Tracking problem min 1/2 ||u - z_d||_H^2 + M/2 ||g||_H^2 over distributed
/// controls g, with fixed Gamma2 flux q and Gamma3 value b. All norms are the
/// discrete L2(Omega) norms through mass_domain.
struct ControlProblem {
  std::shared_ptr<const FemSystem> system;
  Field z_d{FieldRole::Target, {}};
  double M = 1.0;
  Field q{FieldRole::Flux, {}};
  double b = 0.0;

  const FemSystem& sys() const { return *system; }
  /// Throws std::invalid_argument on a missing system, M <= 0, or mis-sized fields.
  void validate() const;
};

struct OptimizerConfig {
  double tol = 1e-8;
  int max_iters = 500;
  double armijo_c = 1e-4;
};

struct OptimalPair {
  Field g_opt{FieldRole::Control, {}};
  StateSolution u_opt;
  double cost = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct CostValue {
  double J = 0.0;
  StateSolution u;
};

/// 1/2 ||u - z_d||_H^2 + M/2 ||g||_H^2 for a given state field.
double tracking_cost(const ControlProblem& cp, const Vector& u, const Vector& g);

CostValue cost_limit(const ControlProblem& cp, const Field& g);

/// Riesz representative in H of the limit-cost derivative: M g + p, where
/// a(v, p) = (u_g - z_d, v)_H for all v in K0.
Field gradient_limit(const ControlProblem& cp, const Field& g);

/// Conjugate gradients in the H inner product on the reduced normal
/// equations; stops when ||grad J||_H <= tol (1 + ||grad J(0)||_H).
OptimalPair solve_optimal_control_limit(const ControlProblem& cp, double tol = 1e-8,
                                        const std::optional<Field>& start = std::nullopt);

/// Same quadratic problem with the lumped Robin state of the quadratic
/// superpotential (coefficient 2 alpha). Serves as the linear-state oracle for
/// the hemivariational optimizer.
OptimalPair solve_optimal_control_robin(const ControlProblem& cp, double alpha, double tol = 1e-10);

/// J_alpha(g) evaluated with the certified hemivariational state.
CostValue cost_alpha(const ControlProblem& cp, double alpha, const Superpotential& j, const Field& g,
                     const HviSolverConfig& cfg = {});

struct SmoothedCost {
  double J = 0.0;
  Field gradient{FieldRole::Control, {}};
  Field adjoint{FieldRole::Adjoint, {}};
  Vector u;
  bool converged = false;
};

/// Cost and discrete-adjoint gradient of the eps-smoothed reduced problem.
/// The adjoint solves (A + alpha W diag(j''_eps(u))) p = M_dom (u - z_d) on V0.
/// `warm` seeds Newton; when it fails the full smoothing schedule is rerun.
SmoothedCost smoothed_cost(const ControlProblem& cp, double alpha, const SmoothedDerivative& jeps, const Field& g,
                           const Vector& warm, const HviSolverConfig& cfg);

/// Steepest descent in H with Armijo backtracking on the smoothed reduced
/// cost (smallest eps of the schedule), started from 0 and from the limit
/// optimum; the lower cost wins and its state is re-solved and certified.
OptimalPair solve_optimal_control_alpha(const ControlProblem& cp, double alpha, const Superpotential& j,
                                        const HviSolverConfig& cfg = {}, const OptimizerConfig& opt = {},
                                        const std::optional<Field>& limit_control = std::nullopt);

/// Adjoint field of the limit problem at g (zero on Gamma1 and Gamma3).
Field adjoint_limit(const ControlProblem& cp, const Field& g);

} // namespace hemicontrol
