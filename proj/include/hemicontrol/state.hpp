#pragma once

#include "hemicontrol/fem.hpp"
#include "hemicontrol/superpotential.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace hemicontrol {

struct HviSolverConfig {
  std::vector<double> epsilon_schedule{1e-1, 1e-2, 1e-3, 1e-4};
  double newton_tol = 1e-10;  // relative to 1 + ||L||
  int max_newton = 50;        // per smoothing level
  double linear_tol = 1e-12;
  double damping = 0.5;
  int max_backtracks = 30;
  int max_active_set = 25;    // switches allowed in the nonsmooth finishing step
  int certify_trials = 16;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless the schedule is strictly decreasing
  /// and positive and every tolerance/count is usable.
  void validate() const;
};

struct StateSolution {
  Field u{FieldRole::State, {}};
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
  bool certified = false;
  double worst_violation = 0.0;
  std::optional<double> alpha;
  std::vector<double> epsilon_schedule;  // levels actually solved, including inserted midpoints
};

/// Limit problem: u = 0 on Gamma1, u = b on Gamma3, a(u, v) = L(v) on K0.
/// Throws SolverError if CG does not reach linear_tol.
StateSolution solve_mixed_dirichlet(const FemSystem& sys, const Field& g, const Field& q, double b,
                                    double linear_tol = 1e-12);

enum class RobinMass { Consistent, Lumped };

/// (A + 2 alpha M3) u = L + 2 alpha M3 b on V0, the state equation for the
/// quadratic superpotential. With RobinMass::Lumped, M3 is replaced by the
/// nodal Gamma3 weights used by the hemivariational solver.
StateSolution solve_robin(const FemSystem& sys, const Field& g, const Field& q, double alpha, double b,
                          RobinMass mass = RobinMass::Consistent, double linear_tol = 1e-12);

/// Hemivariational state: a(u,v) + alpha sum_i w_i j0(u_i; v_i) >= L(v) for
/// all v in V0, with nodal quadrature on Gamma3.
///
/// Runs a smoothing homotopy over cfg.epsilon_schedule with damped Newton at
/// each level, then fixes every Gamma3 node either at a breakpoint or on a
/// smooth piece and iterates that active set until the nodal inclusion holds.
/// The returned state is certified by hvi_residual_check. Failures never
/// throw; they leave `converged` or `certified` false.
StateSolution solve_hemivariational(const FemSystem& sys, const Field& g, const Field& q, double alpha,
                                    const Superpotential& j, const HviSolverConfig& cfg = {});

/// Most negative value of a(u,v) + alpha sum_i w_i j0(u_i; v_i) - L(v) over
/// seeded random unit-V-norm directions and the normalized nodal directions
/// +-phi_i of every free node; 0 if none is negative.
double hvi_residual_check(const FemSystem& sys, const Field& u, const Field& g, const Field& q, double alpha,
                          const Superpotential& j, int trials, std::uint64_t seed);

/// A state certifies when its worst violation is >= -threshold.
double certification_threshold(const FemSystem& sys, const Vector& load);

// Building blocks shared with the control layer.

struct SmoothedState {
  Vector u;  // full dof vector, zero on Gamma1
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Damped Newton for A u + alpha W j'_eps(u) = L on V0 starting from `start`.
SmoothedState solve_smoothed_hvi(const FemSystem& sys, const Vector& load, double alpha,
                                 const SmoothedDerivative& jeps, const Vector& start, const HviSolverConfig& cfg);

/// Jacobian A + alpha W diag(j''_eps(u)) restricted to V0.
SparseMatrix smoothed_jacobian(const FemSystem& sys, const Vector& u, double alpha, const SmoothedDerivative& jeps);

/// Robin-type initial guess with coefficient alpha (j(b+1) - 2 j(b) + j(b-1)).
Vector hvi_initial_guess(const FemSystem& sys, const Vector& load, double alpha, const Superpotential& j,
                         double linear_tol);

} // namespace hemicontrol
