#pragma once

#include "hemicontrol/linalg.hpp"
#include "hemicontrol/mesh.hpp"

#include <array>
#include <functional>
#include <vector>

namespace hemicontrol {

enum class FieldRole { State, Control, Adjoint, Target, Flux, Generic };

/// Nodal P1 coefficients, one per mesh vertex.
struct Field {
  FieldRole role = FieldRole::Generic;
  Vector values;

  static Field zeros(FieldRole role, Eigen::Index size) { return {role, Vector::Zero(size)}; }
  static Field constant(FieldRole role, Eigen::Index size, double value) {
    return {role, Vector::Constant(size, value)};
  }
  Eigen::Index size() const { return values.size(); }
};

enum class NormKind { H, V, V0, Q, L2Gamma3 };

/// P1 discretization of the heat-conduction forms on a tagged mesh.
///
/// Constrained dofs follow the priority Gamma1 > Gamma3 > Gamma2: a vertex
/// touching a Gamma1 edge is in `dirichlet_g1` even if it also touches Gamma3.
struct FemSystem {
  Mesh2D mesh;
  int dof_count = 0;

  SparseMatrix stiffness;    // int grad(phi_i) . grad(phi_j)
  SparseMatrix mass_domain;  // int phi_i phi_j over the domain
  SparseMatrix mass_gamma2;  // line integral over Gamma2 edges
  SparseMatrix mass_gamma3;  // line integral over Gamma3 edges

  std::vector<int> dirichlet_g1;
  std::vector<int> dirichlet_g3;
  DofSubset free_V0;  // complement of dirichlet_g1
  DofSubset free_K0;  // complement of dirichlet_g1 and dirichlet_g3
  DofSubset g3_dofs;  // dirichlet_g3 as a subset

  /// Row sums of mass_gamma3 (nodal quadrature weights on Gamma3), full size.
  Vector gamma3_weights;

  // Reduced operators cached at assembly.
  SparseMatrix stiffness_V0;
  SparseMatrix stiffness_K0;
  SparseMatrix stiffness_K0_g3;  // rows K0, columns dirichlet_g3
  SparseMatrix mass_V0;

  Field zeros(FieldRole role) const { return Field::zeros(role, dof_count); }
  Field constant(FieldRole role, double value) const { return Field::constant(role, dof_count, value); }
};

/// Assembles exact P1 element integrals. Throws std::invalid_argument when
/// the mesh fails validation or any of the three boundary portions is empty.
FemSystem assemble(const Mesh2D& mesh);

/// mass_domain * g - mass_gamma2 * q.
Vector load_vector(const FemSystem& sys, const Field& g, const Field& q);

double norm(const FemSystem& sys, const Vector& f, NormKind which);
inline double norm(const FemSystem& sys, const Field& f, NormKind which) { return norm(sys, f.values, which); }

struct EigenIterationConfig {
  int max_iterations = 20000;
  double rel_tol = 1e-8;
};

/// Discrete estimates of the coercivity and continuity constants of a(.,.)
/// with respect to the V norm on V0.
struct CoercivityEstimate {
  double m_a = 0.0;
  double M_a = 0.0;
  int iterations_min = 0;
  int iterations_max = 0;
};

CoercivityEstimate estimate_coercivity(const FemSystem& sys, const EigenIterationConfig& cfg = {});

/// Discrete estimate of the trace-operator norm from V0 into L2(Gamma3).
double estimate_trace_norm(const FemSystem& sys, const EigenIterationConfig& cfg = {});

using ScalarFunction = std::function<double(double, double)>;
using GradientFunction = std::function<std::array<double, 2>(double, double)>;

Field interpolate(const Mesh2D& mesh, const ScalarFunction& f, FieldRole role = FieldRole::Generic);

/// Errors of a P1 field against an exact solution, integrated with a
/// degree-5 rule on every triangle.
struct ErrorNorms {
  double l2 = 0.0;
  double h1_seminorm = 0.0;
  double v = 0.0;
};

ErrorNorms discretization_error(const Mesh2D& mesh, const Vector& uh, const ScalarFunction& exact,
                                const GradientFunction& exact_gradient);

} // namespace hemicontrol
