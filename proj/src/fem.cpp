#include "hemicontrol/fem.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>

namespace hemicontrol {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(int n, const Triplets& t) {
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

std::vector<int> tagged_vertices(const Mesh2D& mesh, BoundaryTag tag) {
  std::set<int> nodes;
  for (const auto& e : mesh.boundary_edges)
    if (e.tag == tag) {
      nodes.insert(e.v[0]);
      nodes.insert(e.v[1]);
    }
  return {nodes.begin(), nodes.end()};
}

std::vector<int> complement(int n, const std::vector<int>& excluded) {
  std::vector<bool> skip(static_cast<std::size_t>(n), false);
  for (int i : excluded)
    skip[static_cast<std::size_t>(i)] = true;
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (!skip[static_cast<std::size_t>(i)])
      out.push_back(i);
  return out;
}

// Deterministic start vector with components in [-1, 1].
Vector scrambled_vector(int n) {
  Vector x(n);
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (int i = 0; i < n; ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    x[i] = static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  return x;
}

enum class Extreme { Smallest, Largest };

struct PencilResult {
  double eigenvalue = 0.0;
  int iterations = 0;
};

// Extreme eigenvalue of the pencil (P, B) by (inverse) power iteration with
// Rayleigh-quotient stopping. Both matrices are symmetric, B positive definite;
// for Smallest, P must be positive definite as well. The matrix that is
// inverted is factored once.
PencilResult pencil_extreme(const SparseMatrix& P, const SparseMatrix& B, Vector x, Extreme which,
                            const EigenIterationConfig& cfg, const char* what) {
  const SparseMatrix& solve_with = which == Extreme::Smallest ? P : B;
  const SparseMatrix& apply_with = which == Extreme::Smallest ? B : P;
  Eigen::SimplicialLLT<SparseMatrix> factor(solve_with);
  if (factor.info() != Eigen::Success)
    throw SolverError(std::string(what) + ": factorization failed");
  x /= energy_norm(B, x);
  double previous = x.dot(P * x);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Vector y = factor.solve(apply_with * x);
    x = y / energy_norm(B, y);
    const double current = x.dot(P * x);
    if (std::abs(current - previous) <= cfg.rel_tol * std::abs(current))
      return {current, it};
    previous = current;
  }
  throw SolverError(std::string(what) + ": eigenvalue iteration did not converge in " +
                    std::to_string(cfg.max_iterations) + " iterations");
}

} // namespace

FemSystem assemble(const Mesh2D& mesh) {
  const ValidationReport report = validate(mesh);
  if (!report.ok())
    throw std::invalid_argument("assemble: invalid mesh: " + report.findings.front().message);

  FemSystem sys;
  sys.mesh = mesh;
  const int n = static_cast<int>(mesh.vertices.size());
  sys.dof_count = n;

  Triplets stiff, mass;
  stiff.reserve(9 * mesh.triangles.size());
  mass.reserve(9 * mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = signed_area(mesh, t);
    std::array<double, 3> gx{}, gy{};
    for (std::size_t k = 0; k < 3; ++k) {
      const Point& pj = mesh.vertices[static_cast<std::size_t>(tri[(k + 1) % 3])];
      const Point& pk = mesh.vertices[static_cast<std::size_t>(tri[(k + 2) % 3])];
      gx[k] = (pj.y - pk.y) / (2.0 * area);
      gy[k] = (pk.x - pj.x) / (2.0 * area);
    }
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        stiff.emplace_back(tri[a], tri[b], area * (gx[a] * gx[b] + gy[a] * gy[b]));
        mass.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
      }
  }
  sys.stiffness = from_triplets(n, stiff);
  sys.mass_domain = from_triplets(n, mass);

  Triplets m2, m3;
  for (const auto& e : mesh.boundary_edges) {
    const Point& p = mesh.vertices[static_cast<std::size_t>(e.v[0])];
    const Point& q = mesh.vertices[static_cast<std::size_t>(e.v[1])];
    const double len = std::hypot(q.x - p.x, q.y - p.y);
    Triplets* target = e.tag == BoundaryTag::Gamma2 ? &m2 : e.tag == BoundaryTag::Gamma3 ? &m3 : nullptr;
    if (!target)
      continue;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        target->emplace_back(e.v[a], e.v[b], len / 6.0 * (a == b ? 2.0 : 1.0));
  }
  sys.mass_gamma2 = from_triplets(n, m2);
  sys.mass_gamma3 = from_triplets(n, m3);

  sys.dirichlet_g1 = tagged_vertices(mesh, BoundaryTag::Gamma1);
  const std::vector<int> g3_all = tagged_vertices(mesh, BoundaryTag::Gamma3);
  std::set_difference(g3_all.begin(), g3_all.end(), sys.dirichlet_g1.begin(), sys.dirichlet_g1.end(),
                      std::back_inserter(sys.dirichlet_g3));
  if (sys.dirichlet_g1.empty() || sys.dirichlet_g3.empty())
    throw std::invalid_argument("assemble: Gamma1 and Gamma3 must each own at least one unconstrained vertex");

  std::vector<int> constrained = sys.dirichlet_g1;
  constrained.insert(constrained.end(), sys.dirichlet_g3.begin(), sys.dirichlet_g3.end());
  sys.free_V0 = DofSubset(complement(n, sys.dirichlet_g1), n);
  sys.free_K0 = DofSubset(complement(n, constrained), n);
  sys.g3_dofs = DofSubset(sys.dirichlet_g3, n);

  sys.gamma3_weights = sys.mass_gamma3 * Vector::Ones(n);
  sys.stiffness_V0 = sys.free_V0.restrict(sys.stiffness);
  sys.stiffness_K0 = sys.free_K0.restrict(sys.stiffness);
  sys.stiffness_K0_g3 = sys.free_K0.restrict(sys.stiffness, sys.g3_dofs);
  sys.mass_V0 = sys.free_V0.restrict(sys.mass_domain);
  return sys;
}

Vector load_vector(const FemSystem& sys, const Field& g, const Field& q) {
  if (g.size() != sys.dof_count || q.size() != sys.dof_count)
    throw std::invalid_argument("load_vector: field size does not match dof count " +
                                std::to_string(sys.dof_count));
  return sys.mass_domain * g.values - sys.mass_gamma2 * q.values;
}

double norm(const FemSystem& sys, const Vector& f, NormKind which) {
  switch (which) {
  case NormKind::H:
    return energy_norm(sys.mass_domain, f);
  case NormKind::V0:
    return energy_norm(sys.stiffness, f);
  case NormKind::V:
    return std::sqrt(std::max(0.0, f.dot(sys.mass_domain * f) + f.dot(sys.stiffness * f)));
  case NormKind::Q:
    return energy_norm(sys.mass_gamma2, f);
  case NormKind::L2Gamma3:
    return energy_norm(sys.mass_gamma3, f);
  }
  return 0.0;
}

CoercivityEstimate estimate_coercivity(const FemSystem& sys, const EigenIterationConfig& cfg) {
  const SparseMatrix B = SparseMatrix(sys.stiffness_V0 + sys.mass_V0);
  const int n = sys.free_V0.size();
  const PencilResult lo =
      pencil_extreme(sys.stiffness_V0, B, Vector::Ones(n), Extreme::Smallest, cfg, "estimate_coercivity (m_a)");
  const PencilResult hi =
      pencil_extreme(sys.stiffness_V0, B, scrambled_vector(n), Extreme::Largest, cfg, "estimate_coercivity (M_a)");
  return {lo.eigenvalue, hi.eigenvalue, lo.iterations, hi.iterations};
}

double estimate_trace_norm(const FemSystem& sys, const EigenIterationConfig& cfg) {
  const SparseMatrix B = SparseMatrix(sys.stiffness_V0 + sys.mass_V0);
  const SparseMatrix M3 = sys.free_V0.restrict(sys.mass_gamma3);
  const PencilResult top =
      pencil_extreme(M3, B, Vector::Ones(sys.free_V0.size()), Extreme::Largest, cfg, "estimate_trace_norm");
  return std::sqrt(top.eigenvalue);
}

Field interpolate(const Mesh2D& mesh, const ScalarFunction& f, FieldRole role) {
  Field out{role, Vector(static_cast<Eigen::Index>(mesh.vertices.size()))};
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    out.values[static_cast<Eigen::Index>(i)] = f(mesh.vertices[i].x, mesh.vertices[i].y);
  return out;
}

ErrorNorms discretization_error(const Mesh2D& mesh, const Vector& uh, const ScalarFunction& exact,
                                const GradientFunction& exact_gradient) {
  // Symmetric 7-point rule, exact for degree 5.
  const double s15 = std::sqrt(15.0);
  const double r = (6.0 - s15) / 21.0, s = (6.0 + s15) / 21.0;
  const double wr = (155.0 - s15) / 1200.0, ws = (155.0 + s15) / 1200.0;
  const std::array<std::array<double, 3>, 7> bary{{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                                                   {r, r, 1 - 2 * r},
                                                   {r, 1 - 2 * r, r},
                                                   {1 - 2 * r, r, r},
                                                   {s, s, 1 - 2 * s},
                                                   {s, 1 - 2 * s, s},
                                                   {1 - 2 * s, s, s}}};
  const std::array<double, 7> weight{0.225, wr, wr, wr, ws, ws, ws};

  double l2 = 0.0, semi = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = signed_area(mesh, t);
    std::array<Point, 3> p{};
    std::array<double, 3> gx{}, gy{}, val{};
    for (std::size_t k = 0; k < 3; ++k) {
      p[k] = mesh.vertices[static_cast<std::size_t>(tri[k])];
      val[k] = uh[tri[k]];
    }
    for (std::size_t k = 0; k < 3; ++k) {
      const Point& pj = p[(k + 1) % 3];
      const Point& pk = p[(k + 2) % 3];
      gx[k] = (pj.y - pk.y) / (2.0 * area);
      gy[k] = (pk.x - pj.x) / (2.0 * area);
    }
    const double ux = val[0] * gx[0] + val[1] * gx[1] + val[2] * gx[2];
    const double uy = val[0] * gy[0] + val[1] * gy[1] + val[2] * gy[2];
    for (std::size_t q = 0; q < bary.size(); ++q) {
      const auto& lam = bary[q];
      const double x = lam[0] * p[0].x + lam[1] * p[1].x + lam[2] * p[2].x;
      const double y = lam[0] * p[0].y + lam[1] * p[1].y + lam[2] * p[2].y;
      const double uq = lam[0] * val[0] + lam[1] * val[1] + lam[2] * val[2];
      const double e = exact(x, y) - uq;
      const auto grad = exact_gradient(x, y);
      const double ex = grad[0] - ux, ey = grad[1] - uy;
      l2 += weight[q] * area * e * e;
      semi += weight[q] * area * (ex * ex + ey * ey);
    }
  }
  return {std::sqrt(l2), std::sqrt(semi), std::sqrt(l2 + semi)};
}

} // namespace hemicontrol
