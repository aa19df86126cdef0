#include "hemicontrol/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace hemicontrol {

void HviSolverConfig::validate() const {
  if (epsilon_schedule.empty())
    throw std::invalid_argument("HviSolverConfig: epsilon_schedule is empty");
  for (std::size_t k = 0; k < epsilon_schedule.size(); ++k) {
    if (!(epsilon_schedule[k] > 0.0))
      throw std::invalid_argument("HviSolverConfig: epsilon_schedule entries must be positive");
    if (k > 0 && !(epsilon_schedule[k] < epsilon_schedule[k - 1]))
      throw std::invalid_argument("HviSolverConfig: epsilon_schedule must be strictly decreasing");
  }
  if (!(newton_tol > 0.0) || !(linear_tol > 0.0))
    throw std::invalid_argument("HviSolverConfig: tolerances must be positive");
  if (max_newton < 1 || max_backtracks < 0 || max_active_set < 1 || certify_trials < 0)
    throw std::invalid_argument("HviSolverConfig: iteration counts out of range");
  if (!(damping > 0.0 && damping < 1.0))
    throw std::invalid_argument("HviSolverConfig: damping must lie in (0, 1)");
}

namespace {

void check_sizes(const FemSystem& sys, const Field& g, const Field& q, const char* who) {
  if (g.size() != sys.dof_count || q.size() != sys.dof_count)
    throw std::invalid_argument(std::string(who) + ": field size does not match dof count");
}

void require_positive_alpha(double alpha, const char* who) {
  if (!(alpha > 0.0))
    throw std::invalid_argument(std::string(who) + ": alpha must be positive");
}

// Local (V0) indices of the nodes carrying a Gamma3 quadrature weight.
std::vector<int> gamma3_local(const Vector& w) {
  std::vector<int> out;
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (w[k] > 0.0)
      out.push_back(static_cast<int>(k));
  return out;
}

void add_to_diagonal(SparseMatrix& A, const std::vector<int>& idx, const Vector& values) {
  for (std::size_t n = 0; n < idx.size(); ++n)
    A.coeffRef(idx[n], idx[n]) += values[static_cast<Eigen::Index>(n)];
}

// Damped Newton for F(x) = 0 with a symmetric Jacobian.
template <class Residual, class Jacobian>
SmoothedState damped_newton(Vector x, const Residual& residual, const Jacobian& jacobian, double tol,
                            const HviSolverConfig& cfg) {
  SmoothedState out;
  Vector F = residual(x);
  double fnorm = F.norm();
  bool stagnated = false;
  for (int it = 0; it < cfg.max_newton && fnorm > tol; ++it) {
    const SparseMatrix J = jacobian(x);
    Vector delta = Vector::Zero(x.size());
    solve_symmetric(J, -F, delta, cfg.linear_tol);
    ++out.iterations;
    // With a stiff boundary term the residual cannot drop below roundoff
    // times the Jacobian scale; a negligible Newton step means we are there.
    if (delta.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      stagnated = true;
      break;
    }

    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      Vector trial = x + t * delta;
      Vector Ft = residual(trial);
      const double tnorm = Ft.norm();
      if (tnorm < fnorm) {
        x = std::move(trial);
        F = std::move(Ft);
        fnorm = tnorm;
        accepted = true;
        break;
      }
      t *= cfg.damping;
    }
    if (!accepted)
      break;
  }
  out.u = std::move(x);
  out.residual_norm = fnorm;
  out.converged = fnorm <= tol || stagnated;
  return out;
}

double uniform_pm1(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

constexpr int kMaxInsertedLevels = 32;

struct ActiveSetOutcome {
  Vector u_local;
  int iterations = 0;
  double residual_norm = 0.0;
  bool consistent = false;
};

// Nonsmooth finishing step. Each Gamma3 node is either pinned at a breakpoint
// (its flux multiplier must lie in the Clarke interval there) or assigned to a
// smooth piece (its flux equals alpha w j'(u) on that piece). The assignment
// is updated until both kinds of nodes are consistent.
ActiveSetOutcome resolve_active_set(const FemSystem& sys, const Vector& L, double alpha, const Superpotential& j,
                                    Vector x, double eps, double flux_tol, const HviSolverConfig& cfg) {
  const Vector w = sys.free_V0.restrict(sys.gamma3_weights);
  const std::vector<int> g3 = gamma3_local(w);
  const auto& bps = j.breakpoints();
  const int n = static_cast<int>(x.size());

  std::vector<int> pinned(g3.size(), -1);
  std::vector<std::size_t> piece(g3.size(), 0);
  for (std::size_t k = 0; k < g3.size(); ++k) {
    const double r = x[g3[k]];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < bps.size(); ++m) {
      const double d = std::abs(r - bps[m]);
      if (d <= eps && d < best) {
        best = d;
        pinned[k] = static_cast<int>(m);
      }
    }
    piece[k] = j.piece_right_of(r);
  }

  ActiveSetOutcome out;
  const double newton_tol = cfg.newton_tol * (1.0 + L.norm());
  for (int round = 0; round < cfg.max_active_set; ++round) {
    out.iterations = round + 1;
    std::vector<int> unknowns;
    std::vector<bool> is_pinned(static_cast<std::size_t>(n), false);
    for (std::size_t k = 0; k < g3.size(); ++k)
      if (pinned[k] >= 0) {
        is_pinned[static_cast<std::size_t>(g3[k])] = true;
        x[g3[k]] = bps[static_cast<std::size_t>(pinned[k])];
      }
    for (int i = 0; i < n; ++i)
      if (!is_pinned[static_cast<std::size_t>(i)])
        unknowns.push_back(i);
    const DofSubset free(unknowns, n);
    const SparseMatrix A_free = free.restrict(sys.stiffness_V0);

    std::vector<int> smooth_nodes;   // positions in `free`
    std::vector<std::size_t> smooth_piece;
    std::vector<double> smooth_weight;
    for (std::size_t k = 0; k < g3.size(); ++k)
      if (pinned[k] < 0) {
        smooth_nodes.push_back(free.local(g3[k]));
        smooth_piece.push_back(piece[k]);
        smooth_weight.push_back(alpha * w[g3[k]]);
      }

    auto assemble_full = [&](const Vector& part) {
      Vector full = x;
      free.scatter(part, full);
      return full;
    };
    auto residual = [&](const Vector& part) {
      const Vector full = assemble_full(part);
      Vector F = free.restrict(Vector(sys.stiffness_V0 * full - L));
      for (std::size_t s = 0; s < smooth_nodes.size(); ++s)
        F[smooth_nodes[s]] += smooth_weight[s] * j.piece(smooth_piece[s]).slope(part[smooth_nodes[s]]);
      return F;
    };
    auto jacobian = [&](const Vector& part) {
      SparseMatrix J = A_free;
      Vector d(static_cast<Eigen::Index>(smooth_nodes.size()));
      for (std::size_t s = 0; s < smooth_nodes.size(); ++s)
        d[static_cast<Eigen::Index>(s)] =
            smooth_weight[s] * j.piece(smooth_piece[s]).curvature(part[smooth_nodes[s]]);
      add_to_diagonal(J, smooth_nodes, d);
      return J;
    };

    const SmoothedState solved = damped_newton(free.restrict(x), residual, jacobian, newton_tol, cfg);
    x = assemble_full(solved.u);
    out.residual_norm = solved.residual_norm;

    const Vector R = sys.stiffness_V0 * x - L;
    bool changed = false;
    for (std::size_t k = 0; k < g3.size(); ++k) {
      const int i = g3[k];
      if (pinned[k] < 0) {
        const std::size_t p = piece[k];
        const double lower = p == 0 ? -INFINITY : bps[p - 1];
        const double upper = p == bps.size() ? INFINITY : bps[p];
        if (x[i] < lower) {
          pinned[k] = static_cast<int>(p - 1);
          changed = true;
        } else if (x[i] > upper) {
          pinned[k] = static_cast<int>(p);
          changed = true;
        }
        continue;
      }
      const double beta = bps[static_cast<std::size_t>(pinned[k])];
      const ClarkeInterval ci = clarke_interval(j, beta);
      const double aw = alpha * w[i];
      // Inclusion -R_i in alpha w_i [lo, hi], measured in flux units.
      const double over = -R[i] - aw * ci.hi;
      const double under = aw * ci.lo + R[i];
      if (over > flux_tol || under > flux_tol) {
        const double wanted = over > flux_tol ? ci.hi : ci.lo;
        const auto m = static_cast<std::size_t>(pinned[k]);
        piece[k] = j.right_derivative(beta) == wanted ? m + 1 : m;
        pinned[k] = -1;
        changed = true;
      }
    }
    if (!changed && solved.converged) {
      out.consistent = true;
      break;
    }
  }
  out.u_local = std::move(x);
  return out;
}

} // namespace

double certification_threshold(const FemSystem& sys, const Vector& load) {
  return 1e-8 * (1.0 + sys.free_V0.restrict(load).norm());
}

StateSolution solve_mixed_dirichlet(const FemSystem& sys, const Field& g, const Field& q, double b,
                                    double linear_tol) {
  check_sizes(sys, g, q, "solve_mixed_dirichlet");
  const Vector L = load_vector(sys, g, q);
  const Vector lift_g3 = Vector::Constant(sys.g3_dofs.size(), b);
  const Vector L_K0 = sys.free_K0.restrict(L);
  const Vector rhs = L_K0 - sys.stiffness_K0_g3 * lift_g3;

  Vector x = Vector::Zero(sys.free_K0.size());
  const CgResult cg = pcg(sys.stiffness_K0, rhs, x, linear_tol, std::max(1000, 10 * sys.free_K0.size()));
  if (!cg.converged)
    throw SolverError("solve_mixed_dirichlet: CG did not converge after " + std::to_string(cg.iterations) +
                      " iterations (residual " + std::to_string(cg.residual_norm) + ")");

  StateSolution sol;
  sol.u = sys.zeros(FieldRole::State);
  sys.free_K0.scatter(x, sol.u.values);
  sys.g3_dofs.scatter(lift_g3, sol.u.values);
  sol.iterations = cg.iterations;
  sol.residual_norm = sys.free_K0.restrict(Vector(sys.stiffness * sol.u.values - L)).norm();
  sol.converged = true;
  sol.certified = sol.residual_norm <= 10.0 * linear_tol * std::max(rhs.norm(), L_K0.norm()) + 1e-300;
  return sol;
}

StateSolution solve_robin(const FemSystem& sys, const Field& g, const Field& q, double alpha, double b,
                          RobinMass mass, double linear_tol) {
  check_sizes(sys, g, q, "solve_robin");
  require_positive_alpha(alpha, "solve_robin");
  const Vector L = sys.free_V0.restrict(load_vector(sys, g, q));
  const Vector bvec = Vector::Constant(sys.free_V0.size(), b);

  SparseMatrix K = sys.stiffness_V0;
  Vector rhs = L;
  if (mass == RobinMass::Consistent) {
    const SparseMatrix M3 = sys.free_V0.restrict(sys.mass_gamma3);
    K += 2.0 * alpha * M3;
    rhs += 2.0 * alpha * (M3 * bvec);
  } else {
    const Vector w = sys.free_V0.restrict(sys.gamma3_weights);
    const std::vector<int> g3 = gamma3_local(w);
    Vector d(static_cast<Eigen::Index>(g3.size()));
    for (std::size_t k = 0; k < g3.size(); ++k) {
      d[static_cast<Eigen::Index>(k)] = 2.0 * alpha * w[g3[k]];
      rhs[g3[k]] += 2.0 * alpha * w[g3[k]] * b;
    }
    add_to_diagonal(K, g3, d);
  }

  Vector x = Vector::Zero(sys.free_V0.size());
  const CgResult cg = pcg(K, rhs, x, linear_tol, std::max(1000, 10 * sys.free_V0.size()));
  if (!cg.converged)
    throw SolverError("solve_robin: CG did not converge after " + std::to_string(cg.iterations) + " iterations");

  StateSolution sol;
  sol.u = sys.zeros(FieldRole::State);
  sys.free_V0.scatter(x, sol.u.values);
  sol.iterations = cg.iterations;
  sol.residual_norm = cg.residual_norm;
  sol.converged = true;
  sol.certified = true;
  sol.alpha = alpha;
  return sol;
}

Vector hvi_initial_guess(const FemSystem& sys, const Vector& load, double alpha, const Superpotential& j,
                         double linear_tol) {
  const double b = j.b();
  double kappa = alpha * (j.value(b + 1.0) - 2.0 * j.value(b) + j.value(b - 1.0));
  if (!(kappa > 0.0))
    kappa = alpha;
  const Vector L = sys.free_V0.restrict(load);
  const Vector w = sys.free_V0.restrict(sys.gamma3_weights);
  const std::vector<int> g3 = gamma3_local(w);
  SparseMatrix K = sys.stiffness_V0;
  Vector rhs = L;
  Vector d(static_cast<Eigen::Index>(g3.size()));
  for (std::size_t k = 0; k < g3.size(); ++k) {
    d[static_cast<Eigen::Index>(k)] = kappa * w[g3[k]];
    rhs[g3[k]] += kappa * w[g3[k]] * b;
  }
  add_to_diagonal(K, g3, d);
  Vector x = Vector::Zero(L.size());
  solve_symmetric(K, rhs, x, linear_tol);
  return sys.free_V0.extend(x);
}

SparseMatrix smoothed_jacobian(const FemSystem& sys, const Vector& u, double alpha, const SmoothedDerivative& jeps) {
  const Vector w = sys.free_V0.restrict(sys.gamma3_weights);
  const std::vector<int> g3 = gamma3_local(w);
  SparseMatrix J = sys.stiffness_V0;
  Vector d(static_cast<Eigen::Index>(g3.size()));
  for (std::size_t k = 0; k < g3.size(); ++k)
    d[static_cast<Eigen::Index>(k)] = alpha * w[g3[k]] * jeps.slope(u[sys.free_V0.dofs()[static_cast<std::size_t>(g3[k])]]);
  add_to_diagonal(J, g3, d);
  return J;
}

SmoothedState solve_smoothed_hvi(const FemSystem& sys, const Vector& load, double alpha,
                                 const SmoothedDerivative& jeps, const Vector& start, const HviSolverConfig& cfg) {
  const DofSubset& V0 = sys.free_V0;
  const Vector L = V0.restrict(load);
  const Vector w = V0.restrict(sys.gamma3_weights);
  const std::vector<int> g3 = gamma3_local(w);

  auto residual = [&](const Vector& x) {
    Vector F = sys.stiffness_V0 * x - L;
    for (int k : g3)
      F[k] += alpha * w[k] * jeps(x[k]);
    return F;
  };
  auto jacobian = [&](const Vector& x) {
    SparseMatrix J = sys.stiffness_V0;
    Vector d(static_cast<Eigen::Index>(g3.size()));
    for (std::size_t k = 0; k < g3.size(); ++k)
      d[static_cast<Eigen::Index>(k)] = alpha * w[g3[k]] * jeps.slope(x[g3[k]]);
    add_to_diagonal(J, g3, d);
    return J;
  };

  SmoothedState local = damped_newton(V0.restrict(start), residual, jacobian, cfg.newton_tol * (1.0 + L.norm()), cfg);
  local.u = V0.extend(local.u);
  return local;
}

StateSolution solve_hemivariational(const FemSystem& sys, const Field& g, const Field& q, double alpha,
                                    const Superpotential& j, const HviSolverConfig& cfg) {
  check_sizes(sys, g, q, "solve_hemivariational");
  require_positive_alpha(alpha, "solve_hemivariational");
  cfg.validate();

  const Vector load = load_vector(sys, g, q);
  StateSolution sol;
  sol.alpha = alpha;

  // The smoothed levels only provide a starting point; a level that stalls
  // is not fatal as long as the finishing step closes the inclusion. When
  // Newton fails to follow a step in eps (the previous solution lies outside
  // the narrower kink window), geometric midpoints are inserted. If even the
  // first level fails from the Robin guess, wider windows are tried first.
  Vector u = hvi_initial_guess(sys, load, alpha, j, cfg.linear_tol);
  double previous = 0.0;
  int inserted = 0;
  {
    const SmoothedState first = solve_smoothed_hvi(sys, load, alpha, smooth(j, cfg.epsilon_schedule.front()), u, cfg);
    sol.iterations += first.iterations;
    if (first.converged)
      u = first.u;
    for (double wide = 10.0 * cfg.epsilon_schedule.front(); !first.converged && inserted < 6; wide *= 10.0) {
      ++inserted;
      const SmoothedState level = solve_smoothed_hvi(sys, load, alpha, smooth(j, wide), u, cfg);
      sol.iterations += level.iterations;
      if (level.converged) {
        u = level.u;
        sol.epsilon_schedule.push_back(wide);
        previous = wide;
        break;
      }
    }
  }
  for (const double target : cfg.epsilon_schedule) {
    double eps = target;
    for (;;) {
      const SmoothedState level = solve_smoothed_hvi(sys, load, alpha, smooth(j, eps), u, cfg);
      sol.iterations += level.iterations;
      if (!level.converged && previous > 0.0 && inserted < kMaxInsertedLevels) {
        eps = std::sqrt(previous * eps);
        ++inserted;
        continue;
      }
      u = level.u;
      sol.epsilon_schedule.push_back(eps);
      previous = eps;
      if (eps == target)
        break;
      eps = target;
    }
  }

  const double threshold = certification_threshold(sys, load);
  const ActiveSetOutcome finish = resolve_active_set(sys, sys.free_V0.restrict(load), alpha, j,
                                                     sys.free_V0.restrict(u), cfg.epsilon_schedule.back(),
                                                     0.1 * threshold, cfg);
  sol.iterations += finish.iterations;
  sol.u = Field{FieldRole::State, sys.free_V0.extend(finish.u_local)};
  sol.residual_norm = finish.residual_norm;
  sol.converged = finish.consistent;

  sol.worst_violation = hvi_residual_check(sys, sol.u, g, q, alpha, j, cfg.certify_trials, cfg.seed);
  sol.certified = sol.worst_violation >= -threshold;
  return sol;
}

double hvi_residual_check(const FemSystem& sys, const Field& u, const Field& g, const Field& q, double alpha,
                          const Superpotential& j, int trials, std::uint64_t seed) {
  check_sizes(sys, g, q, "hvi_residual_check");
  if (u.size() != sys.dof_count)
    throw std::invalid_argument("hvi_residual_check: state size does not match dof count");
  for (int i : sys.dirichlet_g1)
    if (u.values[i] != 0.0)
      throw std::invalid_argument("hvi_residual_check: state violates the Gamma1 constraint at node " +
                                  std::to_string(i));

  const Vector R = sys.stiffness * u.values - load_vector(sys, g, q);
  const SparseMatrix B = SparseMatrix(sys.stiffness + sys.mass_domain);
  const DofSubset& V0 = sys.free_V0;
  const Vector& w = sys.gamma3_weights;

  auto evaluate = [&](const Vector& v) {
    double value = R.dot(v);
    for (int i : V0.dofs())
      if (w[i] > 0.0)
        value += alpha * w[i] * j0(j, u.values[i], v[i]);
    return value;
  };

  double worst = 0.0;
  for (int i : V0.dofs()) {
    const double scale = std::sqrt(B.coeff(i, i));
    for (double sign : {1.0, -1.0}) {
      double value = sign * R[i];
      if (w[i] > 0.0)
        value += alpha * w[i] * j0(j, u.values[i], sign);
      worst = std::min(worst, value / scale);
    }
  }

  std::mt19937_64 rng(seed);
  Vector v = Vector::Zero(sys.dof_count);
  for (int t = 0; t < trials; ++t) {
    for (int i : V0.dofs())
      v[i] = uniform_pm1(rng);
    v /= energy_norm(B, v);
    worst = std::min(worst, evaluate(v));
  }
  return worst;
}

} // namespace hemicontrol
