#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>
#include <vector>

namespace hemicontrol {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CgResult {
  int iterations = 0;
  double residual_norm = 0.0;  // ||b - A x|| (recursive estimate)
  double rhs_norm = 0.0;
  bool converged = false;
  bool indefinite = false;     // a search direction with p'Ap <= 0 was met
};

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// A. Stops when ||b - A x|| <= rel_tol * ||b||; x is used as the initial
/// guess.
CgResult pcg(const SparseMatrix& A, const Vector& b, Vector& x, double rel_tol, int max_iterations);

/// PCG with a sparse LU fallback for symmetric systems that turn out to be
/// indefinite (nonconvex superpotential segments). Throws SolverError if
/// neither route produces a solution.
CgResult solve_symmetric(const SparseMatrix& A, const Vector& b, Vector& x, double rel_tol);

/// Index map between a full dof vector and a subset of its entries.
class DofSubset {
public:
  DofSubset() = default;
  DofSubset(std::vector<int> dofs, int full_size);

  int size() const { return static_cast<int>(dofs_.size()); }
  int full_size() const { return full_size_; }
  const std::vector<int>& dofs() const { return dofs_; }
  /// Local position of a full-space dof, or -1 if it is not in the subset.
  int local(int dof) const { return local_[static_cast<std::size_t>(dof)]; }
  bool contains(int dof) const { return local(dof) >= 0; }

  Vector restrict(const Vector& full) const;
  /// Writes `part` into the subset positions of `full`.
  void scatter(const Vector& part, Vector& full) const;
  Vector extend(const Vector& part) const;
  SparseMatrix restrict(const SparseMatrix& A) const;
  /// Columns of A in `cols`, rows in this subset.
  SparseMatrix restrict(const SparseMatrix& A, const DofSubset& cols) const;

private:
  std::vector<int> dofs_;
  std::vector<int> local_;
  int full_size_ = 0;
};

/// sqrt(x' A x), clamped at zero against roundoff.
double energy_norm(const SparseMatrix& A, const Vector& x);

} // namespace hemicontrol
