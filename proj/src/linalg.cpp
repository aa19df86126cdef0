#include "hemicontrol/linalg.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace hemicontrol {

CgResult pcg(const SparseMatrix& A, const Vector& b, Vector& x, double rel_tol, int max_iterations) {
  CgResult res;
  const Eigen::Index n = b.size();
  if (x.size() != n)
    x = Vector::Zero(n);
  res.rhs_norm = b.norm();
  if (res.rhs_norm == 0.0) {
    x.setZero();
    res.converged = true;
    return res;
  }

  Vector inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = A.coeff(i, i);
    inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
  }

  Vector r = b - A * x;
  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  Vector Ap(n);
  double rz = r.dot(z);
  const double target = rel_tol * res.rhs_norm;
  res.residual_norm = r.norm();

  while (res.residual_norm > target && res.iterations < max_iterations) {
    Ap.noalias() = A * p;
    const double curvature = p.dot(Ap);
    if (!(curvature > 0.0)) {
      res.indefinite = true;
      return res;
    }
    const double step = rz / curvature;
    x += step * p;
    r -= step * Ap;
    res.residual_norm = r.norm();
    ++res.iterations;
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  // The recursive residual drifts for very tight tolerances; report the true one.
  res.residual_norm = (b - A * x).norm();
  res.converged = res.residual_norm <= std::max(target, 1e-15 * res.rhs_norm) * 10.0;
  return res;
}

CgResult solve_symmetric(const SparseMatrix& A, const Vector& b, Vector& x, double rel_tol) {
  const int cap = std::max<int>(200, 10 * static_cast<int>(b.size()));
  CgResult res = pcg(A, b, x, rel_tol, cap);
  if (res.converged)
    return res;

  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw SolverError("linear solve: CG did not converge (" + std::to_string(res.iterations) +
                      " iterations) and LU factorization failed");
  x = lu.solve(b);
  res.residual_norm = (b - A * x).norm();
  res.converged = std::isfinite(res.residual_norm);
  if (!res.converged)
    throw SolverError("linear solve: LU fallback produced a non-finite solution");
  return res;
}

DofSubset::DofSubset(std::vector<int> dofs, int full_size)
    : dofs_(std::move(dofs)), local_(static_cast<std::size_t>(full_size), -1), full_size_(full_size) {
  for (std::size_t k = 0; k < dofs_.size(); ++k)
    local_[static_cast<std::size_t>(dofs_[k])] = static_cast<int>(k);
}

Vector DofSubset::restrict(const Vector& full) const {
  Vector part(size());
  for (int k = 0; k < size(); ++k)
    part[k] = full[dofs_[static_cast<std::size_t>(k)]];
  return part;
}

void DofSubset::scatter(const Vector& part, Vector& full) const {
  for (int k = 0; k < size(); ++k)
    full[dofs_[static_cast<std::size_t>(k)]] = part[k];
}

Vector DofSubset::extend(const Vector& part) const {
  Vector full = Vector::Zero(full_size_);
  scatter(part, full);
  return full;
}

SparseMatrix DofSubset::restrict(const SparseMatrix& A) const { return restrict(A, *this); }

SparseMatrix DofSubset::restrict(const SparseMatrix& A, const DofSubset& cols) const {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(A.nonZeros()));
  for (int c = 0; c < A.outerSize(); ++c) {
    const int lc = cols.local(c);
    if (lc < 0)
      continue;
    for (SparseMatrix::InnerIterator it(A, c); it; ++it) {
      const int lr = local(static_cast<int>(it.row()));
      if (lr >= 0)
        entries.emplace_back(lr, lc, it.value());
    }
  }
  SparseMatrix sub(size(), cols.size());
  sub.setFromTriplets(entries.begin(), entries.end());
  return sub;
}

double energy_norm(const SparseMatrix& A, const Vector& x) { return std::sqrt(std::max(0.0, x.dot(A * x))); }

} // namespace hemicontrol
