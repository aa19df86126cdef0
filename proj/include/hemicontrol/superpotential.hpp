#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hemicontrol {

/// Closed interval [lo, hi] of admissible slopes.
struct ClarkeInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double z, double tol = 0.0) const { return z >= lo - tol && z <= hi + tol; }
  double distance(double z) const { return z < lo ? lo - z : (z > hi ? z - hi : 0.0); }
};

/// One smooth branch of a piecewise-C1 superpotential.
struct SuperpotentialPiece {
  std::function<double(double)> value;
  std::function<double(double)> slope;      // j' on the open piece
  std::function<double(double)> curvature;  // j'' on the open piece
};

/// Declared growth bound |zeta| <= c0 + c1 |r| on the Clarke gradient.
struct GrowthBound {
  double c0 = 0.0;
  double c1 = 0.0;
};

/// Locally Lipschitz, piecewise-C1 function of one real variable.
///
/// The real line is cut at `breakpoints` (strictly increasing) into
/// breakpoints.size() + 1 pieces. The Clarke gradient at r is the interval
/// spanned by the one-sided derivatives, so every quantity is computable in
/// closed form. Construction throws std::invalid_argument if the pieces do not
/// join continuously.
class Superpotential {
public:
  Superpotential(std::string name, double b, std::vector<double> breakpoints, std::vector<SuperpotentialPiece> pieces,
                 GrowthBound growth, std::optional<double> declared_m_j = std::nullopt);

  const std::string& name() const { return name_; }
  double b() const { return b_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const GrowthBound& growth() const { return growth_; }
  const std::optional<double>& declared_m_j() const { return declared_m_j_; }

  double value(double r) const;
  double left_derivative(double r) const;
  double right_derivative(double r) const;
  /// j'' of the piece to the right of r (the right value at breakpoints).
  double right_curvature(double r) const;
  bool is_breakpoint(double r) const;
  /// Index of the piece containing [r, r + delta) for small delta.
  std::size_t piece_right_of(double r) const;
  std::size_t piece_left_of(double r) const;
  const SuperpotentialPiece& piece(std::size_t k) const { return pieces_[k]; }

private:
  std::string name_;
  double b_;
  std::vector<double> breakpoints_;
  std::vector<SuperpotentialPiece> pieces_;
  GrowthBound growth_;
  std::optional<double> declared_m_j_;
};

/// j(r) = (r - b)^2. Smooth; equivalent to a Robin law with coefficient 2 alpha.
Superpotential quadratic_well(double b);
/// j(r) = |r - b|. Convex, kink at b.
Superpotential abs_well(double b);
/// j(r) = phi(|r - b|) with phi(s) = s on [0, 1] and 1 + (s - 1)/2 beyond.
/// Nonconvex with kinks at b - 1, b, b + 1.
Superpotential kinked_well(double b);
/// j(r) = -|r - b|. Violates the sign condition j0(r; b - r) <= 0 everywhere
/// except at b; used to exercise rejection paths.
Superpotential negative_abs_well(double b);

ClarkeInterval clarke_interval(const Superpotential& j, double r);

/// Generalized directional derivative max{zeta v : zeta in the Clarke gradient}.
double j0(const Superpotential& j, double r, double v);

struct SamplingGrid {
  double radius = 10.0;
  std::size_t points = 10000;
};

enum class HypothesisCondition { Growth, Sign, Uniqueness };

struct HypothesisViolation {
  HypothesisCondition condition;
  double r;
  double value;  // amount by which the condition fails
};

struct HypothesisReport {
  std::size_t samples = 0;
  /// min over samples of (c0 + c1|r|) - max|zeta|; negative means (c) fails.
  double growth_margin = 0.0;
  /// max over samples of j0(r; b - r); must be <= 0.
  double sign_max = 0.0;
  /// min over samples r != b of -j0(r; b - r); must be > 0.
  double uniqueness_margin = 0.0;
  /// Sampled lower bound on the relaxed-monotonicity constant.
  double m_j_estimate = 0.0;
  std::vector<HypothesisViolation> violations;

  bool passed() const { return violations.empty(); }
  std::size_t count(HypothesisCondition c) const;
};

/// Samples the growth bound, the sign condition, its strictness away from b,
/// and estimates m_j over all sample pairs. Throws std::invalid_argument if
/// the grid has fewer than 1000 points; a violating j only produces findings.
HypothesisReport verify_hypotheses(const Superpotential& j, const SamplingGrid& grid = {});

/// m_a > alpha m_j |gamma|^2. Throws std::invalid_argument on negative input.
bool smallness_check(double m_a, double alpha, double m_j, double trace_norm);

/// Window average of the derivative selection over [r - eps, r + eps].
///
/// Integrated piece by piece with 3-point Gauss-Legendre, which is exact for
/// pieces whose derivative is a polynomial of degree <= 5 (all shipped
/// instances). Away from breakpoints by more than eps it equals j'(r).
class SmoothedDerivative {
public:
  SmoothedDerivative(Superpotential j, double epsilon);

  double epsilon() const { return epsilon_; }
  double operator()(double r) const;
  /// d/dr of the smoothed derivative, (j'(r+eps) - j'(r-eps)) / (2 eps) with
  /// right derivatives at breakpoints.
  double slope(double r) const;
  const Superpotential& superpotential() const { return j_; }

private:
  Superpotential j_;
  double epsilon_;
};

/// Throws std::invalid_argument for epsilon <= 0.
SmoothedDerivative smooth(const Superpotential& j, double epsilon);

} // namespace hemicontrol
