#include "hemicontrol/superpotential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace hemicontrol {

Superpotential::Superpotential(std::string name, double b, std::vector<double> breakpoints,
                               std::vector<SuperpotentialPiece> pieces, GrowthBound growth,
                               std::optional<double> declared_m_j)
    : name_(std::move(name)), b_(b), breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)),
      growth_(growth), declared_m_j_(declared_m_j) {
  if (pieces_.size() != breakpoints_.size() + 1)
    throw std::invalid_argument("Superpotential " + name_ + ": need exactly one more piece than breakpoints");
  if (!std::is_sorted(breakpoints_.begin(), breakpoints_.end()) ||
      std::adjacent_find(breakpoints_.begin(), breakpoints_.end()) != breakpoints_.end())
    throw std::invalid_argument("Superpotential " + name_ + ": breakpoints must be strictly increasing");
  if (growth_.c0 < 0.0 || growth_.c1 < 0.0)
    throw std::invalid_argument("Superpotential " + name_ + ": growth constants must be nonnegative");
  for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
    const double r = breakpoints_[k];
    const double left = pieces_[k].value(r), right = pieces_[k + 1].value(r);
    if (std::abs(left - right) > 1e-12 * std::max(1.0, std::abs(left)))
      throw std::invalid_argument("Superpotential " + name_ + ": discontinuous at breakpoint " + std::to_string(r));
  }
}

std::size_t Superpotential::piece_right_of(double r) const {
  return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), r) - breakpoints_.begin());
}

std::size_t Superpotential::piece_left_of(double r) const {
  return static_cast<std::size_t>(std::lower_bound(breakpoints_.begin(), breakpoints_.end(), r) - breakpoints_.begin());
}

bool Superpotential::is_breakpoint(double r) const {
  return std::binary_search(breakpoints_.begin(), breakpoints_.end(), r);
}

double Superpotential::value(double r) const { return pieces_[piece_right_of(r)].value(r); }
double Superpotential::left_derivative(double r) const { return pieces_[piece_left_of(r)].slope(r); }
double Superpotential::right_derivative(double r) const { return pieces_[piece_right_of(r)].slope(r); }
double Superpotential::right_curvature(double r) const { return pieces_[piece_right_of(r)].curvature(r); }

namespace {

SuperpotentialPiece affine(double slope, double offset) {
  return {[=](double r) { return slope * r + offset; }, [=](double) { return slope; }, [](double) { return 0.0; }};
}

} // namespace

Superpotential quadratic_well(double b) {
  SuperpotentialPiece p{[b](double r) { return (r - b) * (r - b); }, [b](double r) { return 2.0 * (r - b); },
                        [](double) { return 2.0; }};
  return {"quadratic", b, {}, {p}, {2.0 * std::abs(b), 2.0}, 0.0};
}

Superpotential abs_well(double b) {
  return {"abs", b, {b}, {affine(-1.0, b), affine(1.0, -b)}, {1.0, 0.0}, 0.0};
}

Superpotential kinked_well(double b) {
  // phi(|r-b|): slopes -1/2, -1, 1, 1/2 on the four pieces.
  return {"kinked",
          b,
          {b - 1.0, b, b + 1.0},
          {affine(-0.5, 0.5 + 0.5 * b), affine(-1.0, b), affine(1.0, -b), affine(0.5, 0.5 - 0.5 * b)},
          {1.0, 0.0}};
}

Superpotential negative_abs_well(double b) {
  return {"negative_abs", b, {b}, {affine(1.0, -b), affine(-1.0, b)}, {1.0, 0.0}};
}

ClarkeInterval clarke_interval(const Superpotential& j, double r) {
  const double l = j.left_derivative(r), rr = j.right_derivative(r);
  return {std::min(l, rr), std::max(l, rr)};
}

double j0(const Superpotential& j, double r, double v) {
  const ClarkeInterval c = clarke_interval(j, r);
  return std::max(c.lo * v, c.hi * v);
}

std::size_t HypothesisReport::count(HypothesisCondition c) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [c](const HypothesisViolation& v) { return v.condition == c; }));
}

HypothesisReport verify_hypotheses(const Superpotential& j, const SamplingGrid& grid) {
  if (grid.points < 1000 || !(grid.radius > 0.0))
    throw std::invalid_argument("verify_hypotheses: grid needs radius > 0 and at least 1000 points");

  std::vector<double> r;
  r.reserve(grid.points + j.breakpoints().size() + 1);
  for (std::size_t i = 0; i < grid.points; ++i)
    r.push_back(-grid.radius + 2.0 * grid.radius * static_cast<double>(i) / static_cast<double>(grid.points - 1));
  for (double bp : j.breakpoints())
    if (std::abs(bp) <= grid.radius)
      r.push_back(bp);
  r.push_back(j.b());
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());

  const std::size_t n = r.size();
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ClarkeInterval c = clarke_interval(j, r[i]);
    lo[i] = c.lo;
    hi[i] = c.hi;
  }

  HypothesisReport rep;
  rep.samples = n;
  rep.growth_margin = INFINITY;
  rep.sign_max = -INFINITY;
  rep.uniqueness_margin = INFINITY;
  const double b = j.b();
  for (std::size_t i = 0; i < n; ++i) {
    const double bound = j.growth().c0 + j.growth().c1 * std::abs(r[i]);
    const double margin = bound - std::max(std::abs(lo[i]), std::abs(hi[i]));
    rep.growth_margin = std::min(rep.growth_margin, margin);
    if (margin < -1e-12 * std::max(1.0, bound))
      rep.violations.push_back({HypothesisCondition::Growth, r[i], -margin});

    const double d = std::max(lo[i] * (b - r[i]), hi[i] * (b - r[i]));
    rep.sign_max = std::max(rep.sign_max, d);
    if (d > 1e-12)
      rep.violations.push_back({HypothesisCondition::Sign, r[i], d});
    if (r[i] != b) {
      rep.uniqueness_margin = std::min(rep.uniqueness_margin, -d);
      if (!(d < 0.0))
        rep.violations.push_back({HypothesisCondition::Uniqueness, r[i], d});
    }
  }

  double m_j = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      const double d = r[k] - r[i];
      const double sum = std::max(lo[i] * d, hi[i] * d) + std::max(-lo[k] * d, -hi[k] * d);
      m_j = std::max(m_j, sum / (d * d));
    }
  }
  rep.m_j_estimate = m_j;
  return rep;
}

bool smallness_check(double m_a, double alpha, double m_j, double trace_norm) {
  if (m_a < 0.0 || alpha < 0.0 || m_j < 0.0 || trace_norm < 0.0)
    throw std::invalid_argument("smallness_check: inputs must be nonnegative");
  return m_a > alpha * m_j * trace_norm * trace_norm;
}

SmoothedDerivative::SmoothedDerivative(Superpotential j, double epsilon) : j_(std::move(j)), epsilon_(epsilon) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("smooth: epsilon must be positive");
}

double SmoothedDerivative::operator()(double r) const {
  static const std::array<double, 3> node{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const std::array<double, 3> weight{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  const double a = r - epsilon_, c = r + epsilon_;
  const auto& bps = j_.breakpoints();
  auto first = std::upper_bound(bps.begin(), bps.end(), a);
  auto last = std::lower_bound(bps.begin(), bps.end(), c);

  double integral = 0.0;
  double left = a;
  std::size_t piece = j_.piece_right_of(a);
  auto integrate_to = [&](double right) {
    const double half = 0.5 * (right - left), mid = 0.5 * (right + left);
    const auto& p = j_.piece(piece);
    for (std::size_t q = 0; q < 3; ++q)
      integral += weight[q] * half * p.slope(mid + half * node[q]);
  };
  for (auto it = first; it != last; ++it) {
    integrate_to(*it);
    left = *it;
    ++piece;
  }
  integrate_to(c);
  return integral / (2.0 * epsilon_);
}

double SmoothedDerivative::slope(double r) const {
  // (j'(r+eps) - j'(r-eps)) / (2 eps) with right derivatives, assembled from
  // the jumps at breakpoints in (r-eps, r+eps] plus the integrated curvature
  // so that smooth pieces do not suffer cancellation.
  static const std::array<double, 3> node{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const std::array<double, 3> weight{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  const double a = r - epsilon_, c = r + epsilon_;
  const auto& bps = j_.breakpoints();
  auto first = std::upper_bound(bps.begin(), bps.end(), a);
  auto last = std::upper_bound(bps.begin(), bps.end(), c);

  double total = 0.0;
  double left = a;
  std::size_t piece = j_.piece_right_of(a);
  auto integrate_to = [&](double right) {
    const double half = 0.5 * (right - left), mid = 0.5 * (right + left);
    const auto& p = j_.piece(piece);
    for (std::size_t q = 0; q < 3; ++q)
      total += weight[q] * half * p.curvature(mid + half * node[q]);
  };
  for (auto it = first; it != last; ++it) {
    integrate_to(*it);
    total += j_.right_derivative(*it) - j_.left_derivative(*it);
    left = *it;
    ++piece;
  }
  if (left < c)
    integrate_to(c);
  return total / (2.0 * epsilon_);
}

SmoothedDerivative smooth(const Superpotential& j, double epsilon) { return SmoothedDerivative(j, epsilon); }

} // namespace hemicontrol
