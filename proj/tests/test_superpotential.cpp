#include <doctest.h>

#include "hemicontrol/superpotential.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace hemicontrol;

namespace {

std::vector<Superpotential> shipped(double b) { return {quadratic_well(b), abs_well(b), kinked_well(b)}; }

// Sample points: a uniform grid plus every breakpoint and its neighbours.
std::vector<double> sample_points(const Superpotential& j) {
  std::vector<double> r;
  for (int i = -60; i <= 60; ++i)
    r.push_back(0.1 * i + 0.0123);
  for (double bp : j.breakpoints())
    for (double d : {-1e-9, 0.0, 1e-9})
      r.push_back(bp + d);
  r.push_back(j.b());
  return r;
}

} // namespace

TEST_CASE("Clarke intervals at smooth points and kinks") {
  const double b = 0.7;
  const ClarkeInterval q = clarke_interval(quadratic_well(b), b);
  CHECK(q.lo == 0.0);
  CHECK(q.hi == 0.0);
  const ClarkeInterval a = clarke_interval(abs_well(b), b);
  CHECK(a.lo == -1.0);
  CHECK(a.hi == 1.0);
  const ClarkeInterval k = clarke_interval(kinked_well(b), b + 1.0);
  CHECK(k.lo == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.hi == doctest::Approx(1.0).epsilon(1e-15));
  const ClarkeInterval km = clarke_interval(kinked_well(b), b - 1.0);
  CHECK(km.lo == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(km.hi == doctest::Approx(-0.5).epsilon(1e-15));
  // Away from breakpoints the interval collapses to the derivative.
  const ClarkeInterval s = clarke_interval(quadratic_well(b), 2.0);
  CHECK(s.lo == doctest::Approx(2 * (2.0 - b)));
  CHECK(s.hi == s.lo);
  const ClarkeInterval f = clarke_interval(kinked_well(b), b + 3.0);
  CHECK(f.lo == doctest::Approx(0.5));
  CHECK(f.hi == doctest::Approx(0.5));
}

TEST_CASE("generalized directional derivative examples") {
  const double b = -0.3;
  for (double v : {-2.0, -0.5, 0.0, 0.25, 3.0})
    CHECK(j0(abs_well(b), b, v) == doctest::Approx(std::abs(v)));
  for (const auto& j : shipped(b))
    for (double r : {-4.0, b, 0.0, b + 1.0, 2.5})
      CHECK(j0(j, r, 0.0) == 0.0);
  const Superpotential q = quadratic_well(b);
  for (double r : {-3.0, 0.0, 1.5})
    for (double v : {-1.0, 0.3, 2.0})
      CHECK(j0(q, r, v) == doctest::Approx(2 * (r - b) * v).epsilon(1e-14));
}

TEST_CASE("values are continuous at breakpoints") {
  for (const auto& j : shipped(0.4)) {
    for (double bp : j.breakpoints()) {
      CHECK(std::abs(j.value(bp) - j.value(bp - 1e-13)) <= 1e-12);
      CHECK(std::abs(j.value(bp) - j.value(bp + 1e-13)) <= 1e-12);
    }
  }
  CHECK(kinked_well(0.0).value(3.0) == doctest::Approx(2.0));
  CHECK(kinked_well(0.0).value(-0.5) == doctest::Approx(0.5));
}

TEST_CASE("a discontinuous piecewise description is rejected") {
  SuperpotentialPiece left{[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
  SuperpotentialPiece right{[](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
  CHECK_THROWS_AS(Superpotential("step", 0.0, {0.0}, {left, right}, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("j0 dominates every element of the Clarke interval") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> nd;
  for (const auto& j : shipped(0.2))
    for (double r : sample_points(j)) {
      const ClarkeInterval c = clarke_interval(j, r);
      const double v = nd(rng);
      const double top = j0(j, r, v);
      for (int t = 0; t < 100; ++t) {
        const double zeta = c.lo + unit(rng) * (c.hi - c.lo);
        REQUIRE(top >= zeta * v - 1e-14 * (1 + std::abs(zeta * v)));
      }
    }
}

TEST_CASE("j0 is positively homogeneous in the direction") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  for (const auto& j : shipped(-1.1))
    for (double r : sample_points(j)) {
      const double v = nd(rng);
      for (double lambda : {0.1, 1.0, 7.5}) {
        const double lhs = j0(j, r, lambda * v);
        const double rhs = lambda * j0(j, r, v);
        REQUIRE(std::abs(lhs - rhs) <= 1e-13 * (1 + std::abs(rhs)));
      }
    }
}

TEST_CASE("hypotheses hold for the shipped wells") {
  for (double b : {0.0, 1.0, -2.5}) {
    for (const auto& j : shipped(b)) {
      const HypothesisReport rep = verify_hypotheses(j, {10.0, 10000});
      INFO(j.name() << " b=" << b);
      CHECK(rep.passed());
      CHECK(rep.samples >= 10000);
      CHECK(rep.sign_max <= 1e-12);
      CHECK(rep.uniqueness_margin > 0.0);
      CHECK(rep.growth_margin >= 0.0);
    }
  }
}

TEST_CASE("sign condition margin of the quadratic well is exact") {
  // j0(r; b - r) = -2 (r - b)^2, whose maximum over the samples is 0 at r = b
  // and whose minimum off b is attained at the grid point nearest b.
  const double b = 0.0;
  const HypothesisReport rep = verify_hypotheses(quadratic_well(b), {10.0, 1001});
  CHECK(rep.sign_max == 0.0);
  const double nearest = 20.0 / 1000;  // grid spacing; b = 0 is a grid point
  CHECK(rep.uniqueness_margin == doctest::Approx(2 * nearest * nearest).epsilon(1e-12));
  CHECK(rep.m_j_estimate <= 1e-12);
}

TEST_CASE("relaxed monotonicity estimates") {
  CHECK(verify_hypotheses(abs_well(0.5)).m_j_estimate <= 1e-12);
  // The kinked well has concave kinks at b +- 1: the estimate is positive and
  // grows as the sampling resolves the kink.
  const double coarse = verify_hypotheses(kinked_well(0.0), {10.0, 1000}).m_j_estimate;
  const double fine = verify_hypotheses(kinked_well(0.0), {10.0, 4000}).m_j_estimate;
  CHECK(coarse > 0.0);
  CHECK(fine > coarse);
}

TEST_CASE("the counterexample fails the sign condition away from b") {
  const double b = 0.3;
  const HypothesisReport rep = verify_hypotheses(negative_abs_well(b), {10.0, 10000});
  CHECK_FALSE(rep.passed());
  // Every sample except r = b violates both the sign condition and its strict form.
  CHECK(rep.count(HypothesisCondition::Sign) == rep.samples - 1);
  CHECK(rep.count(HypothesisCondition::Uniqueness) == rep.samples - 1);
  for (const auto& v : rep.violations)
    CHECK(v.r != b);
}

TEST_CASE("verify_hypotheses rejects a coarse grid") {
  CHECK_THROWS_AS(verify_hypotheses(abs_well(0.0), {10.0, 999}), std::invalid_argument);
}

TEST_CASE("smallness condition") {
  for (double alpha : {0.0, 1.0, 1e6})
    CHECK(smallness_check(0.7, alpha, 0.0, 0.87));
  CHECK(smallness_check(1.0, 1.0, 0.5, 1.0));
  const double m_a = 0.7, m_j = 0.5, tr = 0.87;
  const double threshold = m_a / (m_j * tr * tr);
  CHECK(smallness_check(m_a, 0.99 * threshold, m_j, tr));
  for (double alpha : {1.01 * threshold, 10 * threshold, 1e6})
    CHECK_FALSE(smallness_check(m_a, alpha, m_j, tr));
  CHECK_THROWS_AS(smallness_check(-1.0, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("smoothed derivative examples") {
  const double b = 0.25;
  const Superpotential q = quadratic_well(b);
  for (double eps : {1e-1, 1e-2, 1e-4})
    for (double r : {-2.0, b, 0.9})
      CHECK(smooth(q, eps)(r) == doctest::Approx(2 * (r - b)).epsilon(1e-10));
  for (double eps : {1e-1, 1e-3}) {
    const SmoothedDerivative s = smooth(abs_well(b), eps);
    CHECK(std::abs(s(b)) <= 1e-15);
    CHECK(s(b + eps / 2) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(s(b - eps / 2) == doctest::Approx(-0.5).epsilon(1e-13));
    CHECK(s(b + 2 * eps) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(smooth(q, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(smooth(q, -1.0), std::invalid_argument);
}

TEST_CASE("smoothed derivative agrees with the derivative away from breakpoints") {
  for (const auto& j : shipped(0.0))
    for (double eps : {1e-1, 1e-2}) {
      const SmoothedDerivative s = smooth(j, eps);
      for (double r = -5.0; r <= 5.0; r += 0.0371) {
        bool far = true;
        for (double bp : j.breakpoints())
          far = far && std::abs(r - bp) > eps;
        if (far)
          REQUIRE(s(r) == doctest::Approx(j.right_derivative(r)).epsilon(1e-13));
      }
    }
}

TEST_CASE("smoothed derivative stays in the Clarke graph within the window") {
  for (const auto& j : shipped(0.0))
    for (double eps : {0.05, 0.3, 0.8}) {
      const SmoothedDerivative s = smooth(j, eps);
      for (double r = -3.0; r <= 3.0; r += 0.0173) {
        double best = clarke_interval(j, r).distance(s(r));
        for (double bp : j.breakpoints())
          if (std::abs(bp - r) <= eps)
            best = std::min(best, clarke_interval(j, bp).distance(s(r)));
        INFO(j.name() << " eps=" << eps << " r=" << r);
        REQUIRE(best <= 1e-12);
      }
    }
}

TEST_CASE("smoothed slope matches a finite difference") {
  for (const auto& j : shipped(0.1)) {
    const SmoothedDerivative s = smooth(j, 0.05);
    for (double r : {-1.2, -0.93, 0.08, 0.12, 1.1, 1.13, 2.0}) {
      const double h = 1e-6;
      const double fd = (s(r + h) - s(r - h)) / (2 * h);
      CHECK(s.slope(r) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("smoothing converges to the derivative as epsilon shrinks") {
  // Each r is within 0.1 of a kink; once eps is below that distance the
  // smoothed value is the derivative up to quadrature roundoff.
  const Superpotential j = kinked_well(0.0);
  for (double r : {0.01, 0.99, 1.02, -1.003}) {
    double gap = INFINITY;
    for (double bp : j.breakpoints())
      gap = std::min(gap, std::abs(r - bp));
    const double target = j.right_derivative(r);
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
      const double err = std::abs(smooth(j, eps)(r) - target);
      INFO("r=" << r << " eps=" << eps);
      if (eps < gap)
        CHECK(err <= 1e-12);
      else
        CHECK(err <= 2.0);
    }
  }
}
