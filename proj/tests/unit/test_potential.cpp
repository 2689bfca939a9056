#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bitangent.hpp"
#include "dchlab/errors.hpp"
#include "dchlab/potential.hpp"

using namespace dchlab;

namespace {

PotentialSpec quartic_pure() { return PotentialSpec::polynomial("quartic", {0, 0, 0, 0, 1}, 4.0); }

}  // namespace

TEST(Potential, NormalisationAndSmoothness) {
  for (const auto& name : builtin_potential_names()) {
    const auto spec = PotentialSpec::builtin(name);
    EXPECT_NEAR(spec.eval_w(0.0), 0.0, 1e-15) << name;
    EXPECT_NEAR(spec.eval_w1(0.0), 0.0, 1e-15) << name;
    const double h = 1e-3;
    for (double y = 0.1; y < spec.domain_max - 0.1; y += 0.137) {
      const double d2 = (spec.eval_w(y + h) - 2.0 * spec.eval_w(y) + spec.eval_w(y - h)) / (h * h);
      EXPECT_NEAR(d2, spec.eval_w2(y), 1e-4 * (1.0 + std::abs(spec.eval_w2(y)))) << name << " y=" << y;
    }
  }
}

TEST(Potential, PolynomialDropsAffinePart) {
  const auto spec = PotentialSpec::polynomial("p", {2.0, -1.0, 0.5}, 4.0);
  EXPECT_DOUBLE_EQ(spec.eval_w(0.0), 0.0);
  EXPECT_DOUBLE_EQ(spec.eval_w1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(spec.eval_w(2.0), 2.0);
}

TEST(Potential, FromFunctionsNormalises) {
  const auto spec = PotentialSpec::from_functions(
      "exp", [](double y) { return std::exp(y); }, [](double y) { return std::exp(y); },
      [](double y) { return std::exp(y); }, 3.0);
  EXPECT_NEAR(spec.eval_w(0.0), 0.0, 1e-15);
  EXPECT_NEAR(spec.eval_w1(0.0), 0.0, 1e-15);
  EXPECT_NEAR(spec.eval_w(1.0), std::exp(1.0) - 2.0, 1e-14);
}

TEST(Potential, ExtrapolationIsQuadratic) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  const double m = spec.domain_max, d = 0.5;
  const double expect = spec.eval_w(m) + spec.eval_w1(m) * d + 0.5 * spec.eval_w2(m) * d * d;
  EXPECT_NEAR(spec.eval_w(m + d), expect, 1e-10);
  EXPECT_NEAR(spec.eval_w2(m + d), spec.eval_w2(m), 1e-12);
}

TEST(Potential, Q1Examples) {
  const auto cubic = PotentialSpec::builtin("cubic-motivation");
  EXPECT_NEAR(eval_q1(cubic, 1.5), 0.0, 1e-14);
  EXPECT_NEAR(eval_q1(cubic, 1.0), -1.0 / 6.0, 1e-14);
  for (const auto& name : builtin_potential_names()) EXPECT_EQ(eval_q1(PotentialSpec::builtin(name), 0.0), 0.0);
  EXPECT_THROW(eval_q1(cubic, -0.1), DomainError);
  EXPECT_THROW(eval_q1(cubic, cubic.domain_max + 1.0), DomainError);
  const double h = 1e-5;
  for (double y = 0.2; y < 5.0; y += 0.3) {
    const double dq = (eval_q1(cubic, y + h) - eval_q1(cubic, y - h)) / (2 * h);
    EXPECT_NEAR(dq, y * cubic.eval_w2(y), 1e-7);
  }
}

TEST(Envelope, ConvexInputHasNoPieces) {
  const auto spec = quartic_pure();
  const auto env = compute_convex_envelope(spec);
  EXPECT_TRUE(env.pieces().empty());
  for (double y = 0.0; y <= 4.0; y += 0.25) EXPECT_NEAR(env.eval_wss(y), spec.eval_w(y), 1e-12);
}

TEST(Envelope, CubicMatchesTangentFromOrigin) {
  const auto tan = oracle::solve_tangent_from_origin(oracle::cubic_motivation(), 2.0);
  const auto env = compute_convex_envelope(PotentialSpec::builtin("cubic-motivation"));
  ASSERT_EQ(env.pieces().size(), 1u);
  EXPECT_NEAR(tan.b, 1.5, 1e-12);
  EXPECT_NEAR(env.pieces()[0].a, 0.0, 1e-12);
  EXPECT_NEAR(env.pieces()[0].b, tan.b, 1e-9);
  EXPECT_NEAR(env.pieces()[0].slope, tan.slope, 1e-9);
  EXPECT_NEAR(env.eval_wss1(0.7), -0.375, 1e-9);
  EXPECT_NEAR(env.eval_wss(1.0), -0.375, 1e-9);
}

TEST(Envelope, QuarticsMatchBitangentOracle) {
  struct Case {
    const char* name;
    oracle::Poly poly;
    double a0, b0;
  };
  for (const auto& c : {Case{"quartic-spinodal", oracle::quartic_spinodal(), 1.5, 3.5},
                        Case{"quartic-wrinkle", oracle::quartic_wrinkle(), 0.1, 1.9}}) {
    const auto bt = oracle::solve_bitangent(c.poly, c.a0, c.b0);
    const auto env = compute_convex_envelope(PotentialSpec::builtin(c.name));
    ASSERT_EQ(env.pieces().size(), 1u) << c.name;
    EXPECT_NEAR(env.pieces()[0].a, bt.a, 1e-9) << c.name;
    EXPECT_NEAR(env.pieces()[0].b, bt.b, 1e-9) << c.name;
    EXPECT_NEAR(env.pieces()[0].slope, bt.slope, 1e-8) << c.name;
  }
  const auto bt = oracle::solve_bitangent(oracle::quartic_spinodal(), 1.5, 3.5);
  EXPECT_GT(bt.a, 1.0);
  EXPECT_LT(bt.a, 2.0);
  EXPECT_GT(bt.b, 3.0);
  EXPECT_LT(bt.b, 4.0);
}

TEST(Envelope, Invariants) {
  for (const auto& name : builtin_potential_names()) {
    const auto spec = PotentialSpec::builtin(name);
    const auto env = compute_convex_envelope(spec);
    const std::size_t n = 2000;
    const double h = spec.domain_max / static_cast<double>(n);
    double prev_q = -1e300;
    for (std::size_t i = 0; i <= n; ++i) {
      const double y = static_cast<double>(i) * h;
      EXPECT_LE(env.eval_wss(y), spec.eval_w(y) + 1e-12) << name;
      if (i > 0 && i < n) {
        const double d2 = env.eval_wss(y + h) - 2.0 * env.eval_wss(y) + env.eval_wss(y - h);
        EXPECT_GE(d2, -1e-10) << name << " y=" << y;
      }
      const double q = env.eval_qss1(y);
      EXPECT_GE(q, prev_q - 1e-10) << name;
      prev_q = q;
    }
    for (const auto& p : env.pieces()) {
      const double m = 0.5 * (p.a + p.b);
      EXPECT_NEAR(env.eval_wss1(m), p.slope, 1e-12);
      EXPECT_NEAR(env.eval_wss(m), p.value_at_a + p.slope * (m - p.a), 1e-10);
      EXPECT_GT(spec.eval_w(m), env.eval_wss(m));
    }
  }
}

TEST(Envelope, Idempotent) {
  for (const auto& name : builtin_potential_names()) {
    const auto env = compute_convex_envelope(PotentialSpec::builtin(name));
    const auto env2 = compute_convex_envelope(envelope_as_potential(env));
    for (double y = 0.0; y <= env.spec().domain_max; y += 0.01) {
      EXPECT_NEAR(env2.eval_wss(y), env.eval_wss(y), 1e-9) << name << " y=" << y;
    }
  }
}

TEST(UnstableSet, Examples) {
  {
    const auto spec = quartic_pure();
    const auto s = compute_unstable_set(spec, compute_convex_envelope(spec));
    ASSERT_EQ(s.count(), 1u);
    EXPECT_TRUE(s.degenerate_first);
    EXPECT_DOUBLE_EQ(s.m0, 1.0);
  }
  {
    const auto spec = PotentialSpec::builtin("cubic-motivation");
    const auto s = compute_unstable_set(spec, compute_convex_envelope(spec));
    ASSERT_EQ(s.count(), 1u);
    EXPECT_FALSE(s.degenerate_first);
    EXPECT_NEAR(s.intervals[0].hi, 1.5, 1e-9);
    EXPECT_NEAR(s.m0, 2.5, 1e-9);
  }
  {
    const auto spec = PotentialSpec::builtin("quartic-spinodal");
    const auto bt = oracle::solve_bitangent(oracle::quartic_spinodal(), 1.5, 3.5);
    const auto s = compute_unstable_set(spec, compute_convex_envelope(spec));
    ASSERT_EQ(s.count(), 2u);
    EXPECT_TRUE(s.degenerate_first);
    EXPECT_NEAR(s.intervals[1].lo, bt.a, 1e-9);
    EXPECT_NEAR(s.intervals[1].hi, bt.b, 1e-9);
    EXPECT_NEAR(s.m0, bt.a / 2.0, 1e-9);
  }
}

TEST(UnstableSet, TooManyIntervalsIsAViolation) {
  const auto spec = PotentialSpec::from_functions(
      "wiggle", [](double y) { return y * y + 0.05 * std::sin(40.0 * y); },
      [](double y) { return 2.0 * y + 2.0 * std::cos(40.0 * y); },
      [](double y) { return 2.0 - 80.0 * std::sin(40.0 * y); }, 4.0);
  const auto env = compute_convex_envelope(spec);
  EXPECT_THROW(compute_unstable_set(spec, env, std::nullopt, 4), HypothesisViolation);
}

TEST(UnstableSet, Distance) {
  const auto cubic = PotentialSpec::builtin("cubic-motivation");
  const auto s = compute_unstable_set(cubic, compute_convex_envelope(cubic));
  EXPECT_NEAR(distance_to_sigma(2.0, s), 0.5, 1e-9);
  EXPECT_EQ(distance_to_sigma(1.0, s), 0.0);
  const auto sp = PotentialSpec::builtin("quartic-spinodal");
  const auto s2 = compute_unstable_set(sp, compute_convex_envelope(sp));
  const double a = s2.intervals[1].lo;
  for (double y : {0.2, 0.8, 1.3}) EXPECT_NEAR(distance_to_sigma(y, s2), std::min(y, a - y), 1e-12);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const double y = u(rng), z = u(rng);
    EXPECT_LE(std::abs(distance_to_sigma(y, s2) - distance_to_sigma(z, s2)), std::abs(y - z) + 1e-15);
  }
}

TEST(Hypotheses, Reports) {
  {
    const auto spec = PotentialSpec::builtin("cubic-motivation").with_domain_max(5.0);
    const auto rep = validate_hypotheses(spec, compute_convex_envelope(spec));
    EXPECT_TRUE(rep.clean());
    EXPECT_GT(rep.min_w2_off_sigma, 0.0);
    EXPECT_FALSE(rep.nonnegative);
  }
  {
    const auto spec = quartic_pure();
    EXPECT_TRUE(validate_hypotheses(spec, compute_convex_envelope(spec)).clean());
  }
  {
    const auto spec = PotentialSpec::builtin("quartic-spinodal");
    EXPECT_TRUE(validate_hypotheses(spec, compute_convex_envelope(spec)).clean());
  }
  {
    // W'' = 12 (y - 1)^2 vanishes at y = 1, away from the unstable set {0}.
    const auto spec = PotentialSpec::polynomial("flat", {0, 0, 6.0, -4.0, 1.0}, 4.0);
    EXPECT_FALSE(validate_hypotheses(spec, compute_convex_envelope(spec)).clean());
  }
}

TEST(Potential, DefaultDomainMax) {
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  const auto s = compute_unstable_set(spec, compute_convex_envelope(spec));
  EXPECT_DOUBLE_EQ(default_domain_max(spec, s, 1.0), std::max(spec.domain_max, 7.5));
  EXPECT_DOUBLE_EQ(default_domain_max(spec, s, 10.0), 20.0);
}
