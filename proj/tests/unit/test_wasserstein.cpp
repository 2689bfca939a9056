#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "circle_ot.hpp"
#include "dchlab/errors.hpp"
#include "dchlab/functionals.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/trajectory.hpp"
#include "dchlab/wasserstein.hpp"
#include "reference.hpp"

using namespace dchlab;

namespace {

std::vector<double> cells(const DensityField& f) { return {f.values().begin(), f.values().end()}; }

DensityField bump(std::size_t n, double center, double width, double floor = 0.0) {
  return DensityField::from_function(n, [=](double x) {
    double d = x - center;
    d -= std::nearbyint(d);
    const double y = 2.0 * d / width;
    return floor + (std::abs(y) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - y * y)) : 0.0);
  });
}

DensityField random_field(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> amp(0.0, 0.6), phase(0.0, 6.283185307179586);
  const double a1 = amp(rng), a2 = 0.5 * amp(rng), p1 = phase(rng), p2 = phase(rng);
  return DensityField::from_function(n, [=](double x) {
    const double w = 6.283185307179586 * x;
    return 1.0 + a1 * std::cos(w + p1) + a2 * std::cos(3.0 * w + p2);
  });
}

}  // namespace

TEST(Quantiles, Uniform) {
  const auto q = to_quantiles(DensityField::uniform(50), 100);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_NEAR(q.positions[k], (k + 0.5) / 100.0, 1e-14);
}

TEST(Quantiles, HalfInterval) {
  std::vector<double> v(64, 0.0);
  for (std::size_t j = 0; j < 32; ++j) v[j] = 2.0;
  const auto q = to_quantiles(DensityField(v), 40);
  for (std::size_t k = 0; k < 40; ++k) EXPECT_NEAR(q.positions[k], (k + 0.5) / 80.0, 1e-14);
}

TEST(Quantiles, NarrowBumpStaysInSupport) {
  const auto f = bump(512, 0.3, 0.05);
  const auto q = to_quantiles(f, 200);
  for (double x : q.positions) {
    EXPECT_GE(x, 0.3 - 0.025 - 1.0 / 512);
    EXPECT_LE(x, 0.3 + 0.025 + 1.0 / 512);
  }
}

TEST(Quantiles, VacuumTakesLeftEndpoint) {
  // Mass 1/2 in cell 0, 1/2 in cell 3: the median level sits at the end of
  // cell 0, the left end of the flat stretch.
  const QuantileFunction qf(DensityField({2.0, 0.0, 0.0, 2.0}));
  EXPECT_NEAR(qf(0.5), 0.25, 1e-14);
  EXPECT_NEAR(qf(1.5), 1.25, 1e-14);
}

TEST(Quantiles, ZeroMassRejected) { EXPECT_THROW(to_quantiles(DensityField({0.0, 0.0}), 4), InvalidInput); }

TEST(Quantiles, RoundTripConverges) {
  const auto f = DensityField::from_function(128, [](double x) { return 1.0 + 0.5 * std::sin(6.283185307179586 * x); });
  double prev = 1e9;
  for (std::size_t m : {256u, 1024u, 4096u}) {
    const double err = l1_distance(to_density(to_quantiles(f, m), 128), f);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 5e-3);
  EXPECT_NEAR(to_density(to_quantiles(f, 300), 128).mass(), 1.0, 1e-13);
}

TEST(W2, IdentityAndUniformTranslation) {
  const auto f = bump(256, 0.4, 0.3, 0.2);
  EXPECT_NEAR(w2_periodic(f, f), 0.0, 1e-12);
  const auto u = DensityField::uniform(128);
  EXPECT_NEAR(w2_periodic(u, translate(u, 0.3)), 0.0, 1e-12);
}

TEST(W2, NarrowBumpsMatchCircleOracle) {
  for (double d : {0.05, 0.13, 0.27, 0.41, 0.5}) {
    const auto a = bump(1024, 0.2, 0.02), b = bump(1024, 0.2 + d, 0.02);
    const double lib = w2_periodic(a, b);
    const double ref = oracle::circle_w2(cells(a), cells(b), 200);
    EXPECT_NEAR(lib, d, 0.02) << "d=" << d;
    EXPECT_NEAR(lib, ref, 0.01 * ref) << "d=" << d;
  }
}

TEST(W2, UniformToArbitraryMatchesOracle) {
  // Distances well above the particle spacing of the oracle (1/200).
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(0.0, 1.0), w(0.2, 0.6), fl(0.05, 0.5);
  const auto u = DensityField::uniform(256);
  for (int i = 0; i < 5; ++i) {
    const auto f = bump(256, c(rng), w(rng), fl(rng));
    const double lib = w2_periodic(u, f);
    const double ref = oracle::circle_w2(cells(u), cells(f), 200);
    EXPECT_NEAR(lib, ref, 0.01 * ref + 1e-4);
  }
}

TEST(W2, CyclicShiftIsOptimalAssignment) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(40), y(40);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = 0.5 * u(rng) * u(rng);
    EXPECT_NEAR(oracle::cyclic_shift_w2(x, y), oracle::hungarian_w2(x, y), 1e-12);
  }
}

TEST(W2, MetricAxiomsOnRandomTriples) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_field(rng, 128), b = random_field(rng, 128), c = random_field(rng, 128);
    const double ab = w2_periodic(a, b), ba = w2_periodic(b, a), bc = w2_periodic(b, c), ac = w2_periodic(a, c);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, ba, 1e-10);
    EXPECT_LE(ac, ab + bc + 1e-8);
    const std::size_t m = 512;
    const double abm = w2_periodic(a, b, m), bcm = w2_periodic(b, c, m), acm = w2_periodic(a, c, m);
    EXPECT_LE(acm, abm + bcm + 1e-8 + 2.0 / m);
  }
}

TEST(W2, TranslationBound) {
  const auto narrow = bump(2048, 0.5, 0.002);
  const auto wide = bump(256, 0.5, 0.6, 0.3);
  for (double s : {0.05, 0.2, 0.35, 0.5, 0.7, 0.9}) {
    const double bound = std::min(s, 1.0 - s);
    EXPECT_LE(w2_periodic(wide, translate(wide, s)), bound + 1e-9);
    const double d = w2_periodic(narrow, translate(narrow, s), 4 * 2048);
    EXPECT_LE(d, bound + 1e-9);
    // At the antipode, splitting the bump both ways beats the rigid shift by
    // O(width), so equality is only expected away from s = 1/2.
    if (s != 0.5) EXPECT_NEAR(d, bound, 2.0 / (4 * 2048) + 1e-9);
  }
}

TEST(W2, OffsetObjectiveUnimodalOnRandomPairs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_field(rng, 64), b = random_field(rng, 64);
    const int k = 400;
    std::vector<double> j(k);
    for (int i = 0; i < k; ++i) j[i] = w2_offset_objective(a, b, static_cast<double>(i) / k);
    int minima = 0;
    for (int i = 0; i < k; ++i) {
      if (j[i] < j[(i + k - 1) % k] && j[i] <= j[(i + 1) % k]) ++minima;
    }
    EXPECT_EQ(minima, 1) << "trial " << trial;
    const auto det = w2_periodic_detail(a, b);
    EXPECT_LE(det.distance * det.distance, *std::min_element(j.begin(), j.end()) + 1e-12);
  }
}

TEST(W2, ParticlesMatchOracle) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QuantileRepr a, b;
  for (int i = 0; i < 60; ++i) {
    a.positions.push_back(u(rng));
    b.positions.push_back(u(rng));
  }
  std::sort(a.positions.begin(), a.positions.end());
  std::sort(b.positions.begin(), b.positions.end());
  EXPECT_NEAR(w2_particles(a, b), oracle::hungarian_w2(a.positions, b.positions), 1e-12);
}

TEST(Geodesic, EndpointsAndConstantSpeed) {
  const auto mu = bump(256, 0.3, 0.3, 0.3), nu = bump(256, 0.6, 0.4, 0.3);
  EXPECT_LT(l1_distance(geodesic(mu, nu, 0.0), mu), 2e-3);
  EXPECT_LT(l1_distance(geodesic(mu, nu, 1.0), nu), 2e-3);
  const double d = w2_periodic(mu, nu);
  for (double t : {0.25, 0.5, 0.75}) EXPECT_NEAR(w2_periodic(mu, geodesic(mu, nu, t)), t * d, 0.02 * d);
}

TEST(Geodesic, TranslatedBumpTranslates) {
  // Without a floor, so that the optimal plan is the translation itself.
  const auto mu = bump(512, 0.3, 0.2);
  const auto nu = translate(mu, 0.2);
  EXPECT_LT(l1_distance(geodesic(mu, nu, 0.5), translate(mu, 0.1)), 5e-3);
}

TEST(Geodesic, ConvexityProbe) {
  const auto spec = PotentialSpec::builtin("quartic-spinodal");
  const auto env = compute_convex_envelope(spec);
  const auto mu = bump(256, 0.3, 0.3, 0.5), nu = bump(256, 0.7, 0.5, 0.2);
  const double em = energy_star(mu, env), en = energy_star(nu, env);
  for (double t : {0.2, 0.5, 0.8}) EXPECT_LE(energy_star(geodesic(mu, nu, t), env), (1 - t) * em + t * en + 1e-6);
}

TEST(MetricSpeed, StationaryAndTranslating) {
  const auto f = bump(512, 0.3, 0.2);
  TrajectoryRecord tr;
  const double c = 0.8;
  for (int k = 0; k < 5; ++k) tr.append(0.05 * k, translate(f, c * 0.05 * k), EnergyReport{});
  for (std::size_t k = 0; k + 1 < tr.size(); ++k) EXPECT_NEAR(metric_speed(tr, k), c, 0.02 * c);
  TrajectoryRecord st;
  st.append(0.0, f, EnergyReport{});
  st.append(1.0, f, EnergyReport{});
  EXPECT_NEAR(metric_speed(st, 0), 0.0, 1e-12);
  TrajectoryRecord one;
  one.append(0.0, f, EnergyReport{});
  EXPECT_THROW(metric_speed(one, 0), InvalidInput);
}

TEST(MetricSpeed, RichardsonRefinement) {
  // Accelerating translation x(t) = t^2: secant speeds converge at O(dt).
  const auto f = bump(1024, 0.2, 0.3);
  auto speed = [&](double dt) {
    TrajectoryRecord tr;
    tr.append(0.2, translate(f, 0.04), EnergyReport{});
    tr.append(0.2 + dt, translate(f, (0.2 + dt) * (0.2 + dt)), EnergyReport{});
    return metric_speed(tr, 0);
  };
  const double e1 = std::abs(speed(0.04) - 0.4), e2 = std::abs(speed(0.02) - 0.4);
  EXPECT_NEAR(e1 / e2, 2.0, 0.2);
}
