#include "dchlab/functionals.hpp"

#include <algorithm>
#include <cmath>

namespace dchlab {

double energy_eps(const DensityField& f, double eps, const PotentialSpec& spec) {
  const std::size_t n = f.size();
  const double h = f.spacing();
  const double c = 0.5 * eps * eps;
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = (f[(j + 1) % n] - f[j]) / h;
    s += c * d * d + spec.eval_w(f[j]);
  }
  return s * h;
}

double energy_star(const DensityField& f, const ConvexEnvelope& env) {
  double s = 0.0;
  for (double v : f.values()) s += env.eval_wss(v);
  return s * f.spacing();
}

double dirichlet_seminorm(const DensityField& f) {
  const std::size_t n = f.size();
  const double h = f.spacing();
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = (f[(j + 1) % n] - f[j]) / h;
    s += d * d;
  }
  return s * h;
}

std::vector<double> chemical_potential(const DensityField& f, double eps, const PotentialSpec& spec) {
  const std::size_t n = f.size();
  const double h = f.spacing();
  const double c = eps * eps / (h * h);
  std::vector<double> e(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lap = f[(j + 1) % n] - 2.0 * f[j] + f[(j + n - 1) % n];
    e[j] = spec.eval_w1(f[j]) - c * lap;
  }
  return e;
}

std::vector<double> centered_difference(const std::vector<double>& a, double h) {
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = (a[(j + 1) % n] - a[(j + n - 1) % n]) / (2.0 * h);
  return d;
}

std::vector<double> g_field(const DensityField& f, double eps, const PotentialSpec& spec) {
  const std::size_t n = f.size();
  const double h = f.spacing();
  std::vector<double> vals(f.values().begin(), f.values().end());
  const auto df = centered_difference(vals, h);
  std::vector<double> fdf(n);
  for (std::size_t j = 0; j < n; ++j) fdf[j] = vals[j] * df[j];
  const auto dfdf = centered_difference(fdf, h);
  const double e2 = eps * eps;
  std::vector<double> g(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double y = vals[j];
    g[j] = y * spec.eval_w1(y) - spec.eval_w(y) + 1.5 * e2 * df[j] * df[j] - e2 * dfdf[j];
  }
  return g;
}

double default_slope_floor(const DensityField& f) { return 1e-8 * f.max(); }

double weighted_slope(const DensityField& f, const std::vector<double>& p, double floor) {
  const auto dp = centered_difference(p, f.spacing());
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    if (f[j] > floor) s += f[j] * dp[j] * dp[j];
  }
  return std::sqrt(s * f.spacing());
}

double slope_eps(const DensityField& f, double eps, const PotentialSpec& spec, double floor) {
  if (floor < 0.0) floor = default_slope_floor(f);
  return weighted_slope(f, chemical_potential(f, eps, spec), floor);
}

double slope_star(const DensityField& f, const ConvexEnvelope& env) {
  std::vector<double> p(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) p[j] = env.eval_wss1(f[j]);
  // Zero-mass cells carry no weight, so any floor below zero is equivalent.
  return weighted_slope(f, p, -1.0);
}

EnergyReport energy_report(const DensityField& f, double eps, const PotentialSpec& spec, const ConvexEnvelope& env,
                           double floor) {
  EnergyReport r;
  r.e_eps = energy_eps(f, eps, spec);
  r.e_star = energy_star(f, env);
  r.slope_eps = slope_eps(f, eps, spec, floor);
  r.slope_star = slope_star(f, env);
  r.gap = r.e_eps - r.e_star;
  return r;
}

}  // namespace dchlab
