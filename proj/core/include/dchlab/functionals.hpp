#pragma once

#include <vector>

#include "dchlab/density.hpp"
#include "dchlab/potential.hpp"

namespace dchlab {

/// Energies and slope surrogates of one snapshot.
struct EnergyReport {
  double e_eps = 0.0;
  double e_star = 0.0;
  double slope_eps = 0.0;
  double slope_star = 0.0;
  /// e_eps - e_star.
  double gap = 0.0;
};

/// Discrete E^eps: sum of (eps^2/2) ((f_{j+1} - f_j)/h)^2 + W(f_j), times h.
double energy_eps(const DensityField& f, double eps, const PotentialSpec& spec);

/// Discrete E** = sum W**(f_j) h.
double energy_star(const DensityField& f, const ConvexEnvelope& env);

/// Squared discrete H1 seminorm with forward differences.
double dirichlet_seminorm(const DensityField& f);

/// W'(f_j) - eps^2 (f_{j+1} - 2 f_j + f_{j-1}) / h^2.
std::vector<double> chemical_potential(const DensityField& f, double eps, const PotentialSpec& spec);

/// Q'(f) + (3 eps^2 / 2) (D f)^2 - eps^2 D(f D f) with centred differences D.
std::vector<double> g_field(const DensityField& f, double eps, const PotentialSpec& spec);

/// Centred periodic difference of a grid function on spacing h.
std::vector<double> centered_difference(const std::vector<double>& a, double h);

/// Default vacuum floor: 1e-8 max(f).
double default_slope_floor(const DensityField& f);

/// sqrt(sum over {f_j > floor} of f_j (D e)_j^2 h), e the chemical potential.
/// A negative floor selects default_slope_floor(f).
double slope_eps(const DensityField& f, double eps, const PotentialSpec& spec, double floor = -1.0);

/// sqrt(sum f_j (D W**'(f))_j^2 h).
double slope_star(const DensityField& f, const ConvexEnvelope& env);

/// Weighted slope sqrt(sum over {f_j > floor} f_j (D p)_j^2 h) of an
/// arbitrary potential field p.
double weighted_slope(const DensityField& f, const std::vector<double>& p, double floor);

EnergyReport energy_report(const DensityField& f, double eps, const PotentialSpec& spec, const ConvexEnvelope& env,
                           double floor = -1.0);

}  // namespace dchlab
