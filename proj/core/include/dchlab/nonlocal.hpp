#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dchlab/density.hpp"
#include "dchlab/potential.hpp"
#include "dchlab/solvers.hpp"
#include "dchlab/trajectory.hpp"

namespace dchlab {

/// Even, unit-mass kernel supported in [-1/2, 1/2].
struct KernelSpec {
  std::string name;
  std::function<double(double)> profile;
  /// Second moment int x^2 K(x) dx.
  double k0 = 0.0;
};

/// c exp(-1 / (1 - (2x)^2)) on (-1/2, 1/2), normalised by quadrature with
/// `quad_points` composite Simpson nodes.
KernelSpec bump_kernel(std::size_t quad_points = 20001);

/// int x^2 K(x) dx by composite Simpson with `points` nodes.
double kernel_second_moment(const KernelSpec& kern, std::size_t points);

enum class ConvolutionMethod { Spectral, Direct };

/// K^eps(x) = K(x / eps) / eps sampled on the periodic grid of n cells and
/// rescaled so that sum K_j h = 1.
std::vector<double> sample_scaled_kernel(const KernelSpec& kern, double eps, std::size_t n);

/// Periodic convolution (K^eps * f)_j = sum_i K_{j-i} f_i h.
std::vector<double> convolve(const DensityField& f, const std::vector<double>& kernel_samples,
                             ConvolutionMethod method = ConvolutionMethod::Spectral);

struct NonlocalStepInfo {
  int newton_iterations = 0;
  double cfl = 0.0;
};

/// One step of the aggregation equation with velocity D(K^eps * f) - f D f.
/// The porous-medium part is implicit (Newton), the aggregation flux is
/// explicit and upwinded. Throws StepFailure when max |v| dt > h / 2.
DensityField step_nonlocal(const DensityField& f, double dt, double eps, const KernelSpec& kern,
                           ConvolutionMethod method = ConvolutionMethod::Spectral, NonlocalStepInfo* info = nullptr);

/// F^eps = int W(f) + (1/2) [int f^2 - int f (K^eps * f)] with the cubic
/// W(x) = x^3/6 - x^2/2 unless another potential is given.
double energy_nonlocal(const DensityField& f, double eps, const KernelSpec& kern);
double energy_nonlocal(const DensityField& f, double eps, const KernelSpec& kern, const PotentialSpec& spec);

/// The quadratic interaction term alone: (1/2) [int f^2 - int f (K^eps * f)].
double nonlocal_seminorm_term(const DensityField& f, double eps, const KernelSpec& kern);

struct NonlocalConfig {
  std::size_t n = 256;
  double dt = 1e-5;
  double eps = 0.1;
  double t_end = 0.05;
  std::vector<double> output_times;
  double dt_min = 1e-14;
  ConvolutionMethod method = ConvolutionMethod::Spectral;
};

/// Adaptive run; snapshots report F^eps in e_eps and the weighted slope of
/// f^2/2 - K^eps * f in slope_eps.
TrajectoryRecord simulate_nonlocal(const DensityField& f0, const NonlocalConfig& cfg, const KernelSpec& kern);

struct LocalNonlocalComparison {
  double eps = 0.0;
  double eps_eff = 0.0;
  std::vector<double> times;
  std::vector<double> d2_gap;
  double max_local = 0.0;
  double max_nonlocal = 0.0;
  TrajectoryRecord local;
  TrajectoryRecord nonlocal;
};

/// Runs both models to t_end on the same output times; the local run uses
/// eps_eff^2 = eps^2 k0.
LocalNonlocalComparison compare_local_nonlocal(const DensityField& f0, double eps, const KernelSpec& kern,
                                               const PotentialSpec& spec, double t_end,
                                               const std::vector<double>& output_times, double dt);

}  // namespace dchlab
