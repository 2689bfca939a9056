#include "dchlab/nonlocal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <fftw3.h>

#include "dchlab/errors.hpp"
#include "dchlab/functionals.hpp"
#include "dchlab/wasserstein.hpp"

namespace dchlab {

namespace {

double bump_raw(double x) {
  const double y = 2.0 * x;
  if (!(std::abs(y) < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - y * y));
}

template <class F>
double simpson(F&& fn, double a, double b, std::size_t points) {
  if (points < 3) points = 3;
  if (points % 2 == 0) ++points;
  const std::size_t intervals = points - 1;
  const double h = (b - a) / static_cast<double>(intervals);
  double s = fn(a) + fn(b);
  for (std::size_t i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * fn(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

std::mutex& fftw_plan_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

KernelSpec bump_kernel(std::size_t quad_points) {
  const double mass = simpson(bump_raw, -0.5, 0.5, quad_points);
  const double c = 1.0 / mass;
  KernelSpec k;
  k.name = "bump";
  k.profile = [c](double x) { return c * bump_raw(x); };
  k.k0 = kernel_second_moment(k, quad_points);
  return k;
}

double kernel_second_moment(const KernelSpec& kern, std::size_t points) {
  return simpson([&](double x) { return x * x * kern.profile(x); }, -0.5, 0.5, points);
}

std::vector<double> sample_scaled_kernel(const KernelSpec& kern, double eps, std::size_t n) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidInput("kernel scale eps must lie in (0, 1]");
  if (n == 0) throw InvalidInput("kernel grid is empty");
  const double h = 1.0 / static_cast<double>(n);
  std::vector<double> k(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double x = static_cast<double>(j) * h;
    if (x > 0.5) x -= 1.0;
    k[j] = kern.profile(x / eps) / eps;
    sum += k[j] * h;
  }
  if (!(sum > 0.0)) throw InvalidInput("kernel support is not resolved by the grid");
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> convolve(const DensityField& f, const std::vector<double>& ks, ConvolutionMethod method) {
  const std::size_t n = f.size();
  if (ks.size() != n) throw InvalidInput("convolve: kernel and field sizes differ");
  const double h = f.spacing();
  std::vector<double> out(n, 0.0);
  if (method == ConvolutionMethod::Direct) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += ks[(j + n - i) % n] * f[i];
      out[j] = s * h;
    }
    return out;
  }
  const std::size_t nc = n / 2 + 1;
  std::vector<double> a(f.values().begin(), f.values().end());
  std::vector<double> b(ks);
  std::vector<std::complex<double>> fa(nc), fb(nc);
  fftw_plan pa, pb, pc;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    pa = fftw_plan_dft_r2c_1d(static_cast<int>(n), a.data(), reinterpret_cast<fftw_complex*>(fa.data()), FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(static_cast<int>(n), b.data(), reinterpret_cast<fftw_complex*>(fb.data()), FFTW_ESTIMATE);
    pc = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(fa.data()), out.data(),
                              FFTW_ESTIMATE);
  }
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t k = 0; k < nc; ++k) fa[k] *= fb[k];
  fftw_execute(pc);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(pc);
  }
  const double scale = h / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

DensityField step_nonlocal(const DensityField& f, double dt, double eps, const KernelSpec& kern,
                           ConvolutionMethod method, NonlocalStepInfo* info) {
  if (!(eps > 0.0) || !(dt > 0.0)) throw InvalidInput("step_nonlocal needs eps > 0 and dt > 0");
  const std::size_t n = f.size();
  if (n < 16) throw InvalidInput("step_nonlocal needs at least 16 cells");
  const double h = f.spacing();
  const auto ks = sample_scaled_kernel(kern, eps, n);
  const auto c = convolve(f, ks, method);

  // Explicit upwind aggregation flux.
  std::vector<double> agg(n);
  double vmax = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t jp = (j + 1) % n;
    const double v = (c[jp] - c[j]) / h;
    vmax = std::max(vmax, std::abs(v));
    agg[j] = v > 0.0 ? v * f[j] : v * f[jp];
  }
  const double cfl = vmax * dt / h;
  if (info) info->cfl = cfl;
  if (cfl > 0.5) {
    std::ostringstream os;
    os << "aggregation CFL number " << cfl << " exceeds 1/2";
    throw StepFailure(os.str());
  }
  std::vector<double> rhs0(n);
  for (std::size_t j = 0; j < n; ++j) rhs0[j] = f[j] - dt * (agg[j] - agg[(j + n - 1) % n]) / h;

  // Implicit porous-medium part: u - dt D[m (q_{j+1} - q_j) / h] = rhs0, q = u^2 / 2.
  std::vector<double> u(f.values().begin(), f.values().end());
  std::vector<double> r(n), flux(n);
  std::vector<Eigen::Triplet<double>> trip;
  const double tol = 1e-12 * (1.0 + f.max());
  int it = 0;
  for (;; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ip = (i + 1) % n;
      const double mob = std::max(0.0, 0.5 * (u[i] + u[ip]));
      flux[i] = mob * 0.5 * (u[ip] * u[ip] - u[i] * u[i]) / h;
    }
    double res = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = u[j] - rhs0[j] - dt * (flux[j] - flux[(j + n - 1) % n]) / h;
      res = std::max(res, std::abs(r[j]));
    }
    if (!std::isfinite(res)) throw StepFailure("non-finite residual in nonlocal step");
    if (res < tol) break;
    if (it >= 50) throw StepFailure("nonlocal Newton did not converge");
    trip.clear();
    for (std::size_t j = 0; j < n; ++j) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ip = (i + 1) % n;
      const double msum = 0.5 * (u[i] + u[ip]);
      const double mob = std::max(0.0, msum);
      const double dmob = msum > 0.0 ? 0.5 : 0.0;
      const double g = 0.5 * (u[ip] * u[ip] - u[i] * u[i]) / h;
      const double d_i = dmob * g - mob * u[i] / h;
      const double d_ip = dmob * g + mob * u[ip] / h;
      const double s = -dt / h;
      trip.emplace_back(static_cast<int>(i), static_cast<int>(i), s * d_i);
      trip.emplace_back(static_cast<int>(i), static_cast<int>(ip), s * d_ip);
      trip.emplace_back(static_cast<int>(ip), static_cast<int>(i), -s * d_i);
      trip.emplace_back(static_cast<int>(ip), static_cast<int>(ip), -s * d_ip);
    }
    Eigen::SparseMatrix<double> jac(static_cast<int>(n), static_cast<int>(n));
    jac.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success) throw StepFailure("nonlocal LU factorisation failed");
    Eigen::VectorXd b(static_cast<int>(n));
    for (std::size_t j = 0; j < n; ++j) b[static_cast<int>(j)] = -r[j];
    const Eigen::VectorXd d = lu.solve(b);
    for (std::size_t j = 0; j < n; ++j) u[j] += d[static_cast<int>(j)];
  }
  if (info) info->newton_iterations = it;
  for (double v : u) {
    if (v < -1e-12) throw StepFailure("nonlocal step produced negative density");
  }
  for (double& v : u) v = std::max(v, 0.0);
  return DensityField(std::move(u));
}

double nonlocal_seminorm_term(const DensityField& f, double eps, const KernelSpec& kern) {
  const auto c = convolve(f, sample_scaled_kernel(kern, eps, f.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * f[j] - f[j] * c[j];
  return 0.5 * s * f.spacing();
}

double energy_nonlocal(const DensityField& f, double eps, const KernelSpec& kern, const PotentialSpec& spec) {
  double w = 0.0;
  for (double v : f.values()) w += spec.eval_w(v);
  return w * f.spacing() + nonlocal_seminorm_term(f, eps, kern);
}

double energy_nonlocal(const DensityField& f, double eps, const KernelSpec& kern) {
  return energy_nonlocal(f, eps, kern, PotentialSpec::builtin("cubic-motivation"));
}

namespace {

EnergyReport nonlocal_report(const DensityField& f, double eps, const KernelSpec& kern, const PotentialSpec& spec,
                             const ConvexEnvelope& env) {
  EnergyReport r;
  r.e_eps = energy_nonlocal(f, eps, kern, spec);
  r.e_star = energy_star(f, env);
  const auto c = convolve(f, sample_scaled_kernel(kern, eps, f.size()));
  std::vector<double> p(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) p[j] = 0.5 * f[j] * f[j] - c[j];
  r.slope_eps = weighted_slope(f, p, default_slope_floor(f));
  r.slope_star = slope_star(f, env);
  r.gap = r.e_eps - r.e_star;
  return r;
}

}  // namespace

TrajectoryRecord simulate_nonlocal(const DensityField& f0, const NonlocalConfig& cfg, const KernelSpec& kern) {
  f0.validate(1e-10);
  if (f0.size() != cfg.n) throw ConfigError("initial data size differs from nonlocal n");
  if (!(cfg.dt > 0.0) || !(cfg.t_end > 0.0)) throw ConfigError("nonlocal run needs dt > 0 and t_end > 0");
  const auto spec = PotentialSpec::builtin("cubic-motivation");
  const auto env = compute_convex_envelope(spec);
  SolverConfig times;
  times.t_end = cfg.t_end;
  times.output_times = cfg.output_times;

  TrajectoryRecord traj;
  traj.flow = "nonlocal";
  DensityField f = f0;
  traj.append(0.0, f, nonlocal_report(f, cfg.eps, kern, spec, env));
  double e_cur = traj.reports.back().e_eps;
  double t = 0.0;
  double dt = cfg.dt;
  int streak = 0;
  for (double out : resolve_output_times(times)) {
    while (!traj.aborted && out - t > 1e-13 * std::max(1.0, out)) {
      const double remaining = out - t;
      const bool to_boundary = dt >= remaining;
      const double h = to_boundary ? remaining : dt;
      try {
        DensityField next = step_nonlocal(f, h, cfg.eps, kern, cfg.method);
        const double e_next = energy_nonlocal(next, cfg.eps, kern, spec);
        if (e_next > e_cur + 1e-8 * std::max(1.0, std::abs(e_cur))) {
          std::ostringstream os;
          os << "F rose from " << e_cur << " to " << e_next;
          traj.log(t, "energy-rise", os.str());
        }
        e_cur = e_next;
        f = std::move(next);
        t = to_boundary ? out : t + h;
        if (dt < cfg.dt && ++streak >= 8) {
          dt = std::min(cfg.dt, 2.0 * dt);
          streak = 0;
        }
      } catch (const StepFailure& e) {
        dt = 0.5 * h;
        streak = 0;
        traj.log(t, "dt-halved", e.what());
        if (dt < cfg.dt_min) {
          traj.aborted = true;
          traj.abort_reason = std::string("dt underflow: ") + e.what();
          traj.log(t, "abort", traj.abort_reason);
        }
      }
    }
    if (traj.aborted) break;
    traj.append(out, f, nonlocal_report(f, cfg.eps, kern, spec, env));
  }
  traj.compute_speeds();
  return traj;
}

LocalNonlocalComparison compare_local_nonlocal(const DensityField& f0, double eps, const KernelSpec& kern,
                                               const PotentialSpec& spec, double t_end,
                                               const std::vector<double>& output_times, double dt) {
  LocalNonlocalComparison out;
  out.eps = eps;
  out.eps_eff = eps * std::sqrt(kern.k0);

  NonlocalConfig ncfg;
  ncfg.n = f0.size();
  ncfg.dt = dt;
  ncfg.eps = eps;
  ncfg.t_end = t_end;
  ncfg.output_times = output_times;
  out.nonlocal = simulate_nonlocal(f0, ncfg, kern);

  SolverConfig lcfg;
  lcfg.n = f0.size();
  lcfg.dt = dt;
  lcfg.eps = out.eps_eff;
  lcfg.t_end = t_end;
  lcfg.output_times = output_times;
  out.local = simulate_eps(f0, lcfg, spec);

  const std::size_t k = std::min(out.local.snapshots.size(), out.nonlocal.snapshots.size());
  for (std::size_t i = 0; i < k; ++i) {
    out.times.push_back(out.local.times[i]);
    out.d2_gap.push_back(w2_periodic(out.local.snapshots[i], out.nonlocal.snapshots[i]));
    out.max_local = std::max(out.max_local, out.local.stats[i].max);
    out.max_nonlocal = std::max(out.max_nonlocal, out.nonlocal.stats[i].max);
  }
  return out;
}

}  // namespace dchlab
