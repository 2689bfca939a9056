#include "dchlab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "dchlab/errors.hpp"
#include "dchlab/functionals.hpp"

namespace dchlab {

std::string to_string(PositivityMode mode) {
  return mode == PositivityMode::ClipRenormalize ? "clip-renormalize" : "reject-halve";
}

PositivityMode positivity_mode_from_string(const std::string& s) {
  if (s == "clip-renormalize") return PositivityMode::ClipRenormalize;
  if (s == "reject-halve") return PositivityMode::RejectHalve;
  throw ConfigError("unknown positivity mode '" + s + "'");
}

void SolverConfig::validate() const {
  if (n < 16) throw ConfigError("solver needs n >= 16");
  if (!(dt > 0.0)) throw ConfigError("solver needs dt > 0");
  if (!(newton_tol > 0.0)) throw ConfigError("solver needs newton_tol > 0");
  if (!(eps >= 0.0)) throw ConfigError("eps must be non-negative");
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (!(theta_scheme >= 0.5 && theta_scheme <= 1.0)) throw ConfigError("theta_scheme must lie in [0.5, 1]");
  if (max_newton < 1) throw ConfigError("max_newton must be positive");
  for (double t : output_times) {
    if (!(t >= 0.0 && t <= t_end * (1.0 + 1e-12))) throw ConfigError("output times must lie in [0, t_end]");
  }
}

std::vector<double> resolve_output_times(const SolverConfig& cfg) {
  std::vector<double> out;
  for (double t : cfg.output_times) {
    if (t > 0.0) out.push_back(std::min(t, cfg.t_end));
  }
  if (out.empty()) out.push_back(cfg.t_end);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

double inf_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

// Divergence of the fourth-order flux, D_j = (F_{j+1/2} - F_{j-1/2}) / h.
struct EpsOperator {
  const PotentialSpec& spec;
  double eps2;
  double h;
  std::size_t n;

  void pressure(const std::vector<double>& u, std::vector<double>& p) const {
    const double c = eps2 / (h * h);
    for (std::size_t j = 0; j < n; ++j)
      p[j] = spec.eval_w1(u[j]) - c * (u[(j + 1) % n] - 2.0 * u[j] + u[(j + n - 1) % n]);
  }

  void apply(const std::vector<double>& u, std::vector<double>& d) const {
    std::vector<double> p(n), flux(n);
    pressure(u, p);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ip = (i + 1) % n;
      const double mob = std::max(0.0, 0.5 * (u[i] + u[ip]));
      flux[i] = mob * (p[ip] - p[i]) / h;
    }
    for (std::size_t j = 0; j < n; ++j) d[j] = (flux[j] - flux[(j + n - 1) % n]) / h;
  }

  // Triplets of dD/du scaled by `scale`.
  void jacobian(const std::vector<double>& u, double scale, std::vector<Eigen::Triplet<double>>& trip) const {
    const double c = eps2 / (h * h);
    std::vector<double> p(n);
    pressure(u, p);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t im = (i + n - 1) % n;
      const std::size_t ip = (i + 1) % n;
      const std::size_t ipp = (i + 2) % n;
      const double msum = 0.5 * (u[i] + u[ip]);
      const double mob = std::max(0.0, msum);
      const double dmob = msum > 0.0 ? 0.5 : 0.0;
      const double g = (p[ip] - p[i]) / h;
      // dp_l/du_l and dp_l/du_{l +- 1}.
      const double di = spec.eval_w2(u[i]) + 2.0 * c;
      const double dip = spec.eval_w2(u[ip]) + 2.0 * c;
      // F_{i+1/2} = mob (p_{i+1} - p_i) / h.
      const std::size_t cols[4] = {im, i, ip, ipp};
      double vals[4];
      vals[0] = mob * (0.0 - (-c)) / h;
      vals[1] = dmob * g + mob * ((-c) - di) / h;
      vals[2] = dmob * g + mob * (dip - (-c)) / h;
      vals[3] = mob * ((-c) - 0.0) / h;
      for (int k = 0; k < 4; ++k) {
        const double a = scale * vals[k] / h;
        trip.emplace_back(static_cast<int>(i), static_cast<int>(cols[k]), a);
        trip.emplace_back(static_cast<int>(ip), static_cast<int>(cols[k]), -a);
      }
    }
  }
};

Vec solve_sparse(const SpMat& jac, const Vec& rhs) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(jac);
  lu.factorize(jac);
  if (lu.info() != Eigen::Success) throw StepFailure("sparse LU factorisation failed");
  Vec x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw StepFailure("sparse LU solve failed");
  return x;
}

DensityField finish_step(std::vector<double> u, double target_mass, const SolverConfig& cfg, StepInfo* info) {
  double neg = 0.0;
  for (double v : u) {
    if (!std::isfinite(v)) throw StepFailure("non-finite density after step");
    if (v < 0.0) neg -= v;
  }
  if (neg > 0.0) {
    if (cfg.positivity_mode == PositivityMode::RejectHalve) {
      std::ostringstream os;
      os << "negative density after step (negative mass " << neg / static_cast<double>(u.size()) << ")";
      throw StepFailure(os.str());
    }
    for (double& v : u) v = std::max(v, 0.0);
  }
  DensityField out(std::move(u));
  if (neg > 0.0) {
    const double m = out.mass();
    for (double& v : out.mutable_values()) v *= target_mass / m;
  }
  if (info) info->clipped_mass = neg * out.spacing();
  return out;
}

}  // namespace

DensityField step_eps(const DensityField& f, const SolverConfig& cfg, const PotentialSpec& spec, StepInfo* info) {
  if (!(cfg.eps > 0.0)) throw InvalidInput("step_eps needs eps > 0");
  const std::size_t n = f.size();
  if (n < 16) throw InvalidInput("step_eps needs at least 16 cells");
  const double h = f.spacing();
  const double dt = cfg.dt;
  const double th = cfg.theta_scheme;
  EpsOperator op{spec, cfg.eps * cfg.eps, h, n};

  const std::vector<double> f0(f.values().begin(), f.values().end());
  std::vector<double> explicit_part(n, 0.0);
  if (th < 1.0) op.apply(f0, explicit_part);

  std::vector<double> u = f0;
  std::vector<double> d(n), r(n);
  const double tol = cfg.newton_tol * (1.0 + inf_norm(f0));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * n);
  int it = 0;
  double res = 0.0, floor = 0.0;
  for (;; ++it) {
    op.apply(u, d);
    for (std::size_t j = 0; j < n; ++j) r[j] = u[j] - f0[j] - dt * (th * d[j] + (1.0 - th) * explicit_part[j]);
    res = inf_norm(r);
    if (!std::isfinite(res)) throw StepFailure("Newton residual is not finite");
    if (res < std::max(tol, floor)) break;
    if (it >= cfg.max_newton) {
      std::ostringstream os;
      os << "Newton did not converge in " << cfg.max_newton << " iterations (residual " << res << ")";
      throw StepFailure(os.str());
    }
    trip.clear();
    for (std::size_t j = 0; j < n; ++j) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), 1.0);
    op.jacobian(u, -dt * th, trip);
    SpMat jac(static_cast<int>(n), static_cast<int>(n));
    jac.setFromTriplets(trip.begin(), trip.end());
    // Rounding floor of the residual: on fine grids the dt eps^2 / h^4 terms
    // put it above newton_tol.
    std::vector<double> row(n, 0.0);
    for (int k = 0; k < jac.outerSize(); ++k) {
      for (SpMat::InnerIterator e(jac, k); e; ++e) {
        row[static_cast<std::size_t>(e.row())] += std::abs(e.value() * u[static_cast<std::size_t>(e.col())]);
      }
    }
    floor = 64.0 * std::numeric_limits<double>::epsilon() * *std::max_element(row.begin(), row.end());
    Vec rhs(static_cast<int>(n));
    for (std::size_t j = 0; j < n; ++j) rhs[static_cast<int>(j)] = -r[j];
    const Vec delta = solve_sparse(jac, rhs);
    for (std::size_t j = 0; j < n; ++j) u[j] += delta[static_cast<int>(j)];
  }
  if (info) {
    info->newton_iterations = it;
    info->residual = res;
  }
  return finish_step(std::move(u), f.mass(), cfg, info);
}

namespace {

double q_star(const ConvexEnvelope& env, double y) { return y <= 0.0 ? 0.0 : env.eval_qss1(y); }
double dq_star(const ConvexEnvelope& env, double y) { return y <= 0.0 ? 0.0 : env.eval_qss2(y); }

void limit_residual(const std::vector<double>& u, const std::vector<double>& f, double dt, double h,
                    const ConvexEnvelope& env, std::vector<double>& q, std::vector<double>& r) {
  const std::size_t n = u.size();
  for (std::size_t j = 0; j < n; ++j) q[j] = q_star(env, u[j]);
  const double c = dt / (h * h);
  for (std::size_t j = 0; j < n; ++j) r[j] = u[j] - f[j] - c * (q[(j + 1) % n] - 2.0 * q[j] + q[(j + n - 1) % n]);
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

DensityField step_limit(const DensityField& f, const SolverConfig& cfg, const ConvexEnvelope& env, StepInfo* info) {
  const std::size_t n = f.size();
  if (n < 16) throw InvalidInput("step_limit needs at least 16 cells");
  const double h = f.spacing();
  const double dt = cfg.dt;
  const std::vector<double> f0(f.values().begin(), f.values().end());
  std::vector<double> u = f0, q(n), r(n), trial(n), rt(n);
  const double tol = cfg.newton_tol * (1.0 + inf_norm(f0));
  const double c = dt / (h * h);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * n);
  int it = 0;
  limit_residual(u, f0, dt, h, env, q, r);
  double res = inf_norm(r);
  for (; res >= tol; ++it) {
    if (!std::isfinite(res)) throw StepFailure("limit Newton residual is not finite");
    if (it >= cfg.max_newton) {
      std::ostringstream os;
      os << "limit Newton did not converge in " << cfg.max_newton << " iterations (residual " << res << ")";
      throw StepFailure(os.str());
    }
    trip.clear();
    for (std::size_t j = 0; j < n; ++j) {
      const double dq = dq_star(env, u[j]);
      const int jj = static_cast<int>(j);
      trip.emplace_back(jj, jj, 1.0 + 2.0 * c * dq);
      trip.emplace_back(static_cast<int>((j + 1) % n), jj, -c * dq);
      trip.emplace_back(static_cast<int>((j + n - 1) % n), jj, -c * dq);
    }
    SpMat jac(static_cast<int>(n), static_cast<int>(n));
    jac.setFromTriplets(trip.begin(), trip.end());
    Vec rhs(static_cast<int>(n));
    for (std::size_t j = 0; j < n; ++j) rhs[static_cast<int>(j)] = -r[j];
    const Vec delta = solve_sparse(jac, rhs);
    // Backtracking on the residual norm; the map is only piecewise smooth.
    const double r0 = l2(r);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = u[j] + alpha * delta[static_cast<int>(j)];
      limit_residual(trial, f0, dt, h, env, q, rt);
      if (l2(rt) <= (1.0 - 1e-4 * alpha) * r0) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) throw StepFailure("limit Newton line search failed");
    u.swap(trial);
    r.swap(rt);
    res = inf_norm(r);
  }
  if (info) {
    info->newton_iterations = it;
    info->residual = res;
  }
  return finish_step(std::move(u), f.mass(), cfg, info);
}

double limit_positivity_dt_bound(const DensityField&, const ConvexEnvelope&) {
  return std::numeric_limits<double>::infinity();
}

namespace {

template <class Step, class Energy, class Report>
TrajectoryRecord drive(const DensityField& f0, const SolverConfig& cfg, const std::string& flow, Step&& step,
                       Energy&& energy, Report&& report) {
  cfg.validate();
  f0.validate(1e-10);
  if (f0.size() != cfg.n) throw ConfigError("initial data size differs from solver n");
  TrajectoryRecord traj;
  traj.flow = flow;
  DensityField f = f0;
  traj.append(0.0, f, report(f));
  double e_cur = energy(f);
  if (!std::isfinite(e_cur)) throw InvalidInput("initial energy is not finite");
  const double scale = std::max(std::abs(e_cur), cfg.energy_scale_floor);
  double t = 0.0;
  double dt = cfg.dt;
  int streak = 0;
  for (double out : resolve_output_times(cfg)) {
    while (!traj.aborted && out - t > 1e-13 * std::max(1.0, out)) {
      const double remaining = out - t;
      const bool to_boundary = dt >= remaining;
      const double h = to_boundary ? remaining : dt;
      StepInfo info;
      DensityField next;
      std::string failure;
      try {
        next = step(f, h, &info);
        const double e_next = energy(next);
        if (!(e_next <= e_cur + cfg.energy_slack * scale)) {
          std::ostringstream os;
          os << "energy rose from " << e_cur << " to " << e_next;
          failure = os.str();
          traj.log(t, "energy-reject", failure);
        } else {
          e_cur = e_next;
        }
      } catch (const StepFailure& e) {
        failure = e.what();
        traj.log(t, "step-failure", failure);
      }
      if (!failure.empty()) {
        dt = 0.5 * h;
        streak = 0;
        std::ostringstream os;
        os << "dt -> " << dt;
        traj.log(t, "dt-halved", os.str());
        if (dt < cfg.dt_min) {
          traj.aborted = true;
          traj.abort_reason = "dt underflow: " + failure;
          traj.log(t, "abort", traj.abort_reason);
        }
        continue;
      }
      if (info.clipped_mass > 0.0) {
        std::ostringstream os;
        os << "clipped negative mass " << info.clipped_mass;
        traj.log(t, "clip", os.str());
      }
      f = std::move(next);
      t = to_boundary ? out : t + h;
      if (dt < cfg.dt && ++streak >= 8) {
        dt = std::min(cfg.dt, 2.0 * dt);
        streak = 0;
        std::ostringstream os;
        os << "dt -> " << dt;
        traj.log(t, "dt-restored", os.str());
      }
    }
    if (traj.aborted) break;
    traj.append(out, f, report(f));
  }
  if (cfg.record_speeds) traj.compute_speeds(cfg.speed_m);
  return traj;
}

}  // namespace

TrajectoryRecord simulate_eps(const DensityField& f0, const SolverConfig& cfg, const PotentialSpec& spec) {
  return simulate_eps(f0, cfg, spec, compute_convex_envelope(spec));
}

TrajectoryRecord simulate_eps(const DensityField& f0, const SolverConfig& cfg, const PotentialSpec& spec,
                              const ConvexEnvelope& env) {
  if (!(cfg.eps > 0.0)) throw ConfigError("simulate_eps needs eps > 0");
  auto step = [&](const DensityField& f, double h, StepInfo* info) {
    SolverConfig c = cfg;
    c.dt = h;
    return step_eps(f, c, spec, info);
  };
  auto energy = [&](const DensityField& f) { return energy_eps(f, cfg.eps, spec); };
  auto report = [&](const DensityField& f) { return energy_report(f, cfg.eps, spec, env); };
  return drive(f0, cfg, "eps", step, energy, report);
}

TrajectoryRecord simulate_limit(const DensityField& f0, const SolverConfig& cfg, const ConvexEnvelope& env) {
  auto step = [&](const DensityField& f, double h, StepInfo* info) {
    SolverConfig c = cfg;
    c.dt = h;
    return step_limit(f, c, env, info);
  };
  auto energy = [&](const DensityField& f) { return energy_star(f, env); };
  auto report = [&](const DensityField& f) { return energy_report(f, 0.0, env.spec(), env); };
  return drive(f0, cfg, "limit", step, energy, report);
}

}  // namespace dchlab
