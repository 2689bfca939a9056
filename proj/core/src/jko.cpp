#include "dchlab/jko.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Sparse>

#include "dchlab/functionals.hpp"

namespace dchlab {

std::string to_string(JkoInnerSolver s) { return s == JkoInnerSolver::Newton ? "newton" : "lbfgs"; }

JkoInnerSolver jko_inner_solver_from_string(const std::string& s) {
  if (s == "newton") return JkoInnerSolver::Newton;
  if (s == "lbfgs") return JkoInnerSolver::Lbfgs;
  throw ConfigError("unknown jko inner solver '" + s + "'");
}

void JkoConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("jko needs tau > 0");
  if (m < 64) throw ConfigError("jko needs m >= 64");
  if (!(inner_tol > 0.0)) throw ConfigError("jko needs inner_tol > 0");
  if (inner_max < 1) throw ConfigError("jko needs inner_max >= 1");
  if (reconstruct_bandwidth < 0.0) throw ConfigError("reconstruct_bandwidth must be non-negative");
  if (!(kernel_cutoff > 0.0)) throw ConfigError("kernel_cutoff must be positive");
  if (lbfgs_memory < 1) throw ConfigError("lbfgs_memory must be positive");
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

struct TruncatedGaussian {
  double cutoff;
  double lo;
  double norm;

  explicit TruncatedGaussian(double c) : cutoff(c), lo(phi_cdf(-c)), norm(phi_cdf(c) - phi_cdf(-c)) {}

  static double phi_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

  double cdf(double z) const {
    if (z <= -cutoff) return 0.0;
    if (z >= cutoff) return 1.0;
    return (phi_cdf(z) - lo) / norm;
  }
  double pdf(double z) const {
    if (z <= -cutoff || z >= cutoff) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z) / norm;
  }
};

template <class Visit>
void for_each_boundary(double x, std::size_t n, double bandwidth, double cutoff, Visit&& visit) {
  const double h = 1.0 / static_cast<double>(n);
  const double xr = x - std::floor(x);
  const double reach = cutoff * bandwidth;
  const long qlo = static_cast<long>(std::floor((xr - reach) / h));
  const long qhi = static_cast<long>(std::ceil((xr + reach) / h));
  for (long q = qlo; q <= qhi; ++q) visit(q, (static_cast<double>(q) * h - xr) / bandwidth);
}

}  // namespace

DensityField reconstruct_density(const QuantileRepr& x, std::size_t n, double bandwidth, double cutoff) {
  if (n == 0 || x.m() == 0) throw InvalidInput("reconstruct_density needs particles and cells");
  if (!(bandwidth > 0.0)) throw InvalidInput("reconstruct_density needs a positive bandwidth");
  const TruncatedGaussian kern(cutoff);
  const double scale = static_cast<double>(n) / static_cast<double>(x.m());
  std::vector<double> v(n, 0.0);
  for (double xi : x.positions) {
    bool first = true;
    double gprev = 0.0;
    long qprev = 0;
    for_each_boundary(xi, n, bandwidth, cutoff, [&](long q, double z) {
      const double g = kern.cdf(z);
      if (!first) v[wrap_index(qprev, n)] += (g - gprev) * scale;
      first = false;
      gprev = g;
      qprev = q;
    });
  }
  return DensityField(std::move(v));
}

std::vector<double> reconstruct_pullback(const QuantileRepr& x, std::size_t n, double bandwidth,
                                         const std::vector<double>& de_df, double cutoff) {
  if (de_df.size() != n) throw InvalidInput("reconstruct_pullback: gradient size differs from n");
  const TruncatedGaussian kern(cutoff);
  const double scale = static_cast<double>(n) / (static_cast<double>(x.m()) * bandwidth);
  std::vector<double> out(x.m(), 0.0);
  for (std::size_t i = 0; i < x.m(); ++i) {
    bool first = true;
    double pprev = 0.0;
    long qprev = 0;
    double acc = 0.0;
    for_each_boundary(x.positions[i], n, bandwidth, cutoff, [&](long q, double z) {
      const double p = kern.pdf(z);
      // d/dX of G((x_q - X)/b) is -g / b.
      if (!first) acc -= de_df[wrap_index(qprev, n)] * (p - pprev) * scale;
      first = false;
      pprev = p;
      qprev = q;
    });
    out[i] = acc;
  }
  return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct Evaluation {
  double phi = 0.0;
  double energy = 0.0;
  std::vector<double> grad;
  DensityField density;
  /// Chemical potential on the grid.
  std::vector<double> mu;
};

class StepObjective {
 public:
  StepObjective(const QuantileRepr& prev, double step, std::size_t n, const JkoConfig& cfg, double eps,
                const PotentialSpec& spec)
      : prev_(prev), step_(step), n_(n), cfg_(cfg), eps_(eps), spec_(spec), bw_(cfg.bandwidth()) {}

  // phi = (1/2) sum (X - Y)^2 + s m E, gradient in length units.
  void evaluate(const QuantileRepr& x, Evaluation& out) const {
    const std::size_t m = x.m();
    out.density = reconstruct_density(x, n_, bw_, cfg_.kernel_cutoff);
    out.energy = energy_eps(out.density, eps_, spec_);
    const double h = out.density.spacing();
    out.mu = chemical_potential(out.density, eps_, spec_);
    auto p = out.mu;
    for (double& v : p) v *= h;
    const auto de = reconstruct_pullback(x, n_, bw_, p, cfg_.kernel_cutoff);
    const double sm = step_ * static_cast<double>(m);
    double transport = 0.0;
    out.grad.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = x.positions[i] - prev_.positions[i];
      transport += d * d;
      out.grad[i] = d + sm * de[i];
    }
    out.phi = 0.5 * transport + sm * out.energy;
  }

  // I + s m (A^T D2E A + diag(sum_j dE/df_j d2f_j/dX_i^2)) with A = df/dX.
  SpMat hessian(const QuantileRepr& x, const Evaluation& ev) const {
    const std::size_t m = x.m();
    const TruncatedGaussian kern(cfg_.kernel_cutoff);
    const double h = 1.0 / static_cast<double>(n_);
    const double scale = static_cast<double>(n_) / (static_cast<double>(m) * bw_);
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> curv(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      bool first = true;
      double gprev = 0.0, dprev = 0.0;
      long qprev = 0;
      for_each_boundary(x.positions[i], n_, bw_, cfg_.kernel_cutoff, [&](long q, double z) {
        const double g = kern.pdf(z);
        const double dg = -z * g;
        if (!first) {
          const std::size_t j = wrap_index(qprev, n_);
          trip.emplace_back(static_cast<int>(j), static_cast<int>(i), -scale * (g - gprev));
          curv[i] += h * ev.mu[j] * scale / bw_ * (dg - dprev);
        }
        first = false;
        gprev = g;
        dprev = dg;
        qprev = q;
      });
    }
    SpMat a(static_cast<int>(n_), static_cast<int>(m));
    a.setFromTriplets(trip.begin(), trip.end());

    trip.clear();
    const double c = eps_ * eps_ / h;
    for (std::size_t j = 0; j < n_; ++j) {
      const int jj = static_cast<int>(j);
      trip.emplace_back(jj, jj, h * spec_.eval_w2(ev.density[j]) + 2.0 * c);
      trip.emplace_back(jj, static_cast<int>((j + 1) % n_), -c);
      trip.emplace_back(jj, static_cast<int>((j + n_ - 1) % n_), -c);
    }
    SpMat he(static_cast<int>(n_), static_cast<int>(n_));
    he.setFromTriplets(trip.begin(), trip.end());

    const double sm = step_ * static_cast<double>(m);
    SpMat hx = SpMat(a.transpose()) * (he * a);
    hx *= sm;
    SpMat id(static_cast<int>(m), static_cast<int>(m));
    trip.clear();
    for (std::size_t i = 0; i < m; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0 + sm * curv[i]);
    id.setFromTriplets(trip.begin(), trip.end());
    return hx + id;
  }

  double to_objective(double phi) const { return 2.0 * phi / static_cast<double>(prev_.m()); }

 private:
  const QuantileRepr& prev_;
  double step_;
  std::size_t n_;
  const JkoConfig& cfg_;
  double eps_;
  const PotentialSpec& spec_;
  double bw_;
};

std::size_t project(QuantileRepr& x, double sep) {
  std::size_t hits = 0;
  auto& p = x.positions;
  if (!std::is_sorted(p.begin(), p.end())) {
    std::sort(p.begin(), p.end());
    ++hits;
  }
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] < p[i - 1] + sep) {
      p[i] = p[i - 1] + sep;
      ++hits;
    }
  }
  if (p.back() - p.front() > 1.0 - sep) ++hits;
  return hits;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

}  // namespace

JkoStepResult jko_minimize(const QuantileRepr& prev, double step, std::size_t n, const JkoConfig& cfg, double eps,
                           const PotentialSpec& spec) {
  cfg.validate();
  if (!(step > 0.0)) throw InvalidInput("jko step must be positive");
  if (prev.m() < 2) throw InvalidInput("jko needs particles");
  const std::size_t m = prev.m();
  StepObjective obj(prev, step, n, cfg, eps, spec);

  QuantileRepr x = prev;
  Evaluation cur, trial;
  obj.evaluate(x, cur);
  JkoStepResult res;
  res.initial_objective = obj.to_objective(cur.phi);
  res.initial_energy = cur.energy;

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  auto reset_memory = [&]() {
    s_hist.clear();
    y_hist.clear();
    rho_hist.clear();
  };
  std::vector<double> dir(m), q(m), alpha_buf;
  QuantileRepr xt;
  Eigen::SimplicialLDLT<SpMat> ldlt;

  // Projected backtracking along dir; on success xt/trial hold the new point.
  auto line_search = [&]() {
    double a = 1.0;
    for (int ls = 0; ls < 50; ++ls) {
      xt = x;
      for (std::size_t i = 0; i < m; ++i) xt.positions[i] += a * dir[i];
      const std::size_t hits = project(xt, cfg.min_separation);
      obj.evaluate(xt, trial);
      double decrease = 0.0;
      for (std::size_t i = 0; i < m; ++i) decrease += cur.grad[i] * (xt.positions[i] - x.positions[i]);
      if (!std::isfinite(trial.phi)) {
        a *= 0.5;
        continue;
      }
      // Below the rounding level of phi the Armijo test is noise; fall back
      // to requiring a smaller gradient.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(cur.phi));
      const bool armijo = trial.phi <= cur.phi + 1e-4 * decrease;
      const bool flat = -decrease <= noise && trial.phi <= cur.phi + noise && max_abs(trial.grad) < max_abs(cur.grad);
      if (armijo || flat) {
        res.separation_hits += hits;
        return true;
      }
      a *= 0.5;
    }
    return false;
  };

  auto newton_direction = [&]() {
    const SpMat hess = obj.hessian(x, cur);
    const Eigen::Map<const Eigen::VectorXd> g(cur.grad.data(), static_cast<Eigen::Index>(m));
    double shift = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
      SpMat hs = hess;
      if (shift > 0.0) {
        for (Eigen::Index i = 0; i < hs.rows(); ++i) hs.coeffRef(i, i) += shift;
      }
      ldlt.compute(hs);
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        const Eigen::VectorXd d = ldlt.solve(-g);
        if (ldlt.info() == Eigen::Success && d.allFinite()) {
          for (std::size_t i = 0; i < m; ++i) dir[i] = d[static_cast<Eigen::Index>(i)];
          if (dot(dir, cur.grad) < 0.0) return;
        }
      }
      shift = shift > 0.0 ? 4.0 * shift : 1e-6;
    }
    for (std::size_t i = 0; i < m; ++i) dir[i] = -cur.grad[i];
  };

  auto lbfgs_direction = [&]() {
    // Two-loop recursion.
    q = cur.grad;
    const std::size_t k = s_hist.size();
    alpha_buf.assign(k, 0.0);
    for (std::size_t j = k; j-- > 0;) {
      alpha_buf[j] = rho_hist[j] * dot(s_hist[j], q);
      for (std::size_t i = 0; i < m; ++i) q[i] -= alpha_buf[j] * y_hist[j][i];
    }
    double gamma = 1.0;
    if (k > 0) gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (std::size_t i = 0; i < m; ++i) q[i] *= gamma;
    for (std::size_t j = 0; j < k; ++j) {
      const double beta = rho_hist[j] * dot(y_hist[j], q);
      for (std::size_t i = 0; i < m; ++i) q[i] += (alpha_buf[j] - beta) * s_hist[j][i];
    }
    for (std::size_t i = 0; i < m; ++i) dir[i] = -q[i];
    if (dot(dir, cur.grad) >= 0.0) {
      for (std::size_t i = 0; i < m; ++i) dir[i] = -cur.grad[i];
      reset_memory();
    }
  };

  const bool newton = cfg.inner_solver == JkoInnerSolver::Newton;
  int it = 0;
  double resid = max_abs(cur.grad);
  bool stalled = false;
  for (; it < cfg.inner_max && resid >= cfg.inner_tol; ++it) {
    if (newton) {
      newton_direction();
    } else {
      lbfgs_direction();
    }
    if (!line_search()) {
      if (!newton && !s_hist.empty()) {
        reset_memory();
        continue;
      }
      stalled = true;
      break;
    }
    if (!newton) {
      std::vector<double> s(m), y(m);
      for (std::size_t i = 0; i < m; ++i) {
        s[i] = xt.positions[i] - x.positions[i];
        y[i] = trial.grad[i] - cur.grad[i];
      }
      const double sy = dot(s, y);
      if (sy > 1e-16 * std::sqrt(dot(s, s) * dot(y, y))) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        rho_hist.push_back(1.0 / sy);
        if (static_cast<int>(s_hist.size()) > cfg.lbfgs_memory) {
          s_hist.pop_front();
          y_hist.pop_front();
          rho_hist.pop_front();
        }
      }
    }
    std::swap(x, xt);
    std::swap(cur, trial);
    resid = max_abs(cur.grad);
  }

  res.particles = x;
  res.density = cur.density;
  res.objective = obj.to_objective(cur.phi);
  res.energy = cur.energy;
  double cost = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = x.positions[i] - prev.positions[i];
    cost += d * d;
  }
  res.transport_cost = cost / static_cast<double>(m);
  res.iterations = it;
  res.residual = resid;
  res.converged = resid < cfg.inner_tol;
  if (!res.converged) {
    std::ostringstream os;
    os << "jko inner solver " << (stalled ? "stalled" : "hit inner_max") << " after " << it
       << " iterations with residual " << resid << " (tol " << cfg.inner_tol << ")";
    throw JkoConvergenceFailure(os.str(), std::move(res));
  }
  return res;
}

DensityField jko_step(const DensityField& f, const JkoConfig& cfg, double eps, const PotentialSpec& spec) {
  f.validate(1e-10);
  const std::size_t n = cfg.n ? cfg.n : f.size();
  return jko_minimize(to_quantiles(f, cfg.m), cfg.tau, n, cfg, eps, spec).density;
}

DensityField de_giorgi_interpolant(const DensityField& f_prev, double s, const JkoConfig& cfg, double eps,
                                   const PotentialSpec& spec) {
  if (!(s > 0.0 && s <= cfg.tau)) throw InvalidInput("interpolation step must lie in (0, tau]");
  f_prev.validate(1e-10);
  const std::size_t n = cfg.n ? cfg.n : f_prev.size();
  return jko_minimize(to_quantiles(f_prev, cfg.m), s, n, cfg, eps, spec).density;
}

JkoRun simulate_jko(const DensityField& f0, const JkoConfig& cfg, double eps, const PotentialSpec& spec,
                    double t_end) {
  cfg.validate();
  f0.validate(1e-10);
  if (!(t_end > 0.0)) throw InvalidInput("simulate_jko needs t_end > 0");
  const std::size_t n = cfg.n ? cfg.n : f0.size();
  const auto env = compute_convex_envelope(spec);
  JkoRun run;
  run.trajectory.flow = "jko";
  QuantileRepr x = to_quantiles(f0, cfg.m);
  DensityField f = reconstruct_density(x, n, cfg.bandwidth(), cfg.kernel_cutoff);
  run.trajectory.append(0.0, f, energy_report(f, eps, spec, env));
  const double e0 = energy_eps(f, eps, spec);

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / cfg.tau - 1e-9));
  double t = 0.0;
  double dissipated = 0.0;
  double slope_term = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double tau_k = std::min(cfg.tau, t_end - t);
    const double shift = std::floor(x.positions.front());
    for (double& v : x.positions) v -= shift;
    auto res = jko_minimize(x, tau_k, n, cfg, eps, spec);
    if (res.separation_hits > 0) {
      run.trajectory.log(t + tau_k, "separation-floor", std::to_string(res.separation_hits) + " projection hits");
    }
    t = k == steps ? t_end : t + tau_k;
    x = res.particles;
    dissipated += res.transport_cost / (2.0 * tau_k);
    const auto rep = energy_report(res.density, eps, spec, env);
    slope_term += 0.5 * tau_k * rep.slope_eps * rep.slope_eps;
    JkoLedgerRow row;
    row.step = k;
    row.t = t;
    row.d2_increment = std::sqrt(res.transport_cost);
    row.energy = res.energy;
    row.slack = e0 - res.energy - dissipated;
    row.slack_with_slope = row.slack - slope_term;
    row.iterations = res.iterations;
    row.residual = res.residual;
    run.ledger.push_back(row);
    run.trajectory.append(t, res.density, rep);
    run.trajectory.speeds.back() = row.d2_increment / tau_k;
  }
  run.final_particles = x;
  return run;
}

void write_ledger_csv(const std::vector<JkoLedgerRow>& ledger, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  os << "step,d2_increment,energy,slack,slack_with_slope,t,iterations,residual\n" << std::setprecision(17);
  for (const auto& r : ledger) {
    os << r.step << ',' << r.d2_increment << ',' << r.energy << ',' << r.slack << ',' << r.slack_with_slope << ','
       << r.t << ',' << r.iterations << ',' << r.residual << '\n';
  }
}

}  // namespace dchlab
