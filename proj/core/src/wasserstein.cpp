#include "dchlab/wasserstein.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "dchlab/errors.hpp"
#include "dchlab/trajectory.hpp"

namespace dchlab {

namespace {

void require_density(const DensityField& f, const char* what) {
  try {
    f.validate(1e-10);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(what) + ": " + e.what());
  }
}

// Integral over u in [0, len] of (d(u) - round(d(u)))^2 with d linear from d0
// to d1. Split at half-integer crossings so every piece stays on one branch.
double wrapped_square_integral(double d0, double d1, double len) {
  if (len <= 0.0) return 0.0;
  double lo = std::min(d0, d1);
  const double hi = std::max(d0, d1);
  const double width = hi - lo;
  if (width == 0.0) {
    const double r = d0 - std::nearbyint(d0);
    return r * r * len;
  }
  double total = 0.0;
  while (lo < hi) {
    const double k = std::floor(lo + 0.5);
    const double next = k + 0.5;
    const double top = std::min(next, hi);
    const double r0 = lo - k;
    const double r1 = top - k;
    total += (top - lo) / width * (r0 * r0 + r0 * r1 + r1 * r1) / 3.0;
    lo = top;
  }
  return total * len;
}

}  // namespace

QuantileFunction::QuantileFunction(const DensityField& f) : h_(f.spacing()) {
  const std::size_t n = f.size();
  if (n == 0) throw InvalidInput("quantile function of an empty field");
  cum_.assign(n + 1, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(f[j] >= 0.0) || !std::isfinite(f[j])) throw InvalidInput("quantile function needs finite non-negative values");
    total += f[j];
  }
  if (!(total > 0.0)) throw InvalidInput("quantile function of a zero-mass field");
  values_.resize(n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    values_[j] = f[j] / total;
    acc += values_[j];
    cum_[j + 1] = acc;
  }
  cum_[n] = 1.0;
}

double QuantileFunction::cdf(double x) const {
  const double k = std::floor(x);
  const double r = x - k;
  const std::size_t n = values_.size();
  std::size_t j = static_cast<std::size_t>(r / h_);
  if (j >= n) j = n - 1;
  const double local = std::clamp((r - static_cast<double>(j) * h_) / h_, 0.0, 1.0);
  return k + cum_[j] + values_[j] * local;
}

double QuantileFunction::operator()(double s) const {
  const double k = std::floor(s);
  const double r = s - k;
  const auto it = std::lower_bound(cum_.begin(), cum_.end(), r);
  const std::size_t jb = static_cast<std::size_t>(it - cum_.begin());
  if (jb == 0) return k;
  const std::size_t c = jb - 1;
  const double frac = std::clamp((r - cum_[c]) / values_[c], 0.0, 1.0);
  return k + (static_cast<double>(c) + frac) * h_;
}

QuantileRepr to_quantiles(const DensityField& f, std::size_t m) {
  if (m == 0) throw InvalidInput("to_quantiles needs m > 0");
  const QuantileFunction q(f);
  QuantileRepr out;
  out.positions.resize(m);
  for (std::size_t k = 0; k < m; ++k) out.positions[k] = q((static_cast<double>(k) + 0.5) / static_cast<double>(m));
  return out;
}

DensityField to_density(const QuantileRepr& q, std::size_t n) {
  const std::size_t m = q.m();
  if (m == 0 || n == 0) throw InvalidInput("to_density needs particles and cells");
  const double shift = std::floor(q.positions.front());
  if (q.positions.back() - q.positions.front() >= 1.0) throw InvalidInput("particle span must stay below one period");
  std::vector<double> kx;
  std::vector<double> ks;
  kx.reserve(4 * m);
  ks.reserve(4 * m);
  for (int rep = -2; rep <= 1; ++rep) {
    for (std::size_t k = 0; k < m; ++k) {
      kx.push_back(q.positions[k] - shift + rep);
      ks.push_back((static_cast<double>(k) + 0.5) / static_cast<double>(m) + rep);
    }
  }
  auto cdf = [&](double x) {
    const auto it = std::upper_bound(kx.begin(), kx.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - kx.begin());
    const double x0 = kx[i - 1], x1 = kx[i];
    const double w = x1 > x0 ? (x - x0) / (x1 - x0) : 1.0;
    return ks[i - 1] + w * (ks[i] - ks[i - 1]);
  };
  std::vector<double> v(n);
  const double h = 1.0 / static_cast<double>(n);
  double prev = cdf(0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double next = cdf(static_cast<double>(j + 1) * h);
    v[j] = std::max(0.0, next - prev) / h;
    prev = next;
  }
  return DensityField(std::move(v));
}

namespace {

class OffsetObjective {
 public:
  OffsetObjective(const DensityField& mu, const DensityField& nu, std::size_t m) : qmu_(mu), qnu_(nu), m_(m) {
    if (m_ > 0) {
      xs_.resize(m_);
      for (std::size_t k = 0; k < m_; ++k) xs_[k] = qmu_(level(k));
    } else {
      mu_cuts_ = cuts(mu);
      nu_cuts_ = cuts(nu);
    }
  }

  double operator()(double theta) {
    ++evaluations;
    return m_ > 0 ? midpoint(theta) : exact(theta);
  }

  std::size_t evaluations = 0;

 private:
  double level(std::size_t k) const { return (static_cast<double>(k) + 0.5) / static_cast<double>(m_); }

  static std::vector<double> cuts(const DensityField& f) {
    std::vector<double> c;
    double total = 0.0;
    for (double v : f.values()) total += v;
    double acc = 0.0;
    for (double v : f.values()) {
      acc += v / total;
      if (acc < 1.0) c.push_back(acc);
    }
    return c;
  }

  double midpoint(double theta) const {
    double s = 0.0;
    for (std::size_t k = 0; k < m_; ++k) {
      const double d = dist_torus(xs_[k], qnu_(level(k) + theta));
      s += d * d;
    }
    return s / static_cast<double>(m_);
  }

  double exact(double theta) {
    theta -= std::floor(theta);
    breaks_.clear();
    breaks_.push_back(0.0);
    breaks_.push_back(1.0);
    breaks_.insert(breaks_.end(), mu_cuts_.begin(), mu_cuts_.end());
    for (double c : nu_cuts_) {
      double b = c - theta;
      if (b < 0.0) b += 1.0;
      breaks_.push_back(b);
    }
    breaks_.push_back(1.0 - theta);
    std::sort(breaks_.begin(), breaks_.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
      const double s0 = breaks_[i];
      const double s1 = breaks_[i + 1];
      const double len = s1 - s0;
      if (!(len > 0.0) || s0 >= 1.0) continue;
      // Both quantiles are affine inside the piece; sample away from the
      // ends to avoid the jumps that vacuum produces at the cuts.
      const double sa = s0 + 0.25 * len;
      const double sb = s0 + 0.75 * len;
      const double da = qmu_(sa) - qnu_(sa + theta);
      const double db = qmu_(sb) - qnu_(sb + theta);
      const double slope = (db - da) / (0.5 * len);
      const double d0 = da - 0.25 * len * slope;
      const double d1 = db + 0.25 * len * slope;
      total += wrapped_square_integral(d0, d1, len);
    }
    return total;
  }

  QuantileFunction qmu_;
  QuantileFunction qnu_;
  std::size_t m_;
  std::vector<double> xs_;
  std::vector<double> mu_cuts_;
  std::vector<double> nu_cuts_;
  std::vector<double> breaks_;
};

W2Detail minimise_offset(OffsetObjective& obj) {
  constexpr int kScan = 64;
  constexpr double kGolden = 0.6180339887498949;
  std::array<std::pair<double, double>, kScan> scan{};
  for (int i = 0; i < kScan; ++i) {
    const double th = static_cast<double>(i) / kScan;
    scan[i] = {obj(th), th};
  }
  std::partial_sort(scan.begin(), scan.begin() + 3, scan.end());
  double best_val = scan[0].first;
  double best_th = scan[0].second;
  for (int r = 0; r < 3; ++r) {
    double a = scan[r].second - 1.0 / kScan;
    double b = scan[r].second + 1.0 / kScan;
    double c = b - kGolden * (b - a);
    double d = a + kGolden * (b - a);
    double fc = obj(c), fd = obj(d);
    while (b - a > 1e-12) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kGolden * (b - a);
        fc = obj(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kGolden * (b - a);
        fd = obj(d);
      }
    }
    const double th = fc < fd ? c : d;
    const double val = std::min(fc, fd);
    if (val < best_val) {
      best_val = val;
      best_th = th;
    }
  }
  // Parabolic polish through three close points.
  const double step = 1e-7;
  const double fl = obj(best_th - step);
  const double fr = obj(best_th + step);
  const double denom = fl - 2.0 * best_val + fr;
  if (denom > 0.0) {
    const double th = best_th + 0.5 * step * (fl - fr) / denom;
    const double val = obj(th);
    if (val < best_val) {
      best_val = val;
      best_th = th;
    }
  }
  W2Detail out;
  out.distance = std::sqrt(std::max(0.0, best_val));
  out.theta = best_th - std::floor(best_th);
  out.evaluations = obj.evaluations;
  return out;
}

}  // namespace

W2Detail w2_periodic_detail(const DensityField& mu, const DensityField& nu, std::size_t m) {
  require_density(mu, "w2_periodic");
  require_density(nu, "w2_periodic");
  OffsetObjective obj(mu, nu, m);
  return minimise_offset(obj);
}

double w2_periodic(const DensityField& mu, const DensityField& nu, std::size_t m) {
  return w2_periodic_detail(mu, nu, m).distance;
}

double w2_offset_objective(const DensityField& mu, const DensityField& nu, double theta, std::size_t m) {
  require_density(mu, "w2_offset_objective");
  require_density(nu, "w2_offset_objective");
  OffsetObjective obj(mu, nu, m);
  return obj(theta);
}

double w2_particles(const QuantileRepr& a, const QuantileRepr& b) {
  const std::size_t m = a.m();
  if (m == 0 || b.m() != m) throw InvalidInput("w2_particles needs two non-empty sets of equal size");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < m; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < m && s < best * static_cast<double>(m); ++i) {
      const double d = dist_torus(a.positions[i], b.positions[(i + c) % m]);
      s += d * d;
    }
    best = std::min(best, s / static_cast<double>(m));
  }
  return std::sqrt(best);
}

DensityField geodesic(const DensityField& mu, const DensityField& nu, double t, std::size_t m) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("geodesic parameter must lie in [0, 1]");
  require_density(mu, "geodesic");
  require_density(nu, "geodesic");
  if (t == 0.0) return mu;
  if (t == 1.0) return nu;
  if (m == 0) m = 4 * std::max(mu.size(), nu.size());
  const auto det = w2_periodic_detail(mu, nu);
  const QuantileFunction qmu(mu);
  const QuantileFunction qnu(nu);
  std::vector<double> x(m), y(m);
  double mean = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double s = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    x[k] = qmu(s);
    y[k] = qnu(s + det.theta);
    mean += x[k] - y[k];
  }
  const double lift = std::nearbyint(mean / static_cast<double>(m));
  QuantileRepr z;
  z.positions.resize(m);
  for (std::size_t k = 0; k < m; ++k) z.positions[k] = (1.0 - t) * x[k] + t * (y[k] + lift);
  return to_density(z, mu.size());
}

DensityField translate(const DensityField& f, double s) {
  const QuantileFunction q(f);
  const std::size_t n = f.size();
  const double h = f.spacing();
  double total = 0.0;
  for (double v : f.values()) total += v;
  const double scale = total * h;
  std::vector<double> v(n);
  double prev = q.cdf(-s);
  for (std::size_t j = 0; j < n; ++j) {
    const double next = q.cdf(static_cast<double>(j + 1) * h - s);
    v[j] = std::max(0.0, next - prev) * scale / h;
    prev = next;
  }
  return DensityField(std::move(v));
}

double metric_speed(const TrajectoryRecord& traj, std::size_t k, std::size_t m) {
  if (traj.snapshots.size() < 2) throw InvalidInput("metric_speed needs at least two snapshots");
  if (k + 1 >= traj.snapshots.size()) throw InvalidInput("metric_speed index out of range");
  const double dt = traj.times[k + 1] - traj.times[k];
  if (!(dt > 0.0)) throw InvalidInput("metric_speed needs increasing times");
  return w2_periodic(traj.snapshots[k], traj.snapshots[k + 1], m) / dt;
}

}  // namespace dchlab
