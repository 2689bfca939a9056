#include "dchlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dchlab/errors.hpp"

namespace dchlab {

namespace {

double horner(const std::vector<double>& c, double y) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * y + *it;
  return acc;
}

std::vector<double> derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  return d;
}

}  // namespace

double PotentialSpec::eval_w(double y) const {
  if (y < 0.0) {
    const double w0 = w(0.0), d1 = w1(0.0), d2 = w2(0.0);
    return w0 + d1 * y + 0.5 * d2 * y * y;
  }
  if (y > domain_max) {
    const double m = domain_max;
    const double dy = y - m;
    return w(m) + w1(m) * dy + 0.5 * w2(m) * dy * dy;
  }
  return w(y);
}

double PotentialSpec::eval_w1(double y) const {
  if (y < 0.0) return w1(0.0) + w2(0.0) * y;
  if (y > domain_max) return w1(domain_max) + w2(domain_max) * (y - domain_max);
  return w1(y);
}

double PotentialSpec::eval_w2(double y) const {
  if (y < 0.0) return w2(0.0);
  if (y > domain_max) return w2(domain_max);
  return w2(y);
}

PotentialSpec PotentialSpec::with_domain_max(double new_max) const {
  if (!(new_max > 0.0)) throw InvalidInput("domain_max must be positive");
  PotentialSpec out = *this;
  out.domain_max = new_max;
  return out;
}

PotentialSpec PotentialSpec::polynomial(std::string name, std::vector<double> coefficients, double domain_max) {
  if (!(domain_max > 0.0)) throw InvalidInput("domain_max must be positive");
  for (double c : coefficients) {
    if (!std::isfinite(c)) throw InvalidInput("polynomial coefficients must be finite");
  }
  // Drop the affine part; the dynamics do not see it.
  if (coefficients.size() > 0) coefficients[0] = 0.0;
  if (coefficients.size() > 1) coefficients[1] = 0.0;
  const auto c0 = coefficients;
  const auto c1 = derivative(c0);
  const auto c2 = derivative(c1);
  PotentialSpec spec;
  spec.name = std::move(name);
  spec.w = [c0](double y) { return horner(c0, y); };
  spec.w1 = [c1](double y) { return horner(c1, y); };
  spec.w2 = [c2](double y) { return horner(c2, y); };
  spec.domain_max = domain_max;
  spec.coefficients = c0;
  return spec;
}

PotentialSpec PotentialSpec::from_functions(std::string name, ScalarFn w, ScalarFn w1, ScalarFn w2,
                                            double domain_max) {
  if (!(domain_max > 0.0)) throw InvalidInput("domain_max must be positive");
  if (!w || !w1 || !w2) throw InvalidInput("potential evaluators must be callable");
  const double w0 = w(0.0);
  const double d0 = w1(0.0);
  PotentialSpec spec;
  spec.name = std::move(name);
  spec.w = [w, w0, d0](double y) { return w(y) - w0 - d0 * y; };
  spec.w1 = [w1, d0](double y) { return w1(y) - d0; };
  spec.w2 = std::move(w2);
  spec.domain_max = domain_max;
  return spec;
}

std::vector<std::string> builtin_potential_names() {
  return {"cubic-motivation", "quartic-spinodal", "quartic-wrinkle", "quartic-convex", "zero"};
}

PotentialSpec PotentialSpec::builtin(const std::string& name) {
  // W'' = (y - 2)(y - 3) and W'' = (y - 0.5)(y - 1.5) integrated twice with
  // W(0) = W'(0) = 0.
  if (name == "cubic-motivation") return polynomial(name, {0.0, 0.0, -0.5, 1.0 / 6.0}, 6.0);
  if (name == "quartic-spinodal") return polynomial(name, {0.0, 0.0, 3.0, -5.0 / 6.0, 1.0 / 12.0}, 8.0);
  if (name == "quartic-wrinkle") return polynomial(name, {0.0, 0.0, 0.375, -1.0 / 3.0, 1.0 / 12.0}, 4.0);
  if (name == "quartic-convex") return polynomial(name, {0.0, 0.0, 0.0, 0.0, 1.0}, 4.0);
  if (name == "zero") return polynomial(name, {}, 4.0);
  throw InvalidInput("unknown potential '" + name + "'");
}

double eval_q1(const PotentialSpec& spec, double y) {
  if (!spec.in_domain(y)) {
    std::ostringstream os;
    os << "eval_q1: y = " << y << " outside [0, " << spec.domain_max << "]";
    throw DomainError(os.str());
  }
  return y * spec.w1(y) - spec.w(y);
}

// ---------------------------------------------------------------------------
// Convex envelope

ConvexEnvelope::ConvexEnvelope(PotentialSpec spec, std::vector<AffinePiece> pieces, std::size_t n_samples)
    : spec_(std::move(spec)), pieces_(std::move(pieces)), n_samples_(n_samples) {}

std::vector<double> ConvexEnvelope::breakpoints() const {
  std::vector<double> out;
  for (const auto& p : pieces_) {
    out.push_back(p.a);
    out.push_back(p.b);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::size_t> ConvexEnvelope::piece_index(double y) const {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (y >= p.a && y <= p.b) return i;
    // Lines that start at the left boundary continue below zero.
    if (i == 0 && p.a == 0.0 && y < 0.0) return i;
  }
  return std::nullopt;
}

double ConvexEnvelope::eval_wss(double y) const {
  if (auto i = piece_index(y)) {
    const auto& p = pieces_[*i];
    return p.value_at_a + p.slope * (y - p.a);
  }
  return spec_.eval_w(y);
}

double ConvexEnvelope::eval_wss1(double y) const {
  if (auto i = piece_index(y)) return pieces_[*i].slope;
  return spec_.eval_w1(y);
}

double ConvexEnvelope::eval_wss2(double y) const {
  if (piece_index(y)) return 0.0;
  return spec_.eval_w2(y);
}

double ConvexEnvelope::eval_qss1(double y) const { return y * eval_wss1(y) - eval_wss(y); }

double ConvexEnvelope::eval_qss2(double y) const { return y * eval_wss2(y); }

namespace {

// Root of g on [lo, hi] by bisection; g(lo) and g(hi) must differ in sign.
template <class G>
double bisect(G&& g, double lo, double hi, double tol) {
  double glo = g(lo);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm <= 0.0) == (glo <= 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Point t near guess where the line through (p, W(p)) is tangent to W.
// Searches on the side of p that contains guess. Returns guess when no
// sign change can be bracketed.
double tangent_from(const PotentialSpec& spec, double p, double guess, double step, double tol) {
  const double wp = spec.eval_w(p);
  auto g = [&](double t) { return spec.eval_w1(t) * (t - p) - (spec.eval_w(t) - wp); };
  const bool right = guess > p;
  const double inner = right ? p + 1e-3 * step : p - 1e-3 * step;
  double lo = right ? std::max(guess - 2.0 * step, inner) : std::max(guess - 2.0 * step, 0.0);
  double hi = right ? std::min(guess + 2.0 * step, spec.domain_max) : std::min(guess + 2.0 * step, inner);
  for (int expand = 0; expand < 64 && (g(lo) > 0.0) == (g(hi) > 0.0); ++expand) {
    lo = right ? std::max(lo - step, inner) : std::max(lo - step, 0.0);
    hi = right ? std::min(hi + step, spec.domain_max) : std::min(hi + step, inner);
  }
  if ((g(lo) > 0.0) == (g(hi) > 0.0)) return guess;
  return bisect(g, lo, hi, tol);
}

}  // namespace

ConvexEnvelope compute_convex_envelope(const PotentialSpec& spec, std::size_t n_samples,
                                       const EnvelopeOptions& options) {
  if (n_samples < 64) throw InvalidInput("compute_convex_envelope needs at least 64 samples");
  if (!(spec.domain_max > 0.0)) throw InvalidInput("potential has an empty working interval");
  const std::size_t n = n_samples;
  const double big_m = spec.domain_max;
  const double step = big_m / static_cast<double>(n - 1);
  std::vector<double> ys(n), ws(n);
  for (std::size_t i = 0; i < n; ++i) {
    ys[i] = (i + 1 == n) ? big_m : step * static_cast<double>(i);
    ws[i] = spec.eval_w(ys[i]);
    if (!std::isfinite(ws[i])) {
      std::ostringstream os;
      os << "potential '" << spec.name << "' is not finite at y = " << ys[i];
      throw EvaluationError(os.str());
    }
  }

  // Andrew's monotone chain, lower part only.
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const std::size_t o = hull[hull.size() - 2];
      const std::size_t a = hull.back();
      const double cross = (ys[a] - ys[o]) * (ws[i] - ws[o]) - (ws[a] - ws[o]) * (ys[i] - ys[o]);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }

  const auto [wmin_it, wmax_it] = std::minmax_element(ws.begin(), ws.end());
  const double range = std::max(*wmax_it - *wmin_it, std::numeric_limits<double>::min());
  const double contact_tol = options.contact_rel_tol * range;
  const double bisect_tol = std::min(options.refine_tol, 1e-13 * (1.0 + big_m));

  std::vector<AffinePiece> pieces;
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const std::size_t ia = hull[k];
    const std::size_t ib = hull[k + 1];
    if (ib <= ia + 1) continue;
    const double chord = (ws[ib] - ws[ia]) / (ys[ib] - ys[ia]);
    double gap = 0.0;
    for (std::size_t i = ia + 1; i < ib; ++i) gap = std::max(gap, ws[i] - (ws[ia] + chord * (ys[i] - ys[ia])));
    if (gap <= contact_tol) continue;

    const bool left_fixed = ia == 0 && spec.eval_w1(0.0) > chord;
    const bool right_fixed = ib == n - 1 && spec.eval_w1(big_m) < chord;
    double a = ys[ia];
    double b = ys[ib];
    for (int it = 0; it < 100; ++it) {
      const double b_new = right_fixed ? b : tangent_from(spec, a, b, step, bisect_tol);
      const double a_new = left_fixed ? a : tangent_from(spec, b_new, a, step, bisect_tol);
      const double change = std::abs(a_new - a) + std::abs(b_new - b);
      a = a_new;
      b = b_new;
      if (change < options.refine_tol * 1e-2) break;
    }
    AffinePiece piece;
    piece.a = a;
    piece.b = b;
    piece.value_at_a = spec.eval_w(a);
    piece.slope = (spec.eval_w(b) - piece.value_at_a) / (b - a);
    piece.max_gap = gap;
    for (std::size_t i = ia; i <= ib; ++i) {
      if (ys[i] < a || ys[i] > b) continue;
      piece.max_gap = std::max(piece.max_gap, ws[i] - (piece.value_at_a + piece.slope * (ys[i] - a)));
    }
    pieces.push_back(piece);
  }
  return ConvexEnvelope(spec, std::move(pieces), n_samples);
}

PotentialSpec envelope_as_potential(const ConvexEnvelope& env) {
  PotentialSpec out;
  out.name = env.spec().name + "**";
  out.w = [env](double y) { return env.eval_wss(y); };
  out.w1 = [env](double y) { return env.eval_wss1(y); };
  out.w2 = [env](double y) { return env.eval_wss2(y); };
  out.domain_max = env.spec().domain_max;
  return out;
}

// ---------------------------------------------------------------------------
// Unstable set

double Interval::distance(double y) const {
  if (y < lo) return lo - y;
  if (y > hi) return y - hi;
  return 0.0;
}

bool UnstableSet::contains(double y) const {
  return std::any_of(intervals.begin(), intervals.end(), [y](const Interval& iv) { return iv.contains(y); });
}

UnstableSet compute_unstable_set(const PotentialSpec& spec, const ConvexEnvelope& env, std::optional<double> tol,
                                 std::size_t max_intervals) {
  double detect_tol = 0.0;
  if (tol) {
    detect_tol = *tol;
  } else {
    const std::size_t n = std::max<std::size_t>(env.n_samples(), 64);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = spec.eval_w(spec.domain_max * static_cast<double>(i) / static_cast<double>(n - 1));
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    detect_tol = 1e-9 * (hi - lo);
  }

  UnstableSet sigma;
  for (const auto& p : env.pieces()) {
    if (p.max_gap > detect_tol) sigma.intervals.push_back({p.a, p.b});
  }
  if (sigma.intervals.empty() || sigma.intervals.front().lo > 0.0) {
    sigma.intervals.insert(sigma.intervals.begin(), Interval{0.0, 0.0});
    sigma.degenerate_first = true;
  }
  if (sigma.intervals.size() > max_intervals) {
    std::ostringstream os;
    os << "unstable set of '" << spec.name << "' has " << sigma.intervals.size()
       << " components (limit " << max_intervals << ")";
    throw HypothesisViolation(os.str());
  }
  const auto& iv = sigma.intervals;
  sigma.m0 = iv.size() == 1 ? iv[0].hi + 1.0 : 0.5 * (iv[0].hi + iv[1].lo);
  return sigma;
}

double distance_to_sigma(double y, const UnstableSet& sigma) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& iv : sigma.intervals) d = std::min(d, iv.distance(y));
  return d;
}

double default_domain_max(const PotentialSpec& spec, const UnstableSet& sigma, double max_density) {
  return std::max({spec.domain_max, 3.0 * sigma.m0, 2.0 * max_density});
}

// ---------------------------------------------------------------------------
// Hypothesis audit

HypothesisReport validate_hypotheses(const PotentialSpec& spec, const ConvexEnvelope& env, std::size_t n_samples,
                                     double growth_bound) {
  HypothesisReport rep;
  const std::size_t n = std::max<std::size_t>(n_samples, 64);
  const double big_m = spec.domain_max;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = big_m * static_cast<double>(i) / static_cast<double>(n - 1);

  double wmin = std::numeric_limits<double>::infinity();
  bool finite = true;
  for (double y : ys) {
    const double w = spec.eval_w(y);
    const double d1 = spec.eval_w1(y);
    const double q = y * d1 - w;
    if (!std::isfinite(w) || !std::isfinite(d1)) {
      finite = false;
      continue;
    }
    wmin = std::min(wmin, w);
    rep.q1_growth_ratio = std::max(rep.q1_growth_ratio, std::abs(q) / (1.0 + std::abs(w)));
    rep.w1_growth_ratio = std::max(rep.w1_growth_ratio, std::abs(d1) / (1.0 + std::abs(w)));
  }
  if (!finite) rep.violations.push_back("H1: potential or derivative not finite on the working interval");
  if (!(rep.q1_growth_ratio <= growth_bound) || !(rep.w1_growth_ratio <= growth_bound)) {
    std::ostringstream os;
    os << "H1: growth ratios |Q'|/(1+|W|) = " << rep.q1_growth_ratio << ", |W'|/(1+|W|) = " << rep.w1_growth_ratio
       << " exceed " << growth_bound;
    rep.violations.push_back(os.str());
  }

  rep.nonnegative = wmin >= 0.0;
  if (!rep.nonnegative) {
    std::ostringstream os;
    os << "W takes negative values (min " << wmin << "); only W(0) = W'(0) = 0 is enforced";
    rep.notes.push_back(os.str());
  }

  // Coercivity proxy on the tail past the last breakpoint.
  const auto bps = env.breakpoints();
  const double tail_start = bps.empty() ? 0.0 : bps.back();
  double prev_q = -std::numeric_limits<double>::infinity();
  for (double y : ys) {
    if (y < tail_start) continue;
    const double q = y * spec.eval_w1(y) - spec.eval_w(y);
    if (q < prev_q - 1e-12 * (1.0 + std::abs(q))) rep.q1_monotone_tail = false;
    prev_q = q;
  }
  const double q_end = big_m * spec.eval_w1(big_m) - spec.eval_w(big_m);
  if (!rep.q1_monotone_tail || !(q_end > 0.0)) {
    rep.q1_monotone_tail = false;
    rep.violations.push_back("H2 proxy: Q' is not increasing to positive values beyond the last breakpoint");
  }
  rep.notes.push_back("H2 is a limit condition; only the monotone tail on [0, domain_max] is checked");

  // Strict convexity away from the unstable set.
  UnstableSet sigma;
  try {
    sigma = compute_unstable_set(spec, env);
  } catch (const HypothesisViolation& e) {
    rep.violations.push_back(std::string("H3: ") + e.what());
    return rep;
  }
  rep.h4_margin = 1e-3 * big_m;
  rep.min_w2_off_sigma = std::numeric_limits<double>::infinity();
  double worst_y = 0.0;
  double w2_scale = 0.0;
  for (double y : ys) w2_scale = std::max(w2_scale, std::abs(spec.eval_w2(y)));
  for (double y : ys) {
    if (distance_to_sigma(y, sigma) <= rep.h4_margin) continue;
    const double d2 = spec.eval_w2(y);
    if (d2 < rep.min_w2_off_sigma) {
      rep.min_w2_off_sigma = d2;
      worst_y = y;
    }
  }
  // A sampled minimum within rounding of zero is a degenerate point.
  if (!(rep.min_w2_off_sigma > 1e-6 * w2_scale)) {
    std::ostringstream os;
    os << "H4: W'' = " << rep.min_w2_off_sigma << " <= 0 at y = " << worst_y << " outside the unstable set";
    rep.violations.push_back(os.str());
  }
  return rep;
}

}  // namespace dchlab
