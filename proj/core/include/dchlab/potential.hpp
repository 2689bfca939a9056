#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dchlab {

using ScalarFn = std::function<double(double)>;

/// A double-well type potential W together with W' and W''.
///
/// The evaluators are trusted on the working interval [0, domain_max].
/// Outside of it eval_w / eval_w1 / eval_w2 continue W by its second order
/// Taylor polynomial at the nearest endpoint, which keeps optimizers and
/// Newton iterations well defined when they step slightly out of range.
struct PotentialSpec {
  std::string name;
  ScalarFn w;
  ScalarFn w1;
  ScalarFn w2;
  double domain_max = 0.0;
  /// Ascending monomial coefficients of W when the potential is polynomial.
  std::vector<double> coefficients;

  double eval_w(double y) const;
  double eval_w1(double y) const;
  double eval_w2(double y) const;

  bool in_domain(double y) const { return y >= 0.0 && y <= domain_max; }

  PotentialSpec with_domain_max(double new_max) const;

  /// Builds a polynomial potential and subtracts the affine part so that
  /// W(0) = W'(0) = 0.
  static PotentialSpec polynomial(std::string name, std::vector<double> coefficients, double domain_max);

  /// Wraps arbitrary evaluators. The normalisation W(0) = W'(0) = 0 is
  /// enforced by subtracting W(0) + W'(0) y.
  static PotentialSpec from_functions(std::string name, ScalarFn w, ScalarFn w1, ScalarFn w2, double domain_max);

  /// One of builtin_potential_names().
  static PotentialSpec builtin(const std::string& name);
};

/// "cubic-motivation", "quartic-spinodal", "quartic-wrinkle",
/// "quartic-convex" and "zero".
std::vector<std::string> builtin_potential_names();

/// Q'(y) = y W'(y) - W(y). Throws DomainError outside [0, domain_max].
double eval_q1(const PotentialSpec& spec, double y);

/// A maximal interval on which the convex envelope is affine.
struct AffinePiece {
  double a = 0.0;
  double b = 0.0;
  double slope = 0.0;
  double value_at_a = 0.0;
  /// Largest W - W** over the piece on the sampling grid.
  double max_gap = 0.0;
};

/// Lower convex envelope W** of a potential on [0, domain_max].
///
/// Off the affine pieces W** coincides with W, so the envelope evaluates
/// the potential itself there.
class ConvexEnvelope {
 public:
  ConvexEnvelope(PotentialSpec spec, std::vector<AffinePiece> pieces, std::size_t n_samples);

  const PotentialSpec& spec() const { return spec_; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  std::size_t n_samples() const { return n_samples_; }

  /// Sorted end points of the affine pieces.
  std::vector<double> breakpoints() const;

  double eval_wss(double y) const;
  double eval_wss1(double y) const;
  /// Second derivative; zero on affine pieces.
  double eval_wss2(double y) const;
  /// Q**'(y) = y W**'(y) - W**(y).
  double eval_qss1(double y) const;
  /// d/dy Q**'(y) = y W**''(y).
  double eval_qss2(double y) const;

  /// Index of the affine piece containing y, if any. Breakpoints belong to
  /// the piece.
  std::optional<std::size_t> piece_index(double y) const;

 private:
  PotentialSpec spec_;
  std::vector<AffinePiece> pieces_;
  std::size_t n_samples_;
};

struct EnvelopeOptions {
  /// Bisection tolerance for tangency points.
  double refine_tol = 1e-10;
  /// Hull edges whose largest gap W - hull is below this fraction of
  /// (max W - min W) are treated as contact.
  double contact_rel_tol = 1e-9;
};

ConvexEnvelope compute_convex_envelope(const PotentialSpec& spec, std::size_t n_samples = 4096,
                                       const EnvelopeOptions& options = {});

/// Treats the envelope itself as a potential (W = W**). Used to check
/// idempotence.
PotentialSpec envelope_as_potential(const ConvexEnvelope& env);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double y) const { return y >= lo && y <= hi; }
  double distance(double y) const;
};

/// The unstable set: closure of {W > W**} together with {0}, written as a
/// sorted union of p disjoint closed intervals.
struct UnstableSet {
  std::vector<Interval> intervals;
  double m0 = 0.0;
  /// The first interval is the single point {0}.
  bool degenerate_first = false;

  std::size_t count() const { return intervals.size(); }
  bool contains(double y) const;
};

/// tol defaults to 1e-9 (max W - min W) on the envelope sampling grid.
UnstableSet compute_unstable_set(const PotentialSpec& spec, const ConvexEnvelope& env,
                                 std::optional<double> tol = std::nullopt, std::size_t max_intervals = 16);

/// Euclidean distance from y to the union of intervals; zero inside.
double distance_to_sigma(double y, const UnstableSet& sigma);

/// Default working interval: the largest of the potential's own domain_max,
/// 3 m0 and twice the largest density expected in a run.
double default_domain_max(const PotentialSpec& spec, const UnstableSet& sigma, double max_density);

struct HypothesisReport {
  /// Largest |Q'| / (1 + |W|) and |W'| / (1 + |W|) on the sampling grid.
  double q1_growth_ratio = 0.0;
  double w1_growth_ratio = 0.0;
  /// Q' non-decreasing and ending positive beyond the last breakpoint.
  bool q1_monotone_tail = true;
  /// Smallest W'' on points at distance > h4_margin from the unstable set.
  double min_w2_off_sigma = 0.0;
  double h4_margin = 0.0;
  bool nonnegative = true;
  std::vector<std::string> violations;
  std::vector<std::string> notes;

  bool clean() const { return violations.empty(); }
};

/// Numeric audit of the growth, coercivity and convexity assumptions on
/// [0, domain_max]. Never throws for a well-formed spec.
HypothesisReport validate_hypotheses(const PotentialSpec& spec, const ConvexEnvelope& env,
                                     std::size_t n_samples = 2048, double growth_bound = 1e6);

}  // namespace dchlab
