#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dchlab {

/// Cell averages of a density on the uniform periodic grid of [0, 1).
///
/// Cell j covers [j h, (j + 1) h) with h = 1 / n. Construction does not
/// validate; solvers build intermediate fields that may transiently violate
/// non-negativity. Call validate() at API boundaries.
class DensityField {
 public:
  DensityField() = default;
  explicit DensityField(std::vector<double> values);

  static DensityField uniform(std::size_t n);

  /// Samples fn at cell centres and rescales to unit mass.
  static DensityField from_function(std::size_t n, const std::function<double(double)>& fn);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double spacing() const { return 1.0 / static_cast<double>(values_.size()); }
  double cell_center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * spacing(); }

  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  double& operator[](std::size_t j) { return values_[j]; }

  /// Periodic access; any integer index is folded into [0, n).
  double at(long j) const;

  double mass() const;
  double min() const;
  double max() const;

  /// True when values are finite, non-negative and carry unit mass within
  /// mass_tol.
  bool is_valid(double mass_tol = 1e-12) const;

  /// Throws InvalidInput describing the first failed condition.
  void validate(double mass_tol = 1e-12) const;

  /// Multiplies by a constant so that mass() == 1. Throws on zero mass.
  void normalize();

 private:
  std::vector<double> values_;
};

/// Folds an integer index onto the periodic grid.
inline std::size_t wrap_index(long j, std::size_t n) {
  const long nn = static_cast<long>(n);
  long r = j % nn;
  if (r < 0) r += nn;
  return static_cast<std::size_t>(r);
}

/// L1 distance of two fields on the same grid.
double l1_distance(const DensityField& a, const DensityField& b);

/// Largest absolute cell difference of two fields on the same grid.
double linf_distance(const DensityField& a, const DensityField& b);

}  // namespace dchlab
