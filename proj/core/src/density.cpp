#include "dchlab/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dchlab/errors.hpp"

namespace dchlab {

DensityField::DensityField(std::vector<double> values) : values_(std::move(values)) {}

DensityField DensityField::uniform(std::size_t n) {
  if (n == 0) throw InvalidInput("uniform density needs at least one cell");
  return DensityField(std::vector<double>(n, 1.0));
}

DensityField DensityField::from_function(std::size_t n, const std::function<double(double)>& fn) {
  if (n == 0) throw InvalidInput("density needs at least one cell");
  std::vector<double> v(n);
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = fn((static_cast<double>(j) + 0.5) * h);
  DensityField f(std::move(v));
  f.normalize();
  return f;
}

double DensityField::at(long j) const { return values_[wrap_index(j, values_.size())]; }

double DensityField::mass() const {
  // Pairwise-free Kahan sum: mass drift checks go down to 1e-12.
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values_) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum * spacing();
}

double DensityField::min() const { return *std::min_element(values_.begin(), values_.end()); }

double DensityField::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool DensityField::is_valid(double mass_tol) const {
  if (values_.empty()) return false;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return std::abs(mass() - 1.0) <= mass_tol;
}

void DensityField::validate(double mass_tol) const {
  if (values_.empty()) throw InvalidInput("density field is empty");
  for (std::size_t j = 0; j < values_.size(); ++j) {
    if (!std::isfinite(values_[j])) {
      std::ostringstream os;
      os << "density value at cell " << j << " is not finite";
      throw InvalidInput(os.str());
    }
    if (values_[j] < 0.0) {
      std::ostringstream os;
      os << "density value at cell " << j << " is negative (" << values_[j] << ")";
      throw InvalidInput(os.str());
    }
  }
  const double m = mass();
  if (std::abs(m - 1.0) > mass_tol) {
    std::ostringstream os;
    os.precision(17);
    os << "density mass " << m << " differs from 1";
    throw InvalidInput(os.str());
  }
}

void DensityField::normalize() {
  const double m = mass();
  if (!(m > 0.0) || !std::isfinite(m)) throw InvalidInput("cannot normalise a field with zero or non-finite mass");
  for (double& v : values_) v /= m;
}

double l1_distance(const DensityField& a, const DensityField& b) {
  if (a.size() != b.size()) throw InvalidInput("l1_distance: grid sizes differ");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return s * a.spacing();
}

double linf_distance(const DensityField& a, const DensityField& b) {
  if (a.size() != b.size()) throw InvalidInput("linf_distance: grid sizes differ");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s = std::max(s, std::abs(a[j] - b[j]));
  return s;
}

}  // namespace dchlab
