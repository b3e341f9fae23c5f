#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmcd {

inline constexpr double kPi = 3.14159265358979323846;

// Neumaier-compensated accumulator. Reconstruction and mass-conservation
// identities are asserted at the 1e-14 level, which plain left-to-right
// summation does not reliably reach on longer inputs.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double neumaier_sum(const std::vector<double>& xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

// Deterministic uniform draw in [0,1). std::uniform_real_distribution is not
// bit-stable across standard libraries; this is.
inline double uniform01(std::uint64_t raw) {
  return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

template <class Rng>
double uniform01(Rng& rng) {
  return uniform01(static_cast<std::uint64_t>(rng()));
}

template <class Rng>
double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace mmcd
