#include "nic/half.hpp"

#include <cmath>

#include "nic/errors.hpp"

namespace nic {

namespace {
constexpr double kHalfMax = 65504.0;            // (2 - 2^-10) * 2^15
constexpr double kHalfMinNormal = 6.103515625e-05;  // 2^-14
constexpr double kSubnormScale = 16777216.0;    // 2^24: subnormal quantum is 2^-24
}  // namespace

double round_to_half(double x) {
  if (!std::isfinite(x)) throw NumericError("round_to_half: non-finite input");
  if (x == 0.0) return x;
  const double ax = std::fabs(x);
  const double sign = x < 0.0 ? -1.0 : 1.0;

  if (ax < kHalfMinNormal) {
    // Subnormal grid: multiples of 2^-24. The scale is a power of two, so
    // the product is exact and nearbyint supplies the ties-to-even rounding.
    const double q = std::nearbyint(ax * kSubnormScale);
    return sign * (q / kSubnormScale);
  }

  int k = 0;
  std::frexp(ax, &k);       // ax = f * 2^k, f in [0.5, 1)
  const int e = k - 1;      // ax in [2^e, 2^(e+1))
  // Scale the 10-bit mantissa window onto integers: m in [1024, 2048).
  const double m = std::nearbyint(std::ldexp(ax, 10 - e));
  double r = std::ldexp(m, e - 10);  // m == 2048 lands on 2^(e+1), still exact
  if (r > kHalfMax) r = kHalfMax;
  return sign * r;
}

Tensor truncate_f16(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data) v = round_to_half(v);
  out.prec = Precision::F16Emulated;
  return out;
}

}  // namespace nic
