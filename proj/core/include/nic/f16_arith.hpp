#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>

#include "nic/half.hpp"

namespace nic {

// Fast value rounding for the emulated half-precision ARITHMETIC path: the
// operand goes through f32 first and then to the nearest half (RNE), which is
// exactly what an f16 engine fed by f32 casts does. Values past the largest
// finite half saturate to +-65504 like the value-level truncate_f16.
inline double f16_arith_round(double d) {
  const float f = static_cast<float>(d);
  std::uint32_t x;
  std::memcpy(&x, &f, 4);
  const std::uint32_t sign = x & 0x80000000u;
  std::uint32_t mag = x & 0x7FFFFFFFu;
  float out;
  if (mag >= 0x477FF000u) {  // would round past 65504
    out = 65504.0f;
  } else if (mag >= 0x38800000u) {  // normal half range
    mag = (mag + 0xFFFu + ((mag >> 13) & 1u)) & ~0x1FFFu;
    std::memcpy(&out, &mag, 4);
  } else if (mag >= 0x33000000u) {  // subnormal half: snap to multiples of 2^-24
    float av;
    std::memcpy(&av, &mag, 4);
    out = std::nearbyintf(av * 16777216.0f) / 16777216.0f;
  } else {
    out = 0.0f;
  }
  std::uint32_t bits;
  std::memcpy(&bits, &out, 4);
  bits |= sign;
  std::memcpy(&out, &bits, 4);
  return static_cast<double>(out);
}

// Arithmetic type for kernels instantiated at emulated half precision: every
// operation rounds its result to the f16 grid, so accumulation error grows
// with chain length the way a real half-precision engine's would.
struct F16 {
  double v = 0.0;

  F16() = default;
  explicit F16(double d) : v(f16_arith_round(d)) {}
  explicit F16(int i) : v(f16_arith_round(static_cast<double>(i))) {}
  explicit operator double() const { return v; }

  friend F16 operator+(F16 a, F16 b) { return F16(a.v + b.v); }
  friend F16 operator-(F16 a, F16 b) { return F16(a.v - b.v); }
  friend F16 operator*(F16 a, F16 b) { return F16(a.v * b.v); }
  friend F16 operator/(F16 a, F16 b) { return F16(a.v / b.v); }
  F16& operator+=(F16 o) {
    v = f16_arith_round(v + o.v);
    return *this;
  }
  friend bool operator>(F16 a, F16 b) { return a.v > b.v; }
  friend bool operator<(F16 a, F16 b) { return a.v < b.v; }
};

inline F16 sqrt(F16 a) { return F16(std::sqrt(a.v)); }

}  // namespace nic
