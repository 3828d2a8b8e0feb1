#pragma once

#include "nic/tensor.hpp"

namespace nic {

// Round one double to the nearest IEEE 754 binary16 value (1 sign, 5
// exponent, 10 mantissa bits), ties to even, and return it widened back to
// double. Values beyond the largest finite half saturate to +-65504 instead
// of overflowing to infinity. Emulated in exact power-of-two arithmetic so
// results are identical on every platform; throws NumericError on NaN/Inf.
double round_to_half(double x);

// Elementwise round_to_half; output tagged Precision::F16Emulated.
Tensor truncate_f16(const Tensor& t);

}  // namespace nic
