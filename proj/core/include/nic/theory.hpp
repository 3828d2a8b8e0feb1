#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nic/codec.hpp"
#include "nic/special.hpp"
#include "nic/tensor.hpp"

namespace nic {

// Thresholded compression model over a standard-normal source: components
// with |z| <= gamma are discarded, the rest are kept bit-exactly.

// R = 1 / (2 * integral_gamma^inf p(z) dz) = 1/erfc(gamma/sqrt(2)).
// Returns +inf (with a stderr warning) once the tail underflows to zero.
double compression_ratio(double gamma);

// Per-pixel collision distance of the thresholded model,
//   D_c^2 = ((R-1)/R) * II_{[-g,g]^2} (x-y)^2 p(x) p(y) dx dy,
// evaluated in closed form (the cross term vanishes on the symmetric square).
double collision_distance_conventional(double gamma);

// Independent route: literal 2-D composite trapezoid of the same expression,
// with the (R-1)/R prefactor itself obtained by 1-D quadrature of p. Shares
// no code with the closed form (not even erf).
double collision_distance_quadrature(double gamma, double step = 1e-3);

struct TheoryCurveSample {
  double gamma = 0.0;
  double ratio = 0.0;
  double distance = 0.0;
};

struct TheoryCurve {
  std::vector<TheoryCurveSample> samples;
};

// Pairs (gamma, R, D_c) for sorted non-negative gammas.
TheoryCurve theory_curve(const std::vector<double>& gammas);

struct McResult {
  double gamma = 0.0;
  int dimension = 0;
  int trials = 0;
  double distance = 0.0;      // Gaussian-domain measurement
  double std_error = 0.0;
  double dct_distance = 0.0;  // same experiment through an orthonormal 2-D DCT
  double dct_std_error = 0.0;
};

// Simulates colliding latent pairs: i.i.d. N(0,1) vectors with the kept
// (above-threshold) coordinates forced equal, distance measured on what
// remains and scaled by an independently sampled keep fraction. A second pass
// runs the identical experiment on synthetic Gaussian images pushed through
// an orthonormal DCT-II, exercising the orthogonal-transform premise.
McResult mc_verify_theorem1(double gamma, int dimension, int trials, std::uint64_t seed);

// Orthonormal DCT-II matrix and 2-D transforms (n x n planes).
Tensor dct_matrix(int n);
Tensor dct2(const Tensor& plane);
Tensor idct2(const Tensor& coeffs);

using EncodeFn = std::function<Tensor(const Tensor&)>;

struct ContractionEstimate {
  double value = 0.0;  // empirical max ||x-y|| / ||f(x)-f(y)||; lower bound on C
  int pairs_used = 0;
  int pairs_skipped = 0;  // equal-latent pairs
};
ContractionEstimate estimate_contraction_constant(
    const EncodeFn& f, const std::vector<std::pair<Tensor, Tensor>>& pairs);
ContractionEstimate estimate_contraction_constant(
    const CodecModel& m, const std::vector<std::pair<Tensor, Tensor>>& pairs);

// Empirical max ||f(x)-f(y)|| / ||x-y||; lower bound on the Lipschitz constant.
double estimate_lipschitz_constant(const EncodeFn& f,
                                   const std::vector<std::pair<Tensor, Tensor>>& pairs);

struct LipschitzCheck {
  int checked = 0;
  int skipped = 0;     // zero-difference pairs
  int violations = 0;  // pairs with ||dx|| < ||dz|| / L beyond tolerance
  double min_margin = 0.0;
};

// Instantiates ||x_tgt - x_adv|| >= ||f(x_tgt) - f(x_adv)|| / L for each pair.
LipschitzCheck check_lipschitz_bound(const EncodeFn& f,
                                     const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                     double l_estimate);
LipschitzCheck check_lipschitz_bound(const CodecModel& m,
                                     const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                     double l_estimate);

}  // namespace nic
