#include "nic/theory.hpp"

#include <cmath>
#include <cstdio>

#include "nic/errors.hpp"
#include "nic/rng.hpp"

namespace nic {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244008443621;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599;
}  // namespace

double compression_ratio(double gamma) {
  if (gamma < 0.0 || !std::isfinite(gamma)) {
    throw ConfigError("compression_ratio: gamma must be finite and non-negative");
  }
  const double tail = erfc_series_cf(gamma * kInvSqrt2);
  if (tail == 0.0) {
    std::fprintf(stderr, "compression_ratio: tail underflow at gamma=%g, returning inf\n", gamma);
    return std::numeric_limits<double>::infinity();
  }
  return 1.0 / tail;
}

double collision_distance_conventional(double gamma) {
  if (gamma < 0.0 || !std::isfinite(gamma)) {
    throw ConfigError("collision_distance_conventional: bad gamma");
  }
  // (R-1)/R equals the in-band mass P = erf(gamma/sqrt(2)); the double
  // integral separates into 2*P*S with S = P - 2*gamma*phi(gamma).
  const double p = erf_series_cf(gamma * kInvSqrt2);
  const double s = p - 2.0 * gamma * kInvSqrt2Pi * std::exp(-0.5 * gamma * gamma);
  const double d2 = p * 2.0 * p * s;
  return d2 > 0.0 ? std::sqrt(d2) : 0.0;
}

double collision_distance_quadrature(double gamma, double step) {
  if (gamma < 0.0 || step <= 0.0) throw ConfigError("collision_distance_quadrature: bad args");
  if (gamma == 0.0) return 0.0;
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * gamma / step)) + 1;
  const double h = 2.0 * gamma / static_cast<double>(n - 1);
  // Node positions and trapezoid-weighted densities, shared by both axes.
  std::vector<double> xs(n), wp(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = -gamma + h * static_cast<double>(i);
    const double phi = kInvSqrt2Pi * std::exp(-0.5 * xs[i] * xs[i]);
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    wp[i] = phi * w * h;
  }
  double keep = 0.0;  // 1-D quadrature of p over [-gamma, gamma] == (R-1)/R
  for (std::size_t i = 0; i < n; ++i) keep += wp[i];
  double inner = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = xs[i], wi = wp[i];
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xi - xs[j];
      row += d * d * wp[j];
    }
    inner += wi * row;
  }
  const double d2 = keep * inner;
  return d2 > 0.0 ? std::sqrt(d2) : 0.0;
}

TheoryCurve theory_curve(const std::vector<double>& gammas) {
  TheoryCurve curve;
  double prev = -1.0;
  for (double g : gammas) {
    if (g < 0.0) throw ConfigError("theory_curve: negative gamma");
    if (g <= prev) throw ConfigError("theory_curve: gammas must be strictly increasing");
    prev = g;
    TheoryCurveSample s;
    s.gamma = g;
    s.ratio = compression_ratio(g);
    s.distance = collision_distance_conventional(g);
    curve.samples.push_back(s);
  }
  return curve;
}

McResult mc_verify_theorem1(double gamma, int dimension, int trials, std::uint64_t seed) {
  if (dimension < 64) throw ConfigError("mc_verify_theorem1: dimension must be >= 64");
  if (trials < 2) throw ConfigError("mc_verify_theorem1: trials must be >= 2");
  if (gamma < 0.0) throw ConfigError("mc_verify_theorem1: negative gamma");

  Rng rng = Rng::derive(seed, 0x7431);
  Rng keep_rng = Rng::derive(seed, 0x7432);  // independent stream for the keep fraction

  const auto m = static_cast<std::size_t>(dimension);
  std::vector<double> zt(m), za(m);

  // Per-trial: q = (1/M) sum over both-below-threshold coords of (zt-za)^2
  // after forcing the kept coords equal; r = independently sampled fraction
  // of below-threshold coords. D^2 is estimated by mean(r)*mean(q).
  auto run_gaussian = [&](double* q_out, double* r_out, int t) {
    (void)t;
    for (std::size_t i = 0; i < m; ++i) zt[i] = rng.normal();
    for (std::size_t i = 0; i < m; ++i) za[i] = rng.normal();
    double q = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (std::fabs(zt[i]) > gamma || std::fabs(za[i]) > gamma) {
        za[i] = zt[i];  // same-bitstream condition on the kept part
      } else {
        const double d = zt[i] - za[i];
        q += d * d;
      }
    }
    int below = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (std::fabs(keep_rng.normal()) <= gamma) ++below;
    }
    *q_out = q / static_cast<double>(m);
    *r_out = static_cast<double>(below) / static_cast<double>(m);
  };

  std::vector<double> qs(static_cast<std::size_t>(trials)), rs(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    run_gaussian(&qs[static_cast<std::size_t>(t)], &rs[static_cast<std::size_t>(t)], t);
  }

  auto mean_var = [](const std::vector<double>& v, double* mean, double* var_of_mean) {
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - mu) * (x - mu);
    s2 /= static_cast<double>(v.size() - 1);
    *mean = mu;
    *var_of_mean = s2 / static_cast<double>(v.size());
  };

  auto summarize = [&](const std::vector<double>& q, const std::vector<double>& r, double* dist,
                       double* se) {
    double qm = 0.0, qv = 0.0, rm = 0.0, rv = 0.0;
    mean_var(q, &qm, &qv);
    mean_var(r, &rm, &rv);
    const double d2 = rm * qm;
    const double var_d2 = rm * rm * qv + qm * qm * rv;
    *dist = d2 > 0.0 ? std::sqrt(d2) : 0.0;
    *se = (*dist > 0.0) ? std::sqrt(var_d2) / (2.0 * *dist) : std::sqrt(std::sqrt(var_d2));
  };

  McResult res;
  res.gamma = gamma;
  res.dimension = dimension;
  res.trials = trials;
  summarize(qs, rs, &res.distance, &res.std_error);

  // DCT pass: Gaussian images, orthonormal analysis transform, collision
  // forced in the coefficient domain, distance measured back in pixels.
  int side = 8;
  while (side * side < dimension) side *= 2;
  const Tensor t_mat = dct_matrix(side);
  const int dct_trials = std::max(32, trials / 16);
  std::vector<double> dq(static_cast<std::size_t>(dct_trials)),
      dr(static_cast<std::size_t>(dct_trials));
  Tensor img({side, side});
  for (int t = 0; t < dct_trials; ++t) {
    for (double& v : img.data) v = rng.normal();
    Tensor zt_c = dct2(img);
    Tensor xa({side, side});
    for (double& v : xa.data) v = rng.normal();
    Tensor za_c = dct2(xa);
    for (std::size_t i = 0; i < zt_c.data.size(); ++i) {
      if (std::fabs(zt_c.data[i]) > gamma || std::fabs(za_c.data[i]) > gamma) {
        za_c.data[i] = zt_c.data[i];
      }
    }
    const Tensor xa_forced = idct2(za_c);
    double q = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const double d = img.data[i] - xa_forced.data[i];
      q += d * d;
    }
    dq[static_cast<std::size_t>(t)] = q / static_cast<double>(side * side);
    int below = 0;
    for (int i = 0; i < side * side; ++i) {
      if (std::fabs(keep_rng.normal()) <= gamma) ++below;
    }
    dr[static_cast<std::size_t>(t)] = static_cast<double>(below) / static_cast<double>(side * side);
  }
  summarize(dq, dr, &res.dct_distance, &res.dct_std_error);
  return res;
}

Tensor dct_matrix(int n) {
  Tensor t({n, n});
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int j = 0; j < n; ++j) {
      t.data[static_cast<std::size_t>(k) * n + j] =
          scale * std::cos(pi * (2.0 * j + 1.0) * k / (2.0 * n));
    }
  }
  return t;
}

namespace {

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int n = a.shape[0], k = a.shape[1], m = b.shape[1];
  Tensor c({n, m});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) {
        s += a.data[static_cast<std::size_t>(i) * k + t] * b.data[static_cast<std::size_t>(t) * m + j];
      }
      c.data[static_cast<std::size_t>(i) * m + j] = s;
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  const int n = a.shape[0], m = a.shape[1];
  Tensor t({m, n});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      t.data[static_cast<std::size_t>(j) * n + i] = a.data[static_cast<std::size_t>(i) * m + j];
    }
  }
  return t;
}

}  // namespace

Tensor dct2(const Tensor& plane) {
  require_rank(plane, 2, "dct2 input");
  const Tensor t = dct_matrix(plane.shape[0]);
  return matmul(matmul(t, plane), transpose(t));
}

Tensor idct2(const Tensor& coeffs) {
  require_rank(coeffs, 2, "idct2 input");
  const Tensor t = dct_matrix(coeffs.shape[0]);
  return matmul(matmul(transpose(t), coeffs), t);
}

namespace {

double l2_diff(const Tensor& a, const Tensor& b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

}  // namespace

ContractionEstimate estimate_contraction_constant(
    const EncodeFn& f, const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  if (pairs.size() < 1) throw ConfigError("estimate_contraction_constant: need pairs");
  ContractionEstimate est;
  for (const auto& [a, b] : pairs) {
    const double dz = l2_diff(f(a), f(b));
    const double dx = l2_diff(a, b);
    if (dz <= 1e-12 * std::max(1.0, dx)) {
      est.pairs_skipped++;
      continue;
    }
    est.value = std::max(est.value, dx / dz);
    est.pairs_used++;
  }
  if (est.pairs_used == 0) {
    throw NumericError("estimate_contraction_constant: all pairs degenerate");
  }
  return est;
}

ContractionEstimate estimate_contraction_constant(
    const CodecModel& m, const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  return estimate_contraction_constant(
      [&m](const Tensor& x) { return encode_latent_f64(m, x); }, pairs);
}

double estimate_lipschitz_constant(const EncodeFn& f,
                                   const std::vector<std::pair<Tensor, Tensor>>& pairs) {
  if (pairs.empty()) throw ConfigError("estimate_lipschitz_constant: need pairs");
  double l = 0.0;
  for (const auto& [a, b] : pairs) {
    const double dx = l2_diff(a, b);
    if (dx == 0.0) continue;
    l = std::max(l, l2_diff(f(a), f(b)) / dx);
  }
  return l;
}

LipschitzCheck check_lipschitz_bound(const EncodeFn& f,
                                     const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                     double l_estimate) {
  if (pairs.empty()) throw ConfigError("check_lipschitz_bound: empty run list");
  if (!(l_estimate > 0.0)) throw ConfigError("check_lipschitz_bound: L must be positive");
  LipschitzCheck chk;
  chk.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& [xt, xa] : pairs) {
    const double dx = l2_diff(xt, xa);
    const double dz = l2_diff(f(xt), f(xa));
    if (dx == 0.0 && dz == 0.0) {
      chk.skipped++;
      continue;
    }
    const double bound = dz / l_estimate;
    const double margin = dx - bound;
    chk.min_margin = std::min(chk.min_margin, margin);
    if (margin < -1e-9 * std::max(1.0, dx)) chk.violations++;
    chk.checked++;
  }
  return chk;
}

LipschitzCheck check_lipschitz_bound(const CodecModel& m,
                                     const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                     double l_estimate) {
  return check_lipschitz_bound([&m](const Tensor& x) { return encode_latent_f64(m, x); }, pairs,
                               l_estimate);
}

}  // namespace nic
