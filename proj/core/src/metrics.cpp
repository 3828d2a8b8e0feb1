#include "nic/metrics.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "nic/errors.hpp"

namespace nic {

double hamming_normalized(const Bitstream& b1, const Bitstream& b2) {
  if (b1.bit_length != b2.bit_length) return 1.0;
  if (b1.bit_length == 0) return 0.0;
  std::uint64_t differing = 0;
  for (std::size_t i = 0; i < b1.payload.size(); ++i) {
    differing += static_cast<std::uint64_t>(
        std::popcount(static_cast<unsigned>(b1.payload[i] ^ b2.payload[i])));
  }
  return static_cast<double>(differing) / static_cast<double>(b1.bit_length);
}

double asr(const std::vector<PairRecord>& records) {
  if (records.empty()) throw ConfigError("asr: empty record list");
  int hits = 0;
  for (const PairRecord& r : records) {
    if (r.hamming == 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double l2_per_pixel(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y)) {
    throw ConfigError("l2_per_pixel: shape mismatch " + shape_str(x.shape) + " vs " +
                      shape_str(y.shape));
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(x.data.size()));
}

double psnr(const Tensor& x, const Tensor& y) {
  const double rms = l2_per_pixel(x, y);
  if (rms == 0.0) return std::numeric_limits<double>::infinity();
  return -20.0 * std::log10(rms);
}

namespace {

constexpr int kWindow = 11;
constexpr double kC1 = 1e-4;  // (0.01 * L)^2, L = 1
constexpr double kC2 = 9e-4;  // (0.03 * L)^2
const double kWeights5[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct Plane {
  std::vector<double> v;
  int h = 0, w = 0;
};

std::vector<double> gaussian_taps() {
  std::vector<double> g(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& x : g) x /= sum;
  return g;
}

// Separable valid-mode Gaussian filter.
Plane blur(const Plane& p, const std::vector<double>& g) {
  Plane tmp;
  tmp.h = p.h;
  tmp.w = p.w - kWindow + 1;
  tmp.v.assign(static_cast<std::size_t>(tmp.h) * tmp.w, 0.0);
  for (int y = 0; y < tmp.h; ++y) {
    for (int x = 0; x < tmp.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += p.v[static_cast<std::size_t>(y) * p.w + x + k] * g[static_cast<std::size_t>(k)];
      tmp.v[static_cast<std::size_t>(y) * tmp.w + x] = s;
    }
  }
  Plane out;
  out.h = p.h - kWindow + 1;
  out.w = tmp.w;
  out.v.assign(static_cast<std::size_t>(out.h) * out.w, 0.0);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += tmp.v[static_cast<std::size_t>(y + k) * tmp.w + x] * g[static_cast<std::size_t>(k)];
      out.v[static_cast<std::size_t>(y) * out.w + x] = s;
    }
  }
  return out;
}

Plane downsample2(const Plane& p) {
  Plane out;
  out.h = p.h / 2;
  out.w = p.w / 2;
  out.v.assign(static_cast<std::size_t>(out.h) * out.w, 0.0);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (p.v[static_cast<std::size_t>(2 * y) * p.w + 2 * x] +
                  p.v[static_cast<std::size_t>(2 * y) * p.w + 2 * x + 1] +
                  p.v[static_cast<std::size_t>(2 * y + 1) * p.w + 2 * x] +
                  p.v[static_cast<std::size_t>(2 * y + 1) * p.w + 2 * x + 1]);
    }
  }
  return out;
}

// Mean luminance and contrast-structure terms over one scale.
void ssim_terms(const Plane& a, const Plane& b, const std::vector<double>& g, double* lum,
                double* cs) {
  Plane mu_a = blur(a, g), mu_b = blur(b, g);
  Plane aa = a, bb = b, ab = a;
  for (std::size_t i = 0; i < aa.v.size(); ++i) {
    ab.v[i] = a.v[i] * b.v[i];
    aa.v[i] = a.v[i] * a.v[i];
    bb.v[i] = b.v[i] * b.v[i];
  }
  Plane saa = blur(aa, g), sbb = blur(bb, g), sab = blur(ab, g);
  double lsum = 0.0, csum = 0.0;
  for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = saa.v[i] - ma * ma;
    const double vb = sbb.v[i] - mb * mb;
    const double cov = sab.v[i] - ma * mb;
    lsum += (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
    csum += (2.0 * cov + kC2) / (va + vb + kC2);
  }
  *lum = lsum / static_cast<double>(mu_a.v.size());
  *cs = csum / static_cast<double>(mu_a.v.size());
}

}  // namespace

MsSsimResult ms_ssim_detail(const Tensor& x, const Tensor& y) {
  if (!x.same_shape(y)) throw ConfigError("ms_ssim: shape mismatch");
  require_rank(x, 4, "ms_ssim input");
  const int channels = x.shape[1], h = x.shape[2], w = x.shape[3];

  int feasible = 0;
  for (int s = 1; s <= 5; ++s) {
    const int scale_div = 1 << (s - 1);
    if (h / scale_div >= kWindow && w / scale_div >= kWindow) feasible = s;
  }
  if (feasible == 0) throw ConfigError("ms_ssim: image smaller than the 11x11 window");

  double weight_sum = 0.0;
  for (int s = 0; s < feasible; ++s) weight_sum += kWeights5[s];

  const std::vector<double> g = gaussian_taps();
  double value = 0.0;
  for (int c = 0; c < channels; ++c) {
    Plane a, b;
    a.h = b.h = h;
    a.w = b.w = w;
    a.v.assign(x.data.begin() + static_cast<std::ptrdiff_t>(c) * h * w,
               x.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * h * w);
    b.v.assign(y.data.begin() + static_cast<std::ptrdiff_t>(c) * h * w,
               y.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * h * w);
    double prod = 1.0;
    for (int s = 0; s < feasible; ++s) {
      double lum = 0.0, cs = 0.0;
      ssim_terms(a, b, g, &lum, &cs);
      const double wgt = kWeights5[s] / weight_sum;
      const double term = (s == feasible - 1) ? lum * cs : cs;
      prod *= std::pow(term > 0.0 ? term : 0.0, wgt);
      if (s + 1 < feasible) {
        a = downsample2(a);
        b = downsample2(b);
      }
    }
    value += prod;
  }
  MsSsimResult r;
  r.value = value / channels;
  r.scales_used = feasible;
  return r;
}

double ms_ssim(const Tensor& x, const Tensor& y) { return ms_ssim_detail(x, y).value; }

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.count = static_cast<int>(values.size());
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= a.count;
  for (double v : values) a.stddev += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(a.stddev / a.count);
  return a;
}

std::string MetricReport::to_csv(const std::vector<std::string>& provenance_lines) const {
  std::ostringstream os;
  for (const std::string& line : provenance_lines) os << "# " << line << "\n";
  os << "pair,hamming,l2_to_src,l2_to_tgt,msssim_to_src,msssim_to_tgt,collided,iterations\n";
  std::vector<double> l2s, l2t, ms, mt;
  for (const PairRecord& r : records) {
    os << r.pair_index << ',' << r.hamming << ',' << r.l2_to_src << ',' << r.l2_to_tgt << ','
       << r.msssim_to_src << ',' << r.msssim_to_tgt << ',' << (r.collided ? 1 : 0) << ','
       << r.iterations_used << "\n";
    l2s.push_back(r.l2_to_src);
    l2t.push_back(r.l2_to_tgt);
    ms.push_back(r.msssim_to_src);
    mt.push_back(r.msssim_to_tgt);
  }
  const Aggregate as = aggregate(l2s), at = aggregate(l2t), s = aggregate(ms), t = aggregate(mt);
  os << "# asr=" << attack_success_rate() << " l2_src=" << as.mean << "±" << as.stddev
     << " l2_tgt=" << at.mean << "±" << at.stddev << " msssim_src=" << s.mean << "±" << s.stddev
     << " msssim_tgt=" << t.mean << "±" << t.stddev << "\n";
  return os.str();
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["asr"] = attack_success_rate();
  j["records"] = nlohmann::json::array();
  for (const PairRecord& r : records) {
    j["records"].push_back({{"pair", r.pair_index},
                            {"hamming", r.hamming},
                            {"l2_to_src", r.l2_to_src},
                            {"l2_to_tgt", r.l2_to_tgt},
                            {"msssim_to_src", r.msssim_to_src},
                            {"msssim_to_tgt", r.msssim_to_tgt},
                            {"collided", r.collided},
                            {"iterations", r.iterations_used}});
  }
  return j.dump(2);
}

}  // namespace nic
