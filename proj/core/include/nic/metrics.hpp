#pragma once

#include <string>
#include <vector>

#include "nic/bitstream.hpp"
#include "nic/tensor.hpp"

namespace nic {

// Fraction of differing payload bits. Streams of different bit length cannot
// collide and score 1.0.
double hamming_normalized(const Bitstream& b1, const Bitstream& b2);

struct PairRecord {
  int pair_index = 0;
  double hamming = 1.0;
  double l2_to_src = 0.0;
  double l2_to_tgt = 0.0;
  double msssim_to_src = 0.0;
  double msssim_to_tgt = 0.0;
  bool collided = false;
  int iterations_used = 0;
};

// Fraction of records with exactly zero Hamming distance.
double asr(const std::vector<PairRecord>& records);

// Root-mean-square difference over all scalar entries.
double l2_per_pixel(const Tensor& x, const Tensor& y);

// Peak signal-to-noise ratio for [0,1] images, in dB.
double psnr(const Tensor& x, const Tensor& y);

struct MsSsimResult {
  double value = 0.0;
  int scales_used = 0;  // < 5 when the image is too small for all scales
};

// Multi-scale SSIM: 11x11 Gaussian window (sigma 1.5), canonical 5-scale
// weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333) renormalized over the
// feasible scale count, C1=(0.01)^2, C2=(0.03)^2 for unit-range images.
MsSsimResult ms_ssim_detail(const Tensor& x, const Tensor& y);
double ms_ssim(const Tensor& x, const Tensor& y);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population
  int count = 0;
};
Aggregate aggregate(const std::vector<double>& values);

struct MetricReport {
  std::vector<PairRecord> records;

  double attack_success_rate() const { return asr(records); }
  // CSV: optional "# ..." provenance lines, one row per pair, aggregate
  // footer. JSON mirrors the same content.
  std::string to_csv(const std::vector<std::string>& provenance_lines = {}) const;
  std::string to_json() const;
};

}  // namespace nic
