#pragma once

#include <utility>
#include <vector>

#include "nic/attack.hpp"
#include "nic/codec.hpp"
#include "nic/half.hpp"

namespace nic {

// Limited-precision defense: route latent tensors and/or model weights
// through emulated half precision inside the deployed compression path.
struct LpdPolicy {
  bool truncate_latent = true;
  bool truncate_weights = false;

  bool active() const { return truncate_latent || truncate_weights; }
  void validate() const;
};

// Model copy with every parameter rounded to half precision.
CodecModel truncated_weights_copy(const CodecModel& m);

// The latent exactly as the defended pipeline computes it.
Tensor lpd_latent(const CodecModel& m, const Tensor& image, const LpdPolicy& policy);

// compress() with the policy's truncations inserted before quantization.
// Still a pure function of (model bytes, image bytes, policy).
Bitstream compress_lpd(const CodecModel& m, const Tensor& image, const LpdPolicy& policy);

struct DefenseReport {
  int suite_size = 0;
  int collided_undefended = 0;
  int collided_defended = 0;
  double asr_undefended = 0.0;
  double asr_defended = 0.0;
  // PSNR(x, roundtrip) gap on ordinary images, undefended minus defended.
  double mean_psnr_drop = 0.0;
  std::vector<PairRecord> defended_records;
  std::vector<PairRecord> undefended_records;
};

// Runs the MGD attack twice per pair: once against the plain pipeline and
// once where the attacker's collision check sees the LPD pipeline (gradients
// stay full-precision in both cases). Also measures the reconstruction cost
// of the defense over `ordinary_images`.
// `lpd_aware` switches to the harder attacker variant: the loss targets the
// deployed pipeline's (truncated) latent, straight-through across the
// truncation; the headline evaluation keeps the full-precision target.
DefenseReport evaluate_defense(const CodecModel& m,
                               const std::vector<std::pair<Tensor, Tensor>>& suite,
                               const AttackConfig& cfg, const LpdPolicy& policy,
                               const std::vector<Tensor>& ordinary_images,
                               bool lpd_aware = false);

}  // namespace nic
