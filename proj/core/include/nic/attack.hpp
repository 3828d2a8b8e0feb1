#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nic/codec.hpp"
#include "nic/metrics.hpp"

namespace nic {

// Sparse pixel grid the attack is allowed to perturb: rows on the arithmetic
// progression h0, h0+dh, ... and columns on w0, w0+dw, ... (independent
// row/column grids, all channels).
struct MaskSpec {
  int delta_h = 3;
  int delta_w = 1;
  int h0 = 0;
  int w0 = 0;

  void validate() const;
  bool allows(int h, int w) const {
    return h >= h0 && (h - h0) % delta_h == 0 && w >= w0 && (w - w0) % delta_w == 0;
  }
  double density(int height, int width) const;
};

enum class LossVariant : std::uint8_t { LatentL2, LatentL2PlusCosine };
// Eq-style switch: the cosine term defaults to latent space (following the
// surrounding prose), with an image-space reading available.
enum class CosineSpace : std::uint8_t { Latent, Image };

struct AttackConfig {
  int max_iterations = 5000;
  double lr_initial = 0.03;
  double lr_min = 0.0;
  LossVariant loss = LossVariant::LatentL2;
  CosineSpace cosine_space = CosineSpace::Latent;
  MaskSpec mask;
  int check_every = 25;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AttackRun {
  std::string attack;  // "mgd" | "pgd" | "cw"
  Tensor x_src, x_tgt, x_adv;
  Bitstream b_tgt, b_adv;
  bool collided = false;
  int iterations_used = 0;
  std::vector<double> loss_trace;
  double l2_to_src = 0.0, l2_to_tgt = 0.0;
  double msssim_to_src = 0.0, msssim_to_tgt = 0.0;

  PairRecord record(int pair_index) const;
};

// ||f(x) - f(x_tgt)||_2, optionally plus 0.5*(1 - CS(.,.)). Value-only
// convenience; the attacks differentiate the same expression on a tape.
double latent_loss(const CodecModel& m, const Tensor& x, const Tensor& x_tgt, LossVariant variant,
                   CosineSpace space = CosineSpace::Latent);

// Zero every gradient entry off the dot grid.
Tensor apply_dot_mask(const Tensor& grad, const MaskSpec& mask);

// The deployed compression pipeline used for collision checks (identity =
// plain compress; the defense evaluation swaps in its limited-precision
// variant).
using CompressFn = std::function<Bitstream(const CodecModel&, const Tensor&)>;

AttackRun mgd_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                     const AttackConfig& cfg);
// `z_tgt_override` replaces the full-precision target latent in the loss
// (used by the LPD-aware attacker variant: gradients still flow through the
// full-precision encoder, straight-through across the truncation).
AttackRun mgd_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                     const AttackConfig& cfg, const CompressFn& deployed,
                     const Tensor* z_tgt_override = nullptr);

AttackRun pgd_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                     const AttackConfig& cfg, double epsilon);
AttackRun cw_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                    const AttackConfig& cfg, double c);

// Does x_adv from a collided run still collide with x_tgt under model_b?
bool transfer_check(const CodecModel& model_b, const AttackRun& run, const Tensor& x_tgt);

// Persist a run as a directory: x_src/x_adv/x_tgt.ppm, b_tgt/b_adv.nicb,
// run.json (outcome, metrics, loss trace).
void save_attack_run(const std::string& dir, const AttackRun& run);

}  // namespace nic
