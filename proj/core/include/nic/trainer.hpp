#pragma once

#include <cstdint>
#include <vector>

#include "nic/codec.hpp"

namespace nic {

struct TrainOptions {
  int batch_size = 4;
  double lr = 1e-3;
  double lr_min = 1e-4;
  bool cosine_schedule = true;
  // Distortion term weight: loss = bits/pixel + lambda * distortion_scale * MSE.
  // The default places the preset lambda ladder so that QF1 is rate-starved
  // (the collision-prone regime) while QF5 stays comfortably transparent.
  double distortion_scale = 5000.0;
  int log_every = 0;  // 0 = silent
};

struct TrainStats {
  std::vector<double> step_loss;
  std::vector<double> epoch_loss;  // mean loss per pass over the dataset
  double first_epoch() const { return epoch_loss.front(); }
  double last_epoch() const { return epoch_loss.back(); }
};

// Rate-distortion training: loss = bits/pixel + lambda * 255^2 * MSE, with
// quantization relaxed by additive uniform noise in [-step/2, step/2].
// Deterministic for a fixed seed; parameters are rounded through f32 on exit
// so the trained model equals its serialized form. Throws NumericError when
// the loss diverges to NaN/Inf.
TrainStats train_rd(CodecModel& m, const std::vector<Tensor>& dataset, double lambda, int steps,
                    std::uint64_t seed, const TrainOptions& opts = {});

}  // namespace nic
