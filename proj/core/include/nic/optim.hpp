#pragma once

#include <vector>

#include "nic/tensor.hpp"

namespace nic {

// First/second moment state for one parameter tensor.
struct AdamState {
  Tensor m;
  Tensor v;
  long long t = 0;

  static AdamState for_param(const Tensor& p) {
    AdamState s;
    s.m = Tensor::zeros(p.shape);
    s.v = Tensor::zeros(p.shape);
    return s;
  }
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam update, in place. Deterministic: no
// stochasticity beyond the supplied gradient.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamHyper& h);

// lr_min + 0.5*(lr_initial - lr_min)*(1 + cos(pi*step/total_steps))
double cosine_annealing_lr(long long step, long long total_steps, double lr_initial,
                           double lr_min);

}  // namespace nic
