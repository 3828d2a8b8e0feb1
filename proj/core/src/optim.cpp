#include "nic/optim.hpp"

#include <cmath>

#include "nic/errors.hpp"

namespace nic {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamHyper& h) {
  if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v)) {
    throw ConfigError("adam_step: param/grad/state shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    const double g = grad.data[i];
    state.m.data[i] = h.beta1 * state.m.data[i] + (1.0 - h.beta1) * g;
    state.v.data[i] = h.beta2 * state.v.data[i] + (1.0 - h.beta2) * g * g;
    const double mhat = state.m.data[i] / bc1;
    const double vhat = state.v.data[i] / bc2;
    param.data[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

double cosine_annealing_lr(long long step, long long total_steps, double lr_initial,
                           double lr_min) {
  if (total_steps == 0) throw ConfigError("cosine_annealing_lr: total_steps must be nonzero");
  if (step < 0 || step > total_steps) {
    throw ConfigError("cosine_annealing_lr: step out of [0, total_steps]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_initial - lr_min) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

}  // namespace nic
