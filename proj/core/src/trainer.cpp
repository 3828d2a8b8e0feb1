#include "nic/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "nic/errors.hpp"
#include "nic/optim.hpp"

namespace nic {

TrainStats train_rd(CodecModel& m, const std::vector<Tensor>& dataset, double lambda, int steps,
                    std::uint64_t seed, const TrainOptions& opts) {
  if (dataset.empty()) throw ConfigError("train_rd: empty dataset");
  if (steps < 1) throw ConfigError("train_rd: steps must be >= 1");
  if (lambda < 0.0) throw ConfigError("train_rd: negative lambda");
  const int batch = std::min<int>(opts.batch_size, static_cast<int>(dataset.size()));

  std::vector<Tensor*> params = m.param_list();
  std::vector<AdamState> states;
  states.reserve(params.size());
  for (Tensor* p : params) states.push_back(AdamState::for_param(*p));

  Rng order_rng = Rng::derive(seed, 1);
  Rng noise_rng = Rng::derive(seed, 2);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces an initial shuffle
  auto next_index = [&]() {
    if (cursor >= order.size()) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.below(i))]);
      }
      cursor = 0;
    }
    return order[cursor++];
  };

  TrainStats stats;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>((dataset.size() + batch - 1) / batch));

  for (int step = 0; step < steps; ++step) {
    Tape tape;
    ModelVars v = stage_model(tape, m, /*trainable=*/true);
    Var total;
    for (int b = 0; b < batch; ++b) {
      const Tensor& img = dataset[next_index()];
      const int pixels = img.shape[2] * img.shape[3];
      Var x = tape.leaf(img, false);
      Var z = encoder_forward(tape, m, v, x);
      Tensor noise(tape.value(z).shape);
      const double half = 0.5 * m.preset.quant_step;
      for (double& nv : noise.data) nv = noise_rng.uniform(-half, half);
      Var ztilde = tape.add_const(z, noise);
      Var bits = tape.gaussian_bits(ztilde, v.em_mu, v.em_log_sigma, m.preset.quant_step);
      Var dec_in = ztilde;
      if (m.has_hyper()) {
        Var y = hyper_encoder_forward(tape, m, v, z);
        Tensor hnoise(tape.value(y).shape);
        const double hhalf = 0.5 * m.preset.hyper_step;
        for (double& nv : hnoise.data) nv = noise_rng.uniform(-hhalf, hhalf);
        Var ytilde = tape.add_const(y, hnoise);
        Var hbits = tape.gaussian_bits(ytilde, v.hem_mu, v.hem_log_sigma, m.preset.hyper_step);
        bits = tape.add(bits, hbits);
        dec_in = tape.add(ztilde, hyper_decoder_forward(tape, m, v, ytilde));
      }
      Var recon = decoder_forward(tape, m, v, dec_in);
      Var sse = tape.sumsq_to_const(recon, img);
      Var rate_pp = tape.affine(bits, 1.0 / pixels, 0.0);
      Var dist = tape.affine(sse, lambda * opts.distortion_scale / (3.0 * pixels), 0.0);
      Var item = tape.add(rate_pp, dist);
      total = (b == 0) ? item : tape.add(total, item);
    }
    Var loss = tape.affine(total, 1.0 / batch, 0.0);
    const double loss_value = tape.value(loss).data[0];
    if (!std::isfinite(loss_value)) {
      throw NumericError("train_rd: loss diverged to non-finite at step " + std::to_string(step));
    }
    stats.step_loss.push_back(loss_value);

    std::vector<Tensor> grads = tape.backward(loss, v.params);
    AdamHyper hyper;
    hyper.lr = opts.cosine_schedule
                   ? cosine_annealing_lr(step, std::max(1, steps - 1), opts.lr, opts.lr_min)
                   : opts.lr;
    for (std::size_t i = 0; i < params.size(); ++i) {
      adam_step(*params[i], grads[i], states[i], hyper);
    }
    if (opts.log_every > 0 && step % opts.log_every == 0) {
      std::printf("train step %d/%d loss %.4f lr %.5f\n", step, steps, loss_value, hyper.lr);
      std::fflush(stdout);
    }
  }

  for (std::size_t s = 0; s < stats.step_loss.size(); s += steps_per_epoch) {
    const std::size_t e = std::min(stats.step_loss.size(), s + steps_per_epoch);
    double mean = 0.0;
    for (std::size_t i = s; i < e; ++i) mean += stats.step_loss[i];
    stats.epoch_loss.push_back(mean / static_cast<double>(e - s));
  }

  round_params_to_f32(m);
  return stats;
}

}  // namespace nic
