#include "nic/attack.hpp"

#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "nic/errors.hpp"
#include "nic/image_io.hpp"
#include "nic/optim.hpp"

namespace nic {

void MaskSpec::validate() const {
  if (delta_h < 1 || delta_w < 1) throw ConfigError("mask: strides must be >= 1");
  if (h0 < 0 || w0 < 0) throw ConfigError("mask: shifts must be >= 0");
  if (h0 >= delta_h || w0 >= delta_w) throw ConfigError("mask: shift must be below stride");
}

double MaskSpec::density(int height, int width) const {
  validate();
  const auto rows = (height - h0 + delta_h - 1) / delta_h;
  const auto cols = (width - w0 + delta_w - 1) / delta_w;
  return static_cast<double>(rows) * cols / (static_cast<double>(height) * width);
}

void AttackConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("attack: max_iterations must be >= 1");
  if (!(lr_initial > 0.0)) throw ConfigError("attack: lr_initial must be positive");
  if (check_every < 1) throw ConfigError("attack: check_every must be >= 1");
  mask.validate();
}

Tensor apply_dot_mask(const Tensor& grad, const MaskSpec& mask) {
  mask.validate();
  require_rank(grad, 4, "apply_dot_mask grad");
  Tensor out = Tensor::zeros(grad.shape);
  const int c = grad.shape[1], h = grad.shape[2], w = grad.shape[3];
  for (int ch = 0; ch < c; ++ch) {
    for (int y = mask.h0; y < h; y += mask.delta_h) {
      for (int x = mask.w0; x < w; x += mask.delta_w) {
        out.at(0, ch, y, x) = grad.at(0, ch, y, x);
      }
    }
  }
  return out;
}

namespace {

// Builds the attack loss on the tape; z_tgt (and x_tgt for the image-space
// cosine) enter as constants.
Var attack_loss(Tape& tape, const CodecModel& m, const ModelVars& mv, Var x_var,
                const Tensor& z_tgt, const Tensor& x_tgt, LossVariant variant,
                CosineSpace space) {
  Var z = encoder_forward(tape, m, mv, x_var);
  Var loss = tape.l2_to_const(z, z_tgt);
  if (variant == LossVariant::LatentL2PlusCosine) {
    Var cs = space == CosineSpace::Latent ? tape.cosine_to_const(z, z_tgt)
                                          : tape.cosine_to_const(x_var, x_tgt);
    // + 0.5 * (1 - CS)
    Var penalty = tape.affine(cs, -0.5, 0.5);
    loss = tape.add(loss, penalty);
  }
  return loss;
}

void finish_metrics(AttackRun& run) {
  run.l2_to_src = l2_per_pixel(run.x_adv, run.x_src);
  run.l2_to_tgt = l2_per_pixel(run.x_adv, run.x_tgt);
  run.msssim_to_src = ms_ssim(run.x_adv, run.x_src);
  run.msssim_to_tgt = ms_ssim(run.x_adv, run.x_tgt);
}

double checked_loss_value(const Tape& tape, Var loss, const char* attack, int iter) {
  const double v = tape.value(loss).data[0];
  if (!std::isfinite(v)) {
    throw NumericError(std::string(attack) + ": non-finite loss at iteration " +
                       std::to_string(iter));
  }
  return v;
}

}  // namespace

double latent_loss(const CodecModel& m, const Tensor& x, const Tensor& x_tgt, LossVariant variant,
                   CosineSpace space) {
  Tape tape;
  ModelVars mv = stage_model(tape, m, false);
  const Tensor z_tgt = encode_latent_f64(m, x_tgt);
  Var x_var = tape.leaf(x, false);
  Var loss = attack_loss(tape, m, mv, x_var, z_tgt, x_tgt, variant, space);
  return tape.value(loss).data[0];
}

AttackRun mgd_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                     const AttackConfig& cfg) {
  return mgd_attack(m, x_src, x_tgt, cfg,
                    [](const CodecModel& model, const Tensor& img) { return compress(model, img); });
}

AttackRun mgd_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                     const AttackConfig& cfg, const CompressFn& deployed,
                     const Tensor* z_tgt_override) {
  cfg.validate();
  AttackRun run;
  run.attack = "mgd";
  run.x_src = x_src;
  run.x_tgt = x_tgt;
  run.b_tgt = deployed(m, x_tgt);

  const Tensor z_tgt = z_tgt_override ? *z_tgt_override : encode_latent_f64(m, x_tgt);
  Tensor x = x_src;
  run.b_adv = deployed(m, x);
  if (run.b_adv == run.b_tgt) {  // already colliding at iteration 0
    run.collided = true;
    run.x_adv = x;
    run.iterations_used = 0;
    finish_metrics(run);
    return run;
  }

  AdamState state = AdamState::for_param(x);
  AdamHyper hyper;
  for (int i = 0; i < cfg.max_iterations; ++i) {
    Tape tape;
    ModelVars mv = stage_model(tape, m, false);
    Var x_var = tape.leaf(x, true);
    Var loss = attack_loss(tape, m, mv, x_var, z_tgt, x_tgt, cfg.loss, cfg.cosine_space);
    run.loss_trace.push_back(checked_loss_value(tape, loss, "mgd_attack", i));

    const Tensor grad = tape.backward(loss, {x_var})[0];
    const Tensor masked = apply_dot_mask(grad, cfg.mask);
    hyper.lr = cosine_annealing_lr(i, cfg.max_iterations, cfg.lr_initial, cfg.lr_min);
    adam_step(x, masked, state, hyper);
    x = clamp01(x);

    if ((i + 1) % cfg.check_every == 0 || i + 1 == cfg.max_iterations) {
      Bitstream b = deployed(m, x);
      if (b == run.b_tgt) {
        run.collided = true;
        run.b_adv = std::move(b);
        run.x_adv = x;
        run.iterations_used = i + 1;
        finish_metrics(run);
        return run;
      }
      run.b_adv = std::move(b);
    }
  }
  run.x_adv = x;
  run.iterations_used = cfg.max_iterations;
  finish_metrics(run);
  return run;
}

AttackRun pgd_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                     const AttackConfig& cfg, double epsilon) {
  cfg.validate();
  if (epsilon < 0.0) throw ConfigError("pgd_attack: epsilon must be >= 0");
  AttackRun run;
  run.attack = "pgd";
  run.x_src = x_src;
  run.x_tgt = x_tgt;
  run.b_tgt = compress(m, x_tgt);

  const Tensor z_tgt = encode_latent_f64(m, x_tgt);
  Tensor x = x_src;
  run.b_adv = compress(m, x);
  if (run.b_adv == run.b_tgt) {
    run.collided = true;
    run.x_adv = x;
    run.iterations_used = 0;
    finish_metrics(run);
    return run;
  }

  const double step = 2.5 * epsilon / cfg.max_iterations;
  for (int i = 0; i < cfg.max_iterations; ++i) {
    Tape tape;
    ModelVars mv = stage_model(tape, m, false);
    Var x_var = tape.leaf(x, true);
    Var loss = attack_loss(tape, m, mv, x_var, z_tgt, x_tgt, cfg.loss, cfg.cosine_space);
    run.loss_trace.push_back(checked_loss_value(tape, loss, "pgd_attack", i));

    const Tensor grad = tape.backward(loss, {x_var})[0];
    for (std::size_t k = 0; k < x.data.size(); ++k) {
      double v = x.data[k] - step * (grad.data[k] > 0.0 ? 1.0 : (grad.data[k] < 0.0 ? -1.0 : 0.0));
      const double lo = x_src.data[k] - epsilon, hi = x_src.data[k] + epsilon;
      v = v < lo ? lo : (v > hi ? hi : v);  // L-inf projection around x_src
      x.data[k] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }

    if ((i + 1) % cfg.check_every == 0 || i + 1 == cfg.max_iterations) {
      Bitstream b = compress(m, x);
      if (b == run.b_tgt) {
        run.collided = true;
        run.b_adv = std::move(b);
        run.x_adv = x;
        run.iterations_used = i + 1;
        finish_metrics(run);
        return run;
      }
      run.b_adv = std::move(b);
    }
  }
  run.x_adv = x;
  run.iterations_used = cfg.max_iterations;
  finish_metrics(run);
  return run;
}

AttackRun cw_attack(const CodecModel& m, const Tensor& x_src, const Tensor& x_tgt,
                    const AttackConfig& cfg, double c) {
  cfg.validate();
  if (!(c > 0.0)) throw ConfigError("cw_attack: c must be positive");
  AttackRun run;
  run.attack = "cw";
  run.x_src = x_src;
  run.x_tgt = x_tgt;
  run.b_tgt = compress(m, x_tgt);

  const Tensor z_tgt = encode_latent_f64(m, x_tgt);
  run.b_adv = compress(m, x_src);
  if (run.b_adv == run.b_tgt) {
    run.collided = true;
    run.x_adv = x_src;
    run.iterations_used = 0;
    finish_metrics(run);
    return run;
  }

  // tanh-space change of variables keeps every iterate inside (0,1).
  Tensor w = x_src;
  for (double& v : w.data) {
    const double clamped = std::min(1.0 - 1e-6, std::max(1e-6, v));
    v = std::atanh(2.0 * clamped - 1.0);
  }

  AdamState state = AdamState::for_param(w);
  AdamHyper hyper;
  Tensor x = x_src;
  for (int i = 0; i < cfg.max_iterations; ++i) {
    Tape tape;
    ModelVars mv = stage_model(tape, m, false);
    Var w_var = tape.leaf(w, true);
    Var x_var = tape.affine(tape.tanh_op(w_var), 0.5, 0.5);
    Var loss = attack_loss(tape, m, mv, x_var, z_tgt, x_tgt, cfg.loss, cfg.cosine_space);
    Var dist = tape.sumsq_to_const(x_var, x_src);
    loss = tape.add(loss, tape.affine(dist, c, 0.0));
    run.loss_trace.push_back(checked_loss_value(tape, loss, "cw_attack", i));

    const Tensor grad = tape.backward(loss, {w_var})[0];
    hyper.lr = cosine_annealing_lr(i, cfg.max_iterations, cfg.lr_initial, cfg.lr_min);
    adam_step(w, grad, state, hyper);
    x = w;
    for (double& v : x.data) v = 0.5 * (std::tanh(v) + 1.0);

    if ((i + 1) % cfg.check_every == 0 || i + 1 == cfg.max_iterations) {
      Bitstream b = compress(m, x);
      if (b == run.b_tgt) {
        run.collided = true;
        run.b_adv = std::move(b);
        run.x_adv = x;
        run.iterations_used = i + 1;
        finish_metrics(run);
        return run;
      }
      run.b_adv = std::move(b);
    }
  }
  run.x_adv = x;
  run.iterations_used = cfg.max_iterations;
  finish_metrics(run);
  return run;
}

bool transfer_check(const CodecModel& model_b, const AttackRun& run, const Tensor& x_tgt) {
  if (!run.collided) {
    throw ConfigError("transfer_check: run did not collide on the source model");
  }
  return compress(model_b, run.x_adv) == compress(model_b, x_tgt);
}

PairRecord AttackRun::record(int pair_index) const {
  PairRecord r;
  r.pair_index = pair_index;
  r.hamming = hamming_normalized(b_adv, b_tgt);
  r.l2_to_src = l2_to_src;
  r.l2_to_tgt = l2_to_tgt;
  r.msssim_to_src = msssim_to_src;
  r.msssim_to_tgt = msssim_to_tgt;
  r.collided = collided;
  r.iterations_used = iterations_used;
  return r;
}

void save_attack_run(const std::string& dir, const AttackRun& run) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_ppm((fs::path(dir) / "x_src.ppm").string(), run.x_src);
  write_ppm((fs::path(dir) / "x_tgt.ppm").string(), run.x_tgt);
  write_ppm((fs::path(dir) / "x_adv.ppm").string(), run.x_adv);
  write_nicb((fs::path(dir) / "b_tgt.nicb").string(), run.b_tgt);
  write_nicb((fs::path(dir) / "b_adv.nicb").string(), run.b_adv);
  nlohmann::json j;
  j["attack"] = run.attack;
  j["collided"] = run.collided;
  j["iterations_used"] = run.iterations_used;
  j["hamming"] = hamming_normalized(run.b_adv, run.b_tgt);
  j["l2_to_src"] = run.l2_to_src;
  j["l2_to_tgt"] = run.l2_to_tgt;
  j["msssim_to_src"] = run.msssim_to_src;
  j["msssim_to_tgt"] = run.msssim_to_tgt;
  j["loss_trace"] = run.loss_trace;
  write_text_atomic((fs::path(dir) / "run.json").string(), j.dump(2));
}

}  // namespace nic
