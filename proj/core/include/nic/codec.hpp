#pragma once

#include <string>
#include <vector>

#include "nic/autodiff.hpp"
#include "nic/bitstream.hpp"
#include "nic/prior.hpp"
#include "nic/tensor.hpp"

namespace nic {

// Toy model family: 3-layer stride-2 conv stacks (8x total downsampling),
// differing in nonlinearity, plus a variant with a second-stage hyper-latent
// appended to the bitstream.
enum class Arch : std::uint8_t { FpGdnToy = 0, FpReluToy = 1, ShToy = 2 };

const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);

struct QualityPreset {
  int qf = 1;
  double lambda_rd = 0.001;
  int latent_channels = 8;
  double quant_step = 1.0;
  int hidden_channels = 16;
  int hyper_channels = 4;
  double hyper_step = 1.0;

  static constexpr int kDownsample = 8;
  static constexpr int kQfCount = 5;
  // The 5-step ladder: lambda {0.001,0.003,0.01,0.03,0.1}, channels
  // {8,16,32,48,64}. Higher QF -> strictly larger lambda, more channels.
  static QualityPreset ladder(int qf);
};

struct ConvLayer {
  Tensor kernel;
  Tensor bias;
};

// GDN parameters live in softplus space; effective beta has a 1e-6 floor so
// the normalization denominator can never reach zero.
struct GdnLayer {
  Tensor beta_raw;
  Tensor gamma_raw;
  Tensor beta() const;
  Tensor gamma() const;
};

double softplus(double x);
double softplus_inv(double y);

struct CodecModel {
  Arch arch = Arch::FpGdnToy;
  QualityPreset preset;
  // Arithmetic of the deployed compression path. Gradient work is always f64.
  Precision forward_prec = Precision::F32;

  std::vector<ConvLayer> enc;      // 3 layers, k4 s2 p1
  std::vector<GdnLayer> enc_gdn;   // after layers 0 and 1 (GDN archs)
  std::vector<ConvLayer> dec;      // 3 transpose layers
  std::vector<GdnLayer> dec_gdn;   // inverse GDN after layers 0 and 1
  ConvLayer hyper_enc;             // SH only
  ConvLayer hyper_dec;

  FactorizedPrior prior;
  FactorizedPrior hyper_prior;

  // Per-channel Gaussian entropy-model parameters (training data, kept with
  // the model so training can resume / be audited).
  Tensor em_mu, em_log_sigma;
  Tensor hem_mu, hem_log_sigma;

  bool uses_gdn() const { return arch != Arch::FpReluToy; }
  bool has_hyper() const { return arch == Arch::ShToy; }

  // All trainable tensors, in a fixed order shared with ModelVars.
  std::vector<Tensor*> param_list();
  std::vector<const Tensor*> param_list() const;
};

CodecModel make_model(Arch arch, const QualityPreset& preset, std::uint64_t seed);

// The ReLU family member as a sibling of a trained GDN model: same conv
// stacks, normalization layers dropped. Fine-tuned briefly afterwards so the
// pair mirrors "two implementations differing only in nonlinearity".
CodecModel make_relu_sibling(const CodecModel& gdn_model);

// Round every parameter through f32. Called at the end of training so the
// in-memory model equals its serialized form bit-for-bit.
void round_params_to_f32(CodecModel& m);

// ---- forward paths ------------------------------------------------------

// Deployment-path latent z = f(x), computed at model.forward_prec with fixed
// reduction order. Image must be (1,3,H,W) in [0,1], H and W multiples of 8.
Tensor encode_latent(const CodecModel& m, const Tensor& image);
// f64 variant regardless of the model's deployed precision (gradient checks).
Tensor encode_latent_f64(const CodecModel& m, const Tensor& image);
// Emulated half-precision arithmetic variant (the limited-precision deployed
// path): every intermediate value is rounded to the f16 grid.
Tensor encode_latent_f16(const CodecModel& m, const Tensor& image);
// SH second stage y = h(z) from the continuous latent.
Tensor hyper_latent(const CodecModel& m, const Tensor& z);
Tensor hyper_latent_f16(const CodecModel& m, const Tensor& z);
// Reconstruction from the dequantized latent (plus hyper refinement if any).
Tensor decode_image(const CodecModel& m, const Tensor& zhat, const Tensor* yhat);

// Tape staging: every model tensor becomes a leaf (trainable or frozen) and
// GDN raws are mapped through softplus on-tape.
struct ModelVars {
  std::vector<Var> params;  // aligned with CodecModel::param_list()
  std::vector<Var> enc_k, enc_b, enc_beta, enc_gamma;
  std::vector<Var> dec_k, dec_b, dec_beta, dec_gamma;
  Var hyper_enc_k, hyper_enc_b, hyper_dec_k, hyper_dec_b;
  Var em_mu, em_log_sigma, hem_mu, hem_log_sigma;
};
ModelVars stage_model(Tape& tape, const CodecModel& m, bool trainable);
Var encoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var image);
Var decoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var zhat);
Var hyper_encoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var z);
Var hyper_decoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var yhat);

// ---- quantization and coding --------------------------------------------

// Round half away from zero on z/step; result is integer-valued.
Tensor quantize(const Tensor& z, double step);

// Symbols are coded channel-planar; numel must divide evenly across the
// prior's channels. The returned container carries a blank header.
Bitstream entropy_encode(const FactorizedPrior& prior, const Tensor& symbols);
// Exact inverse given the same prior and count (count = channels * per-chan).
Tensor entropy_decode(const FactorizedPrior& prior, const Bitstream& b, std::int64_t count);

Bitstream compress(const CodecModel& m, const Tensor& image);
Tensor decompress(const CodecModel& m, const Bitstream& b);

// Empirical per-channel CDFs from the dataset's quantized latents: add-one
// smoothing, observed range widened by +-2 symbols. Sets model.prior (and the
// hyper prior for SH) and returns the latent prior.
FactorizedPrior fit_prior(CodecModel& m, const std::vector<Tensor>& dataset);

// ---- persistence ----------------------------------------------------------

// .nicm: versioned magic, little-endian, f32 parameters, prior tables.
void save_model(const std::string& path, const CodecModel& m);
CodecModel load_model(const std::string& path);
std::vector<std::uint8_t> serialize_model(const CodecModel& m);
std::uint64_t model_hash(const CodecModel& m);

}  // namespace nic
