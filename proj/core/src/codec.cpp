#include "nic/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "nic/errors.hpp"
#include "nic/f16_arith.hpp"
#include "nic/kernels.hpp"
#include "nic/range_coder.hpp"

namespace nic {

const char* arch_name(Arch a) {
  switch (a) {
    case Arch::FpGdnToy: return "fp-gdn";
    case Arch::FpReluToy: return "fp-relu";
    case Arch::ShToy: return "sh";
  }
  return "?";
}

Arch arch_from_name(const std::string& name) {
  if (name == "fp-gdn") return Arch::FpGdnToy;
  if (name == "fp-relu") return Arch::FpReluToy;
  if (name == "sh") return Arch::ShToy;
  throw ConfigError("unknown architecture '" + name + "' (fp-gdn | fp-relu | sh)");
}

QualityPreset QualityPreset::ladder(int qf) {
  if (qf < 1 || qf > kQfCount) throw ConfigError("quality factor must be in [1,5]");
  static const double lambdas[] = {0.001, 0.003, 0.01, 0.03, 0.1};
  static const int channels[] = {8, 16, 32, 48, 64};
  static const double steps[] = {1.0, 1.0, 1.0, 1.0, 1.0};
  static const int hidden[] = {16, 16, 20, 24, 24};
  QualityPreset p;
  p.qf = qf;
  p.lambda_rd = lambdas[qf - 1];
  p.latent_channels = channels[qf - 1];
  p.quant_step = steps[qf - 1];
  p.hidden_channels = hidden[qf - 1];
  p.hyper_channels = 4;
  p.hyper_step = 1.0;
  return p;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inv(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

Tensor GdnLayer::beta() const {
  Tensor b = beta_raw;
  for (double& v : b.data) v = 1e-6 + softplus(v);
  return b;
}

Tensor GdnLayer::gamma() const {
  Tensor g = gamma_raw;
  for (double& v : g.data) v = softplus(v);
  return g;
}

std::vector<Tensor*> CodecModel::param_list() {
  std::vector<Tensor*> out;
  for (ConvLayer& l : enc) {
    out.push_back(&l.kernel);
    out.push_back(&l.bias);
  }
  for (GdnLayer& g : enc_gdn) {
    out.push_back(&g.beta_raw);
    out.push_back(&g.gamma_raw);
  }
  for (ConvLayer& l : dec) {
    out.push_back(&l.kernel);
    out.push_back(&l.bias);
  }
  for (GdnLayer& g : dec_gdn) {
    out.push_back(&g.beta_raw);
    out.push_back(&g.gamma_raw);
  }
  if (has_hyper()) {
    out.push_back(&hyper_enc.kernel);
    out.push_back(&hyper_enc.bias);
    out.push_back(&hyper_dec.kernel);
    out.push_back(&hyper_dec.bias);
  }
  out.push_back(&em_mu);
  out.push_back(&em_log_sigma);
  if (has_hyper()) {
    out.push_back(&hem_mu);
    out.push_back(&hem_log_sigma);
  }
  return out;
}

std::vector<const Tensor*> CodecModel::param_list() const {
  auto mut = const_cast<CodecModel*>(this)->param_list();
  return {mut.begin(), mut.end()};
}

namespace {

Tensor he_kernel(std::vector<int> shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
  return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / fan_in));
}

GdnLayer make_gdn(int c) {
  GdnLayer g;
  g.beta_raw = Tensor::full({c}, softplus_inv(1.0));
  g.gamma_raw = Tensor::full({c, c}, softplus_inv(1e-4));
  for (int i = 0; i < c; ++i) g.gamma_raw.data[static_cast<std::size_t>(i) * c + i] = softplus_inv(0.1);
  return g;
}

}  // namespace

CodecModel make_model(Arch arch, const QualityPreset& preset, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0xC0DEC);
  CodecModel m;
  m.arch = arch;
  m.preset = preset;
  const int w = preset.hidden_channels, c = preset.latent_channels;
  m.enc.resize(3);
  m.enc[0].kernel = he_kernel({w, 3, 4, 4}, rng);
  m.enc[1].kernel = he_kernel({w, w, 4, 4}, rng);
  m.enc[2].kernel = he_kernel({c, w, 4, 4}, rng);
  m.enc[0].bias = Tensor::zeros({w});
  m.enc[1].bias = Tensor::zeros({w});
  m.enc[2].bias = Tensor::zeros({c});
  m.dec.resize(3);
  m.dec[0].kernel = he_kernel({c, w, 4, 4}, rng);
  m.dec[1].kernel = he_kernel({w, w, 4, 4}, rng);
  m.dec[2].kernel = he_kernel({w, 3, 4, 4}, rng);
  m.dec[0].bias = Tensor::zeros({w});
  m.dec[1].bias = Tensor::zeros({w});
  m.dec[2].bias = Tensor::zeros({3});
  if (m.uses_gdn()) {
    m.enc_gdn = {make_gdn(w), make_gdn(w)};
    m.dec_gdn = {make_gdn(w), make_gdn(w)};
  }
  if (m.has_hyper()) {
    const int hc = preset.hyper_channels;
    m.hyper_enc.kernel = he_kernel({hc, c, 4, 4}, rng);
    m.hyper_enc.bias = Tensor::zeros({hc});
    m.hyper_dec.kernel = he_kernel({hc, c, 4, 4}, rng);
    m.hyper_dec.bias = Tensor::zeros({c});
    m.hem_mu = Tensor::zeros({hc});
    m.hem_log_sigma = Tensor::full({hc}, std::log(2.0));
  }
  m.em_mu = Tensor::zeros({c});
  m.em_log_sigma = Tensor::full({c}, std::log(2.0));
  return m;
}

CodecModel make_relu_sibling(const CodecModel& gdn_model) {
  if (gdn_model.arch != Arch::FpGdnToy) {
    throw ConfigError("make_relu_sibling: source must be fp-gdn");
  }
  CodecModel m = gdn_model;
  m.arch = Arch::FpReluToy;
  m.enc_gdn.clear();
  m.dec_gdn.clear();
  m.prior = FactorizedPrior{};
  m.hyper_prior = FactorizedPrior{};
  return m;
}

void round_params_to_f32(CodecModel& m) {
  for (Tensor* t : m.param_list()) {
    for (double& v : t->data) v = static_cast<double>(static_cast<float>(v));
  }
}

// ---- plain (non-tape) forward ---------------------------------------------

namespace {


template <typename T>
constexpr Precision prec_of() {
  if (std::is_same_v<T, float>) return Precision::F32;
  if (std::is_same_v<T, F16>) return Precision::F16Emulated;
  return Precision::F64;
}
template <typename T>
struct Feat {
  std::vector<T> v;
  int c = 0, h = 0, w = 0;
};

template <typename T>
std::vector<T> cast_vec(const Tensor& t) {
  std::vector<T> out(t.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(t.data[i]);
  return out;
}

template <typename T>
Feat<T> conv_step(const Feat<T>& x, const ConvLayer& l) {
  kernels::ConvDims d = kernels::conv2d_dims({1, x.c, x.h, x.w}, l.kernel.shape, 2, 1);
  Feat<T> out;
  out.c = d.cout;
  out.h = d.oh;
  out.w = d.ow;
  out.v.resize(static_cast<std::size_t>(d.cout) * d.oh * d.ow);
  const std::vector<T> k = cast_vec<T>(l.kernel);
  kernels::conv2d_fwd(x.v.data(), k.data(), out.v.data(), d);
  const std::vector<T> b = cast_vec<T>(l.bias);
  for (int c = 0; c < out.c; ++c) {
    T* row = out.v.data() + static_cast<std::size_t>(c) * out.h * out.w;
    for (int p = 0; p < out.h * out.w; ++p) row[p] += b[static_cast<std::size_t>(c)];
  }
  return out;
}

template <typename T>
Feat<T> tconv_step(const Feat<T>& x, const ConvLayer& l) {
  kernels::ConvDims d = kernels::conv2d_transpose_dims({1, x.c, x.h, x.w}, l.kernel.shape, 2, 1);
  Feat<T> out;
  out.c = d.cin;
  out.h = d.h;
  out.w = d.w;
  out.v.resize(static_cast<std::size_t>(out.c) * out.h * out.w);
  const std::vector<T> k = cast_vec<T>(l.kernel);
  kernels::conv2d_transpose_fwd(x.v.data(), k.data(), out.v.data(), d, d.h, d.w);
  const std::vector<T> b = cast_vec<T>(l.bias);
  for (int c = 0; c < out.c; ++c) {
    T* row = out.v.data() + static_cast<std::size_t>(c) * out.h * out.w;
    for (int p = 0; p < out.h * out.w; ++p) row[p] += b[static_cast<std::size_t>(c)];
  }
  return out;
}

template <typename T>
void activate(Feat<T>& x, const CodecModel& m, const GdnLayer* gdn, bool inverse) {
  if (m.uses_gdn()) {
    const std::vector<T> beta = cast_vec<T>(gdn->beta());
    const std::vector<T> gamma = cast_vec<T>(gdn->gamma());
    std::vector<T> y(x.v.size());
    kernels::gdn_fwd(x.v.data(), beta.data(), gamma.data(), y.data(), 1, x.c, x.h * x.w, inverse);
    x.v = std::move(y);
  } else {
    kernels::relu_fwd(x.v.data(), x.v.data(), x.v.size());
  }
}

void validate_image(const Tensor& image) {
  require_rank(image, 4, "image");
  if (image.shape[0] != 1 || image.shape[1] != 3) {
    throw ConfigError("image must be (1,3,H,W), got " + shape_str(image.shape));
  }
  if (image.shape[2] % QualityPreset::kDownsample != 0 ||
      image.shape[3] % QualityPreset::kDownsample != 0 || image.shape[2] == 0 ||
      image.shape[3] == 0) {
    throw ConfigError("image extents must be positive multiples of 8, got " +
                      shape_str(image.shape));
  }
  for (double v : image.data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("image values must lie in [0,1]");
    }
  }
}

template <typename T>
Tensor encoder_plain(const CodecModel& m, const Tensor& image) {
  validate_image(image);
  Feat<T> x;
  x.c = 3;
  x.h = image.shape[2];
  x.w = image.shape[3];
  x.v = cast_vec<T>(image);
  for (T& v : x.v) v = T(2) * v - T(1);
  for (int i = 0; i < 3; ++i) {
    x = conv_step(x, m.enc[static_cast<std::size_t>(i)]);
    if (i < 2) activate(x, m, m.uses_gdn() ? &m.enc_gdn[static_cast<std::size_t>(i)] : nullptr,
                        /*inverse=*/false);
  }
  Tensor z({1, x.c, x.h, x.w});
  for (std::size_t i = 0; i < x.v.size(); ++i) z.data[i] = static_cast<double>(x.v[i]);
  z.prec = prec_of<T>();
  z.ensure_finite("encode_latent");
  return z;
}

template <typename T>
Tensor decoder_plain(const CodecModel& m, const Tensor& zin) {
  Feat<T> x;
  x.c = zin.shape[1];
  x.h = zin.shape[2];
  x.w = zin.shape[3];
  x.v = cast_vec<T>(zin);
  for (int i = 0; i < 3; ++i) {
    x = tconv_step(x, m.dec[static_cast<std::size_t>(i)]);
    if (i < 2) activate(x, m, m.uses_gdn() ? &m.dec_gdn[static_cast<std::size_t>(i)] : nullptr,
                        /*inverse=*/true);
  }
  Tensor img({1, 3, x.h, x.w});
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    img.data[i] = 0.5 * (static_cast<double>(x.v[i]) + 1.0);
  }
  img.prec = prec_of<T>();
  img.ensure_finite("decode_image");
  return img;
}

template <typename T>
Tensor hyper_latent_plain(const CodecModel& m, const Tensor& z) {
  Feat<T> x;
  x.c = z.shape[1];
  x.h = z.shape[2];
  x.w = z.shape[3];
  x.v = cast_vec<T>(z);
  x = conv_step(x, m.hyper_enc);
  Tensor y({1, x.c, x.h, x.w});
  for (std::size_t i = 0; i < x.v.size(); ++i) y.data[i] = static_cast<double>(x.v[i]);
  y.prec = prec_of<T>();
  y.ensure_finite("hyper_latent");
  return y;
}

template <typename T>
Tensor hyper_refine_plain(const CodecModel& m, const Tensor& yhat) {
  Feat<T> x;
  x.c = yhat.shape[1];
  x.h = yhat.shape[2];
  x.w = yhat.shape[3];
  x.v = cast_vec<T>(yhat);
  x = tconv_step(x, m.hyper_dec);
  Tensor r({1, x.c, x.h, x.w});
  for (std::size_t i = 0; i < x.v.size(); ++i) r.data[i] = static_cast<double>(x.v[i]);
  return r;
}

}  // namespace

Tensor encode_latent(const CodecModel& m, const Tensor& image) {
  return m.forward_prec == Precision::F32 ? encoder_plain<float>(m, image)
                                          : encoder_plain<double>(m, image);
}

Tensor encode_latent_f64(const CodecModel& m, const Tensor& image) {
  return encoder_plain<double>(m, image);
}

Tensor encode_latent_f16(const CodecModel& m, const Tensor& image) {
  return encoder_plain<F16>(m, image);
}

Tensor hyper_latent(const CodecModel& m, const Tensor& z) {
  if (!m.has_hyper()) throw ConfigError("hyper_latent: model has no hyper stage");
  return m.forward_prec == Precision::F32 ? hyper_latent_plain<float>(m, z)
                                          : hyper_latent_plain<double>(m, z);
}

Tensor hyper_latent_f16(const CodecModel& m, const Tensor& z) {
  if (!m.has_hyper()) throw ConfigError("hyper_latent_f16: model has no hyper stage");
  return hyper_latent_plain<F16>(m, z);
}

Tensor decode_image(const CodecModel& m, const Tensor& zhat, const Tensor* yhat) {
  Tensor zin = zhat;
  if (m.has_hyper() && yhat != nullptr) {
    const Tensor r = m.forward_prec == Precision::F32 ? hyper_refine_plain<float>(m, *yhat)
                                                      : hyper_refine_plain<double>(m, *yhat);
    if (!r.same_shape(zin)) throw ConfigError("decode_image: hyper refinement shape mismatch");
    for (std::size_t i = 0; i < zin.data.size(); ++i) zin.data[i] += r.data[i];
  }
  return m.forward_prec == Precision::F32 ? decoder_plain<float>(m, zin)
                                          : decoder_plain<double>(m, zin);
}

// ---- tape forward ---------------------------------------------------------

ModelVars stage_model(Tape& tape, const CodecModel& m, bool trainable) {
  ModelVars v;
  auto stage = [&](const Tensor& t) {
    Var var = tape.leaf(t, trainable);
    v.params.push_back(var);
    return var;
  };
  for (const ConvLayer& l : m.enc) {
    v.enc_k.push_back(stage(l.kernel));
    v.enc_b.push_back(stage(l.bias));
  }
  for (const GdnLayer& g : m.enc_gdn) {
    Var braw = stage(g.beta_raw);
    Var graw = stage(g.gamma_raw);
    v.enc_beta.push_back(tape.softplus_floor(braw, 1e-6));
    v.enc_gamma.push_back(tape.softplus_floor(graw, 0.0));
  }
  for (const ConvLayer& l : m.dec) {
    v.dec_k.push_back(stage(l.kernel));
    v.dec_b.push_back(stage(l.bias));
  }
  for (const GdnLayer& g : m.dec_gdn) {
    Var braw = stage(g.beta_raw);
    Var graw = stage(g.gamma_raw);
    v.dec_beta.push_back(tape.softplus_floor(braw, 1e-6));
    v.dec_gamma.push_back(tape.softplus_floor(graw, 0.0));
  }
  if (m.has_hyper()) {
    v.hyper_enc_k = stage(m.hyper_enc.kernel);
    v.hyper_enc_b = stage(m.hyper_enc.bias);
    v.hyper_dec_k = stage(m.hyper_dec.kernel);
    v.hyper_dec_b = stage(m.hyper_dec.bias);
  }
  v.em_mu = stage(m.em_mu);
  v.em_log_sigma = stage(m.em_log_sigma);
  if (m.has_hyper()) {
    v.hem_mu = stage(m.hem_mu);
    v.hem_log_sigma = stage(m.hem_log_sigma);
  }
  return v;
}

Var encoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var image) {
  Var x = tape.affine(image, 2.0, -1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    x = tape.conv2d(x, v.enc_k[i], 2, 1);
    x = tape.add_channel_bias(x, v.enc_b[i]);
    if (i < 2) {
      x = m.uses_gdn() ? tape.gdn(x, v.enc_beta[i], v.enc_gamma[i], false) : tape.relu(x);
    }
  }
  return x;
}

Var decoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var zhat) {
  Var x = zhat;
  for (std::size_t i = 0; i < 3; ++i) {
    x = tape.conv2d_transpose(x, v.dec_k[i], 2, 1);
    x = tape.add_channel_bias(x, v.dec_b[i]);
    if (i < 2) {
      x = m.uses_gdn() ? tape.gdn(x, v.dec_beta[i], v.dec_gamma[i], true) : tape.relu(x);
    }
  }
  return tape.affine(x, 0.5, 0.5);
}

Var hyper_encoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var z) {
  if (!m.has_hyper()) throw ConfigError("hyper_encoder_forward: no hyper stage");
  Var y = tape.conv2d(z, v.hyper_enc_k, 2, 1);
  return tape.add_channel_bias(y, v.hyper_enc_b);
}

Var hyper_decoder_forward(Tape& tape, const CodecModel& m, const ModelVars& v, Var yhat) {
  if (!m.has_hyper()) throw ConfigError("hyper_decoder_forward: no hyper stage");
  Var r = tape.conv2d_transpose(yhat, v.hyper_dec_k, 2, 1);
  return tape.add_channel_bias(r, v.hyper_dec_b);
}

// ---- quantization and coding ----------------------------------------------

Tensor quantize(const Tensor& z, double step) {
  if (!(step > 0.0)) throw ConfigError("quantize: step must be positive");
  Tensor out = z;
  for (double& v : out.data) {
    const double s = v / step;
    const double r = std::floor(std::fabs(s) + 0.5);
    if (r > 1073741824.0) throw NumericError("quantize: symbol magnitude overflow");
    v = s < 0.0 ? -r : r;
  }
  out.prec = z.prec;
  return out;
}

namespace {

std::int32_t symbol_at(const Tensor& symbols, std::size_t i) {
  const double v = symbols.data[i];
  const double r = std::nearbyint(v);
  if (std::fabs(v - r) > 1e-9) throw ConfigError("entropy_encode: non-integer symbol");
  return static_cast<std::int32_t>(r);
}

void encode_symbols(RangeEncoder& rc, const FactorizedPrior& prior, const Tensor& symbols) {
  const std::size_t channels = prior.channels.size();
  if (channels == 0) throw ConfigError("entropy_encode: prior not fitted");
  const std::size_t n = symbols.data.size();
  if (n % channels != 0) {
    throw ConfigError("entropy_encode: symbol count not divisible by prior channels");
  }
  const std::size_t per = n / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const ChannelCdf& cc = prior.channels[c];
    for (std::size_t i = 0; i < per; ++i) {
      const std::int32_t s = symbol_at(symbols, c * per + i);
      if (!cc.contains(s)) {
        throw NumericError("entropy_encode: symbol " + std::to_string(s) + " out of prior range [" +
                           std::to_string(cc.smin) + "," + std::to_string(cc.smax()) +
                           "] on channel " + std::to_string(c) + " (prior misfit)");
      }
      rc.encode(cc.cum(s), cc.freq(s), FactorizedPrior::kTotal);
    }
  }
}

void decode_symbols(RangeDecoder& rd, const FactorizedPrior& prior, std::size_t count,
                    double* out) {
  const std::size_t channels = prior.channels.size();
  const std::size_t per = count / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const ChannelCdf& cc = prior.channels[c];
    for (std::size_t i = 0; i < per; ++i) {
      const std::uint32_t scaled = rd.decode_freq(FactorizedPrior::kTotal);
      const std::int32_t s = cc.find(scaled);
      rd.decode_update(cc.cum(s), cc.freq(s));
      out[c * per + i] = static_cast<double>(s);
    }
  }
}

}  // namespace

Bitstream entropy_encode(const FactorizedPrior& prior, const Tensor& symbols) {
  RangeEncoder rc;
  encode_symbols(rc, prior, symbols);
  Bitstream b = Bitstream::with_header(0, 0, 0);
  b.set_payload(rc.finish());
  return b;
}

Tensor entropy_decode(const FactorizedPrior& prior, const Bitstream& b, std::int64_t count) {
  if (count < 0) throw ConfigError("entropy_decode: negative count");
  if (count == 0) return Tensor({0});
  const std::size_t channels = prior.channels.size();
  if (channels == 0) throw ConfigError("entropy_decode: prior not fitted");
  if (static_cast<std::size_t>(count) % channels != 0) {
    throw ConfigError("entropy_decode: count not divisible by prior channels");
  }
  Tensor out({static_cast<int>(count)});
  RangeDecoder rd(b.payload.data(), b.payload.size());
  decode_symbols(rd, prior, static_cast<std::size_t>(count), out.data.data());
  return out;
}

Bitstream compress(const CodecModel& m, const Tensor& image) {
  if (!m.prior.fitted()) throw ConfigError("compress: model prior not fitted");
  const Tensor z = encode_latent(m, image);
  const Tensor sym = quantize(z, m.preset.quant_step);
  RangeEncoder rc;
  encode_symbols(rc, m.prior, sym);
  if (m.has_hyper()) {
    if (!m.hyper_prior.fitted()) throw ConfigError("compress: hyper prior not fitted");
    const Tensor y = hyper_latent(m, z);
    const Tensor hsym = quantize(y, m.preset.hyper_step);
    encode_symbols(rc, m.hyper_prior, hsym);
  }
  Bitstream b = Bitstream::with_header(image.shape[2], image.shape[3], m.preset.qf);
  b.set_payload(rc.finish());
  return b;
}

Tensor decompress(const CodecModel& m, const Bitstream& b) {
  const int h = b.height(), w = b.width();
  if (b.qf() != m.preset.qf) {
    throw ConfigError("decompress: bitstream quality factor " + std::to_string(b.qf()) +
                      " does not match model preset " + std::to_string(m.preset.qf));
  }
  if (h <= 0 || w <= 0 || h % QualityPreset::kDownsample != 0 ||
      w % QualityPreset::kDownsample != 0) {
    throw NumericError("decompress: corrupt header extents");
  }
  const int lh = h / QualityPreset::kDownsample, lw = w / QualityPreset::kDownsample;
  const int c = m.preset.latent_channels;
  Tensor zq({1, c, lh, lw});
  RangeDecoder rd(b.payload.data(), b.payload.size());
  decode_symbols(rd, m.prior, zq.data.size(), zq.data.data());
  for (double& v : zq.data) v *= m.preset.quant_step;
  Tensor img;
  if (m.has_hyper()) {
    Tensor yq({1, m.preset.hyper_channels, lh / 2, lw / 2});
    decode_symbols(rd, m.hyper_prior, yq.data.size(), yq.data.data());
    for (double& v : yq.data) v *= m.preset.hyper_step;
    img = decode_image(m, zq, &yq);
  } else {
    img = decode_image(m, zq, nullptr);
  }
  Tensor out = clamp01(img);
  out.prec = img.prec;
  return out;
}

FactorizedPrior fit_prior(CodecModel& m, const std::vector<Tensor>& dataset) {
  if (dataset.empty()) throw ConfigError("fit_prior: empty dataset");

  auto fit = [](const std::vector<std::map<std::int32_t, std::uint64_t>>& hists) {
    FactorizedPrior prior;
    for (const auto& h : hists) {
      const std::int32_t lo = h.begin()->first - 2;
      const std::int32_t hi = h.rbegin()->first + 2;
      std::vector<std::uint64_t> counts(static_cast<std::size_t>(hi - lo + 1), 1);
      for (const auto& [s, n] : h) counts[static_cast<std::size_t>(s - lo)] += n;
      prior.channels.push_back(make_channel_cdf(lo, counts));
    }
    return prior;
  };

  std::vector<std::map<std::int32_t, std::uint64_t>> hists(
      static_cast<std::size_t>(m.preset.latent_channels));
  std::vector<std::map<std::int32_t, std::uint64_t>> hyper_hists(
      m.has_hyper() ? static_cast<std::size_t>(m.preset.hyper_channels) : 0);
  for (const Tensor& img : dataset) {
    const Tensor z = encode_latent(m, img);
    const Tensor sym = quantize(z, m.preset.quant_step);
    const std::size_t per = sym.data.size() / hists.size();
    for (std::size_t c = 0; c < hists.size(); ++c) {
      for (std::size_t i = 0; i < per; ++i) {
        hists[c][symbol_at(sym, c * per + i)]++;
      }
    }
    if (m.has_hyper()) {
      const Tensor y = hyper_latent(m, z);
      const Tensor hsym = quantize(y, m.preset.hyper_step);
      const std::size_t hper = hsym.data.size() / hyper_hists.size();
      for (std::size_t c = 0; c < hyper_hists.size(); ++c) {
        for (std::size_t i = 0; i < hper; ++i) {
          hyper_hists[c][symbol_at(hsym, c * hper + i)]++;
        }
      }
    }
  }
  m.prior = fit(hists);
  if (m.has_hyper()) m.hyper_prior = fit(hyper_hists);
  return m.prior;
}

// ---- persistence ------------------------------------------------------------

namespace {

constexpr std::uint32_t kModelMagic = 0x4D43494Eu;  // "NICM"
constexpr std::uint32_t kModelVersion = 1;

struct ByteWriter {
  std::vector<std::uint8_t> buf;
  void u8(std::uint8_t v) { buf.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void tensor(const Tensor& t) {
    u8(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) i32(d);
    for (double v : t.data) f32(static_cast<float>(v));
  }
  void prior(const FactorizedPrior& p) {
    u16(static_cast<std::uint16_t>(p.channels.size()));
    for (const ChannelCdf& c : p.channels) {
      i32(c.smin);
      u32(static_cast<std::uint32_t>(c.nsym()));
      for (std::uint32_t v : c.cdf) u32(v);
    }
  }
};

struct ByteReader {
  const std::uint8_t* p;
  std::size_t n, pos = 0;
  void need(std::size_t k) const {
    if (pos + k > n) throw NumericError("model file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return p[pos++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  Tensor tensor() {
    const int rank = u8();
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) shape[static_cast<std::size_t>(i)] = i32();
    Tensor t(shape);
    for (double& v : t.data) v = static_cast<double>(f32());
    return t;
  }
  FactorizedPrior prior() {
    FactorizedPrior out;
    const int nch = u16();
    for (int c = 0; c < nch; ++c) {
      ChannelCdf cc;
      cc.smin = i32();
      const std::uint32_t nsym = u32();
      cc.cdf.resize(nsym + 1);
      for (std::uint32_t& v : cc.cdf) v = u32();
      if (cc.cdf.front() != 0 || cc.cdf.back() != FactorizedPrior::kTotal) {
        throw NumericError("model file: malformed prior table");
      }
      out.channels.push_back(std::move(cc));
    }
    return out;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const CodecModel& m) {
  ByteWriter w;
  w.u32(kModelMagic);
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(m.arch));
  w.u8(m.forward_prec == Precision::F32 ? 0 : 1);
  w.u8(static_cast<std::uint8_t>(m.preset.qf));
  w.u8(0);
  w.u16(static_cast<std::uint16_t>(m.preset.latent_channels));
  w.u16(static_cast<std::uint16_t>(m.preset.hidden_channels));
  w.u16(static_cast<std::uint16_t>(m.preset.hyper_channels));
  w.u16(0);
  w.f64(m.preset.lambda_rd);
  w.f64(m.preset.quant_step);
  w.f64(m.preset.hyper_step);
  for (const Tensor* t : m.param_list()) w.tensor(*t);
  w.prior(m.prior);
  w.prior(m.hyper_prior);
  return std::move(w.buf);
}

void save_model(const std::string& path, const CodecModel& m) {
  const std::vector<std::uint8_t> buf = serialize_model(m);
  write_file_atomic(path, buf.data(), buf.size());
}

CodecModel load_model(const std::string& path) {
  const std::vector<std::uint8_t> buf = read_file_bytes(path);
  ByteReader r{buf.data(), buf.size()};
  if (r.u32() != kModelMagic) throw NumericError("not a model file: " + path);
  if (r.u32() != kModelVersion) throw NumericError("unsupported model version in " + path);
  CodecModel m;
  m.arch = static_cast<Arch>(r.u8());
  m.forward_prec = r.u8() == 0 ? Precision::F32 : Precision::F64;
  m.preset.qf = r.u8();
  r.u8();
  m.preset.latent_channels = r.u16();
  m.preset.hidden_channels = r.u16();
  m.preset.hyper_channels = r.u16();
  r.u16();
  m.preset.lambda_rd = r.f64();
  m.preset.quant_step = r.f64();
  m.preset.hyper_step = r.f64();
  m.enc.resize(3);
  m.dec.resize(3);
  if (m.uses_gdn()) {
    m.enc_gdn.resize(2);
    m.dec_gdn.resize(2);
  }
  for (Tensor* t : m.param_list()) *t = r.tensor();
  m.prior = r.prior();
  m.hyper_prior = r.prior();
  return m;
}

std::uint64_t model_hash(const CodecModel& m) {
  const std::vector<std::uint8_t> buf = serialize_model(m);
  return fnv1a64(buf.data(), buf.size());
}

}  // namespace nic
