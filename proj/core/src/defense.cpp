#include "nic/defense.hpp"

#include "nic/errors.hpp"
#include "nic/range_coder.hpp"

namespace nic {

void LpdPolicy::validate() const {
  if (!active()) {
    throw ConfigError("lpd policy: at least one truncation flag must be set when active");
  }
}

CodecModel truncated_weights_copy(const CodecModel& m) {
  CodecModel out = m;
  for (Tensor* t : out.param_list()) *t = truncate_f16(*t);
  return out;
}

namespace {

// Out-of-table symbols (possible when the half-precision path shifts a latent
// past the fitted margin) saturate at the range boundary; a deployed coder
// must emit something for every input.
void encode_clamped(RangeEncoder& rc, const FactorizedPrior& prior, const Tensor& sym) {
  const std::size_t channels = prior.channels.size();
  const std::size_t per = sym.data.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const ChannelCdf& cc = prior.channels[c];
    for (std::size_t i = 0; i < per; ++i) {
      auto s = static_cast<std::int32_t>(sym.data[c * per + i]);
      if (s < cc.smin) s = cc.smin;
      if (s > cc.smax()) s = cc.smax();
      rc.encode(cc.cum(s), cc.freq(s), FactorizedPrior::kTotal);
    }
  }
}

}  // namespace

Tensor lpd_latent(const CodecModel& m, const Tensor& image, const LpdPolicy& policy) {
  // truncate_weights drops the whole deployed encoder to half precision:
  // parameters are rounded to f16 and the forward arithmetic runs on the f16
  // grid (value-level weight rounding alone is a no-op at toy latent sizes).
  Tensor z = policy.truncate_weights ? encode_latent_f16(m, image) : encode_latent(m, image);
  if (policy.truncate_latent) z = truncate_f16(z);
  return z;
}

Bitstream compress_lpd(const CodecModel& m, const Tensor& image, const LpdPolicy& policy) {
  if (!policy.active()) return compress(m, image);
  if (!m.prior.fitted()) throw ConfigError("compress_lpd: model prior not fitted");

  Tensor z = lpd_latent(m, image, policy);

  RangeEncoder rc;
  encode_clamped(rc, m.prior, quantize(z, m.preset.quant_step));
  if (m.has_hyper()) {
    if (!m.hyper_prior.fitted()) throw ConfigError("compress_lpd: hyper prior not fitted");
    Tensor y = policy.truncate_weights ? hyper_latent_f16(m, z) : hyper_latent(m, z);
    if (policy.truncate_latent) y = truncate_f16(y);
    encode_clamped(rc, m.hyper_prior, quantize(y, m.preset.hyper_step));
  }
  Bitstream b = Bitstream::with_header(image.shape[2], image.shape[3], m.preset.qf);
  b.set_payload(rc.finish());
  return b;
}

DefenseReport evaluate_defense(const CodecModel& m,
                               const std::vector<std::pair<Tensor, Tensor>>& suite,
                               const AttackConfig& cfg, const LpdPolicy& policy,
                               const std::vector<Tensor>& ordinary_images, bool lpd_aware) {
  if (suite.empty()) throw ConfigError("evaluate_defense: empty pair suite");
  DefenseReport rep;
  rep.suite_size = static_cast<int>(suite.size());

  int idx = 0;
  for (const auto& [x_src, x_tgt] : suite) {
    AttackRun plain = mgd_attack(m, x_src, x_tgt, cfg);
    rep.undefended_records.push_back(plain.record(idx));
    if (plain.collided) rep.collided_undefended++;

    if (policy.active()) {
      Tensor aware_target;
      if (lpd_aware) aware_target = lpd_latent(m, x_tgt, policy);
      AttackRun defended =
          mgd_attack(m, x_src, x_tgt, cfg,
                     [&policy](const CodecModel& model, const Tensor& img) {
                       return compress_lpd(model, img, policy);
                     },
                     lpd_aware ? &aware_target : nullptr);
      rep.defended_records.push_back(defended.record(idx));
      if (defended.collided) rep.collided_defended++;
    } else {
      rep.defended_records.push_back(rep.undefended_records.back());
      if (plain.collided) rep.collided_defended++;
    }
    ++idx;
  }
  rep.asr_undefended = static_cast<double>(rep.collided_undefended) / rep.suite_size;
  rep.asr_defended = static_cast<double>(rep.collided_defended) / rep.suite_size;

  if (!ordinary_images.empty()) {
    double drop = 0.0;
    for (const Tensor& img : ordinary_images) {
      const double p_plain = psnr(img, decompress(m, compress(m, img)));
      const double p_lpd =
          psnr(img, decompress(m, policy.active() ? compress_lpd(m, img, policy)
                                                  : compress(m, img)));
      drop += p_plain - p_lpd;
    }
    rep.mean_psnr_drop = drop / static_cast<double>(ordinary_images.size());
  }
  return rep;
}

}  // namespace nic
