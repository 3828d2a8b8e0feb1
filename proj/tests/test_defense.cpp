#include <cmath>

#include "doctest.h"
#include "nic/defense.hpp"
#include "nic/f16_arith.hpp"
#include "nic/errors.hpp"
#include "nic/trainer.hpp"

using namespace nic;

namespace {

struct Fixture {
  CodecModel model;
  std::vector<Tensor> images;

  Fixture() {
    Rng rng(4242);
    for (int i = 0; i < 8; ++i) {
      images.push_back(Tensor::uniform({1, 3, 16, 16}, rng, 0.0, 1.0));
    }
    model = make_model(Arch::FpGdnToy, QualityPreset::ladder(1), 6);
    train_rd(model, images, model.preset.lambda_rd, 60, 6);
    fit_prior(model, images);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("half-precision rounding hits the documented grid") {
  CHECK(round_to_half(0.0) == 0.0);
  CHECK(round_to_half(1.0) == 1.0);
  CHECK(round_to_half(-1.0) == -1.0);

  // 1 + 2^-10 is the next representable half above 1; 1 + 2^-11 is the
  // halfway point and rounds to even (1.0).
  const double ulp = std::ldexp(1.0, -10);
  CHECK(round_to_half(1.0 + ulp) == 1.0 + ulp);
  CHECK(round_to_half(1.0 + ulp / 2.0) == 1.0);
  // Just above the halfway point rounds up.
  CHECK(round_to_half(1.0 + ulp / 2.0 + 1e-9) == 1.0 + ulp);

  // Saturation at the largest finite half.
  CHECK(round_to_half(70000.0) == 65504.0);
  CHECK(round_to_half(-1e9) == -65504.0);
  CHECK(round_to_half(65504.0) == 65504.0);

  // Subnormal grid: quantum 2^-24; half of it ties to even (zero).
  const double q = std::ldexp(1.0, -24);
  CHECK(round_to_half(q) == q);
  CHECK(round_to_half(q / 2.0) == 0.0);
  CHECK(round_to_half(q * 1.5) == 2.0 * q);  // tie to even mantissa

  CHECK_THROWS_AS(round_to_half(std::numeric_limits<double>::infinity()), NumericError);
  CHECK_THROWS_AS(round_to_half(std::numeric_limits<double>::quiet_NaN()), NumericError);
}

TEST_CASE("arithmetic-path rounding agrees with the exact half rounding") {
  // The f16 arithmetic emulation rounds through f32 first (engine semantics);
  // outside double-rounding corner cases it must equal the exact direct
  // double->half rounding, and never differ by more than one half ulp.
  CHECK(f16_arith_round(0.0) == 0.0);
  CHECK(f16_arith_round(1.0) == 1.0);
  const double ulp = std::ldexp(1.0, -10);
  CHECK(f16_arith_round(1.0 + ulp) == 1.0 + ulp);
  CHECK(f16_arith_round(1.0 + ulp / 2.0) == 1.0);  // tie to even
  CHECK(f16_arith_round(70000.0) == 65504.0);
  CHECK(f16_arith_round(-70000.0) == -65504.0);
  const double q = std::ldexp(1.0, -24);
  CHECK(f16_arith_round(q) == q);
  CHECK(f16_arith_round(q * 1.5) == 2.0 * q);

  Rng rng(123);
  int mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    const double scale = std::pow(10.0, rng.uniform(-8.0, 5.0));
    const double d = rng.normal() * scale;
    const double fast = f16_arith_round(d);
    const double exact = round_to_half(d);
    if (fast != exact) {
      ++mismatches;
      CHECK(std::fabs(fast - exact) <=
            std::max(std::ldexp(1.0, -24), std::fabs(exact) * std::ldexp(1.0, -10)));
    }
    CHECK(f16_arith_round(fast) == fast);  // representable values are fixed points
  }
  CHECK(mismatches < 100);  // double-rounding corners are rare
}

TEST_CASE("half-arithmetic encoder path is deterministic and tagged") {
  Fixture& f = fixture();
  const Tensor a = encode_latent_f16(f.model, f.images[2]);
  const Tensor b = encode_latent_f16(f.model, f.images[2]);
  CHECK(a.data == b.data);
  CHECK(a.prec == Precision::F16Emulated);
  for (double v : a.data) CHECK(v == round_to_half(v));  // on the f16 grid
}

TEST_CASE("truncate_f16 is idempotent on random tensors") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const double scale = std::pow(10.0, static_cast<double>(trial % 7) - 3.0);
    const Tensor t = Tensor::randn({64}, rng, scale);
    const Tensor once = truncate_f16(t);
    const Tensor twice = truncate_f16(once);
    CHECK(once.data == twice.data);
    CHECK(once.prec == Precision::F16Emulated);
  }
}

TEST_CASE("lpd policy validation and inactive passthrough") {
  LpdPolicy none;
  none.truncate_latent = false;
  none.truncate_weights = false;
  CHECK_THROWS_AS(none.validate(), ConfigError);

  Fixture& f = fixture();
  const Bitstream plain = compress(f.model, f.images[0]);
  const Bitstream same = compress_lpd(f.model, f.images[0], none);  // inactive: passthrough
  CHECK(plain == same);
}

TEST_CASE("compress_lpd is deterministic and decodable") {
  Fixture& f = fixture();
  LpdPolicy policy;
  policy.truncate_latent = true;
  policy.truncate_weights = true;

  const Bitstream a = compress_lpd(f.model, f.images[1], policy);
  const Bitstream b = compress_lpd(f.model, f.images[1], policy);
  CHECK(a == b);

  const Tensor recon = decompress(f.model, a);
  CHECK(recon.shape == f.images[1].shape);

  // Truncated-weights copy is itself idempotent under further truncation.
  const CodecModel t1 = truncated_weights_copy(f.model);
  const CodecModel t2 = truncated_weights_copy(t1);
  CHECK(serialize_model(t1) == serialize_model(t2));
}

TEST_CASE("defense evaluation accounting") {
  Fixture& f = fixture();
  AttackConfig cfg;
  cfg.max_iterations = 30;
  cfg.check_every = 10;

  std::vector<std::pair<Tensor, Tensor>> suite = {
      {f.images[0], f.images[1]},
      {f.images[2], f.images[2]},  // trivially colliding pair
  };
  LpdPolicy policy;  // default: latent truncation on
  const DefenseReport rep =
      evaluate_defense(f.model, suite, cfg, policy, {f.images.begin(), f.images.begin() + 3});
  CHECK(rep.suite_size == 2);
  CHECK(rep.defended_records.size() == 2);
  CHECK(rep.undefended_records.size() == 2);
  CHECK(rep.collided_undefended >= 1);  // the identical pair always collides
  CHECK(rep.collided_defended >= 1);    // ... under LPD as well
  CHECK(rep.asr_undefended >= 0.5);
  CHECK(std::isfinite(rep.mean_psnr_drop));

  LpdPolicy inactive;
  inactive.truncate_latent = false;
  inactive.truncate_weights = false;
  const DefenseReport base =
      evaluate_defense(f.model, suite, cfg, inactive, {});
  CHECK(base.asr_defended == base.asr_undefended);  // inactive policy: same report

  // Harder variant: the LPD-aware attacker targets the deployed latent.
  const DefenseReport aware =
      evaluate_defense(f.model, suite, cfg, policy, {}, /*lpd_aware=*/true);
  CHECK(aware.suite_size == 2);
  CHECK(aware.collided_defended >= 1);  // the identical pair still collides

  CHECK_THROWS_AS(evaluate_defense(f.model, {}, cfg, policy, {}), ConfigError);
}
