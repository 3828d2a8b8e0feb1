#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "nic/attack.hpp"
#include "nic/errors.hpp"
#include "nic/trainer.hpp"

using namespace nic;

namespace {

struct Fixture {
  CodecModel model;
  std::vector<Tensor> images;
  AttackConfig cfg;

  Fixture() {
    Rng rng(808);
    for (int i = 0; i < 10; ++i) {
      images.push_back(Tensor::uniform({1, 3, 16, 16}, rng, 0.0, 1.0));
    }
    model = make_model(Arch::FpGdnToy, QualityPreset::ladder(1), 12);
    train_rd(model, images, model.preset.lambda_rd, 80, 12);
    fit_prior(model, images);
    cfg.max_iterations = 120;
    cfg.check_every = 10;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("dot mask selects the stated grid") {
  MaskSpec full;
  full.delta_h = 1;
  full.delta_w = 1;
  Rng rng(2);
  const Tensor g = Tensor::randn({1, 2, 6, 6}, rng);
  CHECK(apply_dot_mask(g, full).data == g.data);  // all pixels allowed

  MaskSpec rows;
  rows.delta_h = 3;
  rows.delta_w = 1;
  const Tensor masked = apply_dot_mask(g, rows);
  int nonzero = 0;
  for (int c = 0; c < 2; ++c) {
    for (int h = 0; h < 6; ++h) {
      for (int w = 0; w < 6; ++w) {
        const bool keep = (h % 3 == 0);
        if (keep) {
          CHECK(masked.at(0, c, h, w) == g.at(0, c, h, w));
        } else {
          CHECK(masked.at(0, c, h, w) == 0.0);
        }
        if (masked.at(0, c, h, w) != 0.0) ++nonzero;
      }
    }
  }
  CHECK(nonzero <= 2 * 12);  // rows {0,3}: 12 pixels per channel
  CHECK(apply_dot_mask(masked, rows).data == masked.data);  // idempotent

  const Tensor zero = Tensor::zeros({1, 2, 6, 6});
  for (double v : apply_dot_mask(zero, rows).data) CHECK(v == 0.0);

  MaskSpec bad;
  bad.h0 = 3;
  bad.delta_h = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  MaskSpec dens;
  dens.delta_h = 3;
  dens.delta_w = 1;
  CHECK(dens.density(64, 64) == doctest::Approx(22.0 * 64 / (64.0 * 64)));
}

TEST_CASE("latent loss variants against a flat recomputation") {
  Fixture& f = fixture();
  const Tensor& a = f.images[0];
  const Tensor& b = f.images[1];

  CHECK(latent_loss(f.model, a, a, LossVariant::LatentL2) == doctest::Approx(0.0));
  CHECK(latent_loss(f.model, a, a, LossVariant::LatentL2PlusCosine) ==
        doctest::Approx(0.0).epsilon(1e-12));  // CS(z,z)=1 so the penalty vanishes

  const Tensor za = encode_latent_f64(f.model, a);
  const Tensor zb = encode_latent_f64(f.model, b);
  double ss = 0.0, dot_ab = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < za.data.size(); ++i) {
    const double d = za.data[i] - zb.data[i];
    ss += d * d;
    dot_ab += za.data[i] * zb.data[i];
    na += za.data[i] * za.data[i];
    nb += zb.data[i] * zb.data[i];
  }
  const double expect_l2 = std::sqrt(ss);
  CHECK(std::fabs(latent_loss(f.model, a, b, LossVariant::LatentL2) - expect_l2) < 1e-10);
  const double cs = dot_ab / (std::sqrt(na) * std::sqrt(nb));
  CHECK(std::fabs(latent_loss(f.model, a, b, LossVariant::LatentL2PlusCosine) -
                  (expect_l2 + 0.5 * (1.0 - cs))) < 1e-10);
}

TEST_CASE("mgd on identical source and target collides at iteration zero") {
  Fixture& f = fixture();
  const AttackRun run = mgd_attack(f.model, f.images[2], f.images[2], f.cfg);
  CHECK(run.collided);
  CHECK(run.iterations_used == 0);
  CHECK(run.b_adv == run.b_tgt);
  CHECK(run.x_adv.data == f.images[2].data);
}

TEST_CASE("mgd keeps off-grid pixels bit-identical to the source") {
  Fixture& f = fixture();
  AttackConfig cfg = f.cfg;
  cfg.max_iterations = 60;
  const Tensor& x_src = f.images[3];
  const AttackRun run = mgd_attack(f.model, x_src, f.images[4], cfg);
  REQUIRE(run.x_adv.shape == x_src.shape);
  for (int c = 0; c < 3; ++c) {
    for (int h = 0; h < 16; ++h) {
      for (int w = 0; w < 16; ++w) {
        if (!cfg.mask.allows(h, w)) {
          CHECK(run.x_adv.at(0, c, h, w) == x_src.at(0, c, h, w));
        }
      }
    }
  }
  CHECK(run.loss_trace.size() == static_cast<std::size_t>(run.iterations_used));
  for (double v : run.loss_trace) CHECK(std::isfinite(v));

  // Early-stop soundness: a reported collision survives independent
  // recompression.
  if (run.collided) {
    CHECK(compress(f.model, run.x_adv) == run.b_tgt);
  }
}

TEST_CASE("pgd respects the epsilon ball") {
  Fixture& f = fixture();
  AttackConfig cfg = f.cfg;
  cfg.max_iterations = 40;
  const Tensor& x_src = f.images[5];

  const AttackRun frozen = pgd_attack(f.model, x_src, f.images[6], cfg, 0.0);
  CHECK(frozen.x_adv.data == x_src.data);  // epsilon 0: x never moves
  CHECK_FALSE(frozen.collided);

  const double eps = 0.1;
  const AttackRun run = pgd_attack(f.model, x_src, f.images[6], cfg, eps);
  double linf = 0.0;
  for (std::size_t i = 0; i < run.x_adv.data.size(); ++i) {
    linf = std::max(linf, std::fabs(run.x_adv.data[i] - x_src.data[i]));
  }
  CHECK(linf <= eps + 1e-9);
  CHECK_THROWS_AS(pgd_attack(f.model, x_src, f.images[6], cfg, -1.0), ConfigError);
}

TEST_CASE("cw with a dominant penalty pins the iterate to the source") {
  Fixture& f = fixture();
  AttackConfig cfg = f.cfg;
  cfg.max_iterations = 50;
  const Tensor& x_src = f.images[7];
  const AttackRun run = cw_attack(f.model, x_src, f.images[8], cfg, 1e7);
  CHECK(l2_per_pixel(run.x_adv, x_src) < 0.02);
  CHECK(run.loss_trace.size() == static_cast<std::size_t>(run.iterations_used));
  for (double v : run.loss_trace) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(cw_attack(f.model, x_src, f.images[8], cfg, 0.0), ConfigError);
}

TEST_CASE("full mask reaches at least as low a loss as the default mask") {
  // More degrees of freedom can only help the optimization; compare final
  // latent losses on runs prevented from early-stopping.
  Fixture& f = fixture();
  AttackConfig base = f.cfg;
  base.max_iterations = 60;
  base.check_every = 1000;  // no mid-run collision checks

  AttackConfig full = base;
  full.mask.delta_h = 1;
  full.mask.delta_w = 1;

  const AttackRun r_default = mgd_attack(f.model, f.images[0], f.images[9], base);
  const AttackRun r_full = mgd_attack(f.model, f.images[0], f.images[9], full);
  REQUIRE(!r_default.loss_trace.empty());
  REQUIRE(!r_full.loss_trace.empty());
  CHECK(r_full.loss_trace.back() <= r_default.loss_trace.back() + 1e-9);
}

TEST_CASE("transfer check requires a collided run and accepts the same model") {
  Fixture& f = fixture();
  const AttackRun self = mgd_attack(f.model, f.images[2], f.images[2], f.cfg);
  REQUIRE(self.collided);
  CHECK(transfer_check(f.model, self, f.images[2]));

  AttackRun failed = self;
  failed.collided = false;
  CHECK_THROWS_AS(transfer_check(f.model, failed, f.images[2]), ConfigError);
}

TEST_CASE("attack runs persist to a directory") {
  Fixture& f = fixture();
  AttackConfig cfg = f.cfg;
  cfg.max_iterations = 10;
  const AttackRun run = mgd_attack(f.model, f.images[0], f.images[1], cfg);
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "nic_run_test").string();
  save_attack_run(dir, run);
  for (const char* name :
       {"x_src.ppm", "x_tgt.ppm", "x_adv.ppm", "b_tgt.nicb", "b_adv.nicb", "run.json"}) {
    CHECK(fs::exists(fs::path(dir) / name));
  }
  const Bitstream loaded = read_nicb((fs::path(dir) / "b_tgt.nicb").string());
  CHECK(loaded == run.b_tgt);
  fs::remove_all(dir);
}

TEST_CASE("attack config validation") {
  AttackConfig cfg;
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.max_iterations = 10;
  cfg.lr_initial = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
