#include <cmath>

#include "doctest.h"
#include "nic/errors.hpp"
#include "nic/metrics.hpp"
#include "nic/rng.hpp"

using namespace nic;

namespace {

Bitstream stream_of(std::vector<std::uint8_t> bytes) {
  Bitstream b = Bitstream::with_header(0, 0, 0);
  b.set_payload(std::move(bytes));
  return b;
}

}  // namespace

TEST_CASE("hamming distance on payload bits") {
  const Bitstream a = stream_of({0b10110000});
  CHECK(hamming_normalized(a, a) == 0.0);

  const Bitstream flip = stream_of({static_cast<std::uint8_t>(~0b10110000u & 0xFF)});
  CHECK(hamming_normalized(a, flip) == 1.0);

  const Bitstream b = stream_of({0b10010000});
  CHECK(hamming_normalized(a, b) == doctest::Approx(0.125));

  const Bitstream longer = stream_of({0b10110000, 0x00});
  CHECK(hamming_normalized(a, longer) == 1.0);  // length mismatch: no collision
}

TEST_CASE("hamming is a metric on equal-length streams") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    auto rand_stream = [&] {
      std::vector<std::uint8_t> v(n);
      for (auto& byte : v) byte = static_cast<std::uint8_t>(rng.below(256));
      return stream_of(std::move(v));
    };
    const Bitstream x = rand_stream(), y = rand_stream(), z = rand_stream();
    CHECK(hamming_normalized(x, y) == hamming_normalized(y, x));
    CHECK((hamming_normalized(x, y) == 0.0) == (x == y));
    CHECK(hamming_normalized(x, z) <=
          hamming_normalized(x, y) + hamming_normalized(y, z) + 1e-15);
  }
}

TEST_CASE("asr counts exact collisions only") {
  auto rec = [](double hamming) {
    PairRecord r;
    r.hamming = hamming;
    r.collided = hamming == 0.0;
    return r;
  };
  CHECK(asr({rec(0), rec(0)}) == 1.0);
  CHECK(asr({rec(0.5), rec(1.0)}) == 0.0);
  CHECK(asr({rec(0), rec(0), rec(0), rec(0.001)}) == 0.75);
  CHECK_THROWS_AS(asr({}), ConfigError);
}

TEST_CASE("per-pixel l2") {
  Rng rng(4);
  const Tensor x = Tensor::randn({1, 3, 8, 8}, rng);
  CHECK(l2_per_pixel(x, x) == 0.0);

  Tensor y = x;
  for (double& v : y.data) v += 1.0;
  CHECK(l2_per_pixel(x, y) == doctest::Approx(1.0));

  const Tensor z = Tensor::randn(x.shape, rng);
  double ss = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    ss += (x.data[i] - z.data[i]) * (x.data[i] - z.data[i]);
  }
  CHECK(std::fabs(l2_per_pixel(x, z) - std::sqrt(ss / x.data.size())) < 1e-12);

  CHECK_THROWS_AS(l2_per_pixel(x, Tensor::zeros({1, 3, 8, 9})), ConfigError);
}

TEST_CASE("psnr of identical images is infinite, of offset images finite") {
  const Tensor x = Tensor::full({1, 3, 8, 8}, 0.25);
  CHECK(std::isinf(psnr(x, x)));
  Tensor y = x;
  for (double& v : y.data) v += 0.1;
  CHECK(psnr(x, y) == doctest::Approx(20.0));
}

TEST_CASE("ms-ssim identity, symmetry, and degradation ordering") {
  Rng rng(15);
  Tensor x({1, 3, 64, 64});
  // structured content: smooth ramp plus a few blocks
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        x.at(0, c, i, j) = 0.5 + 0.4 * std::sin(0.15 * i + 0.1 * j + c);
      }
    }
  }
  const MsSsimResult self = ms_ssim_detail(x, x);
  CHECK(self.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(self.scales_used == 3);  // 64/2^2 = 16 >= 11, 64/2^3 < 11

  Tensor light = x, heavy = x;
  Rng noise(1);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double n = noise.normal();
    light.data[i] = std::clamp(light.data[i] + 0.03 * n, 0.0, 1.0);
    heavy.data[i] = std::clamp(heavy.data[i] + 0.4 * n, 0.0, 1.0);
  }
  CHECK(ms_ssim(x, heavy) < ms_ssim(x, light));
  CHECK(std::fabs(ms_ssim(x, heavy) - ms_ssim(heavy, x)) < 1e-9);

  CHECK_THROWS_AS(ms_ssim(x, Tensor::zeros({1, 3, 64, 63})), ConfigError);
  CHECK_THROWS_AS(ms_ssim(Tensor::zeros({1, 1, 8, 8}), Tensor::zeros({1, 1, 8, 8})), ConfigError);
}

TEST_CASE("aggregate uses population standard deviation") {
  const Aggregate a = aggregate({1.0, 2.0, 3.0, 4.0});
  CHECK(a.mean == doctest::Approx(2.5));
  CHECK(a.stddev == doctest::Approx(std::sqrt(1.25)));
  CHECK(a.count == 4);
  CHECK(aggregate({}).count == 0);
}

TEST_CASE("metric report serializes with provenance and footer") {
  MetricReport rep;
  PairRecord r;
  r.pair_index = 0;
  r.hamming = 0.0;
  r.collided = true;
  rep.records.push_back(r);
  const std::string csv = rep.to_csv({"config-hash=deadbeef"});
  CHECK(csv.find("# config-hash=deadbeef") == 0);
  CHECK(csv.find("asr=1") != std::string::npos);
  CHECK(rep.to_json().find("\"asr\"") != std::string::npos);
}
