#include <benchmark/benchmark.h>

#include "nic/attack.hpp"
#include "nic/codec.hpp"
#include "nic/kernels.hpp"
#include "nic/metrics.hpp"
#include "nic/prior.hpp"
#include "nic/rng.hpp"

using namespace nic;

namespace {

CodecModel bench_model() {
  Rng rng(1);
  CodecModel m = make_model(Arch::FpGdnToy, QualityPreset::ladder(1), 1);
  std::vector<Tensor> corpus;
  for (int i = 0; i < 4; ++i) corpus.push_back(Tensor::uniform({1, 3, 64, 64}, rng, 0.0, 1.0));
  fit_prior(m, corpus);
  return m;
}

}  // namespace

static void ConvForwardF64(benchmark::State& state) {
  Rng rng(2);
  const Tensor in = Tensor::randn({1, 16, 32, 32}, rng);
  const Tensor k = Tensor::randn({16, 16, 4, 4}, rng);
  const auto d = kernels::conv2d_dims(in.shape, k.shape, 2, 1);
  Tensor out({d.n, d.cout, d.oh, d.ow});
  for (auto _ : state) {
    kernels::conv2d_fwd(in.data.data(), k.data.data(), out.data.data(), d);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.cout) * d.oh * d.ow *
                          d.cin * d.kh * d.kw);
}
BENCHMARK(ConvForwardF64);

static void ConvTransposeF64(benchmark::State& state) {
  Rng rng(3);
  const Tensor in = Tensor::randn({1, 16, 16, 16}, rng);
  const Tensor k = Tensor::randn({16, 16, 4, 4}, rng);
  const auto d = kernels::conv2d_transpose_dims(in.shape, k.shape, 2, 1);
  Tensor out({d.n, d.cin, d.h, d.w});
  for (auto _ : state) {
    kernels::conv2d_transpose_fwd(in.data.data(), k.data.data(), out.data.data(), d, d.h, d.w);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(ConvTransposeF64);

static void CompressImage(benchmark::State& state) {
  const CodecModel m = bench_model();
  Rng rng(4);
  const Tensor img = Tensor::uniform({1, 3, 64, 64}, rng, 0.0, 1.0);
  for (auto _ : state) {
    Bitstream b = compress(m, img);
    benchmark::DoNotOptimize(b.payload.data());
  }
}
BENCHMARK(CompressImage);

static void AttackIteration(benchmark::State& state) {
  const CodecModel m = bench_model();
  Rng rng(5);
  const Tensor x = Tensor::uniform({1, 3, 64, 64}, rng, 0.0, 1.0);
  const Tensor z_tgt = encode_latent_f64(m, Tensor::uniform({1, 3, 64, 64}, rng, 0.0, 1.0));
  for (auto _ : state) {
    Tape tape;
    ModelVars v = stage_model(tape, m, false);
    Var xv = tape.leaf(x, true);
    Var loss = tape.l2_to_const(encoder_forward(tape, m, v, xv), z_tgt);
    Tensor grad = tape.backward(loss, {xv})[0];
    benchmark::DoNotOptimize(grad.data.data());
  }
}
BENCHMARK(AttackIteration);

static void RangeCoderRoundTrip(benchmark::State& state) {
  Rng rng(6);
  std::vector<std::uint64_t> counts(64);
  for (auto& c : counts) c = 1 + rng.below(10000);
  FactorizedPrior prior;
  prior.channels.push_back(make_channel_cdf(-32, counts));
  Tensor sym({4096});
  for (double& v : sym.data) v = prior.channels[0].sample(rng);
  for (auto _ : state) {
    const Bitstream bs = entropy_encode(prior, sym);
    Tensor back = entropy_decode(prior, bs, sym.numel());
    benchmark::DoNotOptimize(back.data.data());
  }
  state.SetItemsProcessed(state.iterations() * sym.numel());
}
BENCHMARK(RangeCoderRoundTrip);

static void MsSsim64(benchmark::State& state) {
  Rng rng(7);
  const Tensor a = Tensor::uniform({1, 3, 64, 64}, rng, 0.0, 1.0);
  const Tensor b = Tensor::uniform({1, 3, 64, 64}, rng, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ms_ssim(a, b));
  }
}
BENCHMARK(MsSsim64);

BENCHMARK_MAIN();
