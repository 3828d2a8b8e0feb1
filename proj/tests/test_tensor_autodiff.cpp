#include <cmath>

#include "doctest.h"
#include "nic/autodiff.hpp"
#include "nic/codec.hpp"
#include "nic/errors.hpp"
#include "nic/kernels.hpp"
#include "nic/optim.hpp"

using namespace nic;

namespace {

// Independent direct-convolution reference: plain sextuple loop, no bounds
// hoisting, used as the oracle for the production kernel.
Tensor conv2d_naive(const Tensor& in, const Tensor& k, int stride, int pad) {
  const int n = in.shape[0], cin = in.shape[1], h = in.shape[2], w = in.shape[3];
  const int cout = k.shape[0], kh = k.shape[2], kw = k.shape[3];
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  Tensor out({n, cout, oh, ow});
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < cout; ++co) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int ci = 0; ci < cin; ++ci) {
            for (int u = 0; u < kh; ++u) {
              for (int v = 0; v < kw; ++v) {
                const int iy = y * stride - pad + u;
                const int ix = x * stride - pad + v;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += in.at(b, ci, iy, ix) * k.at(co, ci, u, v);
              }
            }
          }
          out.at(b, co, y, x) = acc;
        }
      }
    }
  }
  return out;
}

Tensor tape_conv2d(const Tensor& in, const Tensor& k, int stride, int pad) {
  Tape t;
  return t.value(t.conv2d(t.leaf(in), t.leaf(k), stride, pad));
}

Tensor tape_tconv2d(const Tensor& in, const Tensor& k, int stride, int pad) {
  Tape t;
  return t.value(t.conv2d_transpose(t.leaf(in), t.leaf(k), stride, pad));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape == b.shape);
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("conv2d matches stated examples") {
  Tensor ones({1, 1, 3, 3});
  for (double& v : ones.data) v = 1.0;
  Tensor kernel = ones;
  kernel.shape = {1, 1, 3, 3};
  const Tensor out = tape_conv2d(ones, kernel, 1, 0);
  REQUIRE(out.numel() == 1);
  CHECK(out.data[0] == doctest::Approx(9.0));

  Tensor x({1, 1, 2, 2});
  x.data = {1, 2, 3, 4};
  Tensor ident({1, 1, 1, 1});
  ident.data = {1};
  const Tensor same = tape_conv2d(x, ident, 1, 0);
  CHECK(same.data == x.data);
}

TEST_CASE("conv2d matches the naive reference on random shapes") {
  Rng rng(42);
  const Tensor in = Tensor::randn({1, 2, 8, 8}, rng);
  const Tensor k = Tensor::randn({4, 2, 3, 3}, rng);
  const Tensor fast = tape_conv2d(in, k, 2, 1);
  const Tensor slow = conv2d_naive(in, k, 2, 1);
  CHECK(max_abs_diff(fast, slow) < 1e-12);

  for (int seed = 0; seed < 25; ++seed) {
    Rng r(1000 + static_cast<std::uint64_t>(seed));
    const int cin = 1 + static_cast<int>(r.below(3));
    const int cout = 1 + static_cast<int>(r.below(3));
    const int side = 5 + static_cast<int>(r.below(6));
    const int ks = 1 + static_cast<int>(r.below(4));
    const int stride = 1 + static_cast<int>(r.below(2));
    const int pad = static_cast<int>(r.below(2));
    if (side + 2 * pad < ks) continue;
    const Tensor a = Tensor::randn({1, cin, side, side}, r);
    const Tensor kk = Tensor::randn({cout, cin, ks, ks}, r);
    CHECK(max_abs_diff(tape_conv2d(a, kk, stride, pad), conv2d_naive(a, kk, stride, pad)) <
          1e-12);
  }
}

TEST_CASE("conv2d rejects bad shapes and strides") {
  Rng rng(7);
  const Tensor in = Tensor::randn({1, 2, 4, 4}, rng);
  const Tensor k = Tensor::randn({1, 3, 3, 3}, rng);  // channel mismatch
  Tape t;
  CHECK_THROWS_AS(t.conv2d(t.leaf(in), t.leaf(k), 1, 0), ConfigError);
  const Tensor k2 = Tensor::randn({1, 2, 3, 3}, rng);
  CHECK_THROWS_AS(t.conv2d(t.leaf(in), t.leaf(k2), 0, 0), ConfigError);
}

TEST_CASE("conv2d linearity") {
  Rng rng(11);
  const Tensor x = Tensor::randn({1, 2, 6, 6}, rng);
  const Tensor y = Tensor::randn({1, 2, 6, 6}, rng);
  const Tensor k = Tensor::randn({3, 2, 3, 3}, rng);
  const double a = 1.7, b = -0.4;
  Tensor mix({1, 2, 6, 6});
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
  const Tensor lhs = tape_conv2d(mix, k, 1, 1);
  const Tensor cx = tape_conv2d(x, k, 1, 1);
  const Tensor cy = tape_conv2d(y, k, 1, 1);
  double m = 0.0;
  for (std::size_t i = 0; i < lhs.data.size(); ++i) {
    m = std::max(m, std::fabs(lhs.data[i] - (a * cx.data[i] + b * cy.data[i])));
  }
  CHECK(m < 1e-10);
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  for (int seed = 0; seed < 100; ++seed) {
    Rng r(9000 + static_cast<std::uint64_t>(seed));
    const int cin = 1 + static_cast<int>(r.below(3));
    const int cout = 1 + static_cast<int>(r.below(3));
    const int side = 6 + 2 * static_cast<int>(r.below(3));
    const int stride = 1 + static_cast<int>(r.below(2));
    const int ks = stride == 2 ? 4 : 3;
    const int pad = 1;
    const Tensor x = Tensor::randn({1, cin, side, side}, r);
    const Tensor k = Tensor::randn({cout, cin, ks, ks}, r);
    const Tensor cx = tape_conv2d(x, k, stride, pad);
    const Tensor y = Tensor::randn(cx.shape, r);
    const Tensor aty = tape_tconv2d(y, k, stride, pad);
    REQUIRE(aty.shape == x.shape);
    CHECK(dot(cx, y) == doctest::Approx(dot(x, aty)).epsilon(1e-10));
  }
}

TEST_CASE("conv2d_transpose stated examples") {
  Tensor one({1, 1, 1, 1});
  one.data = {1.0};
  Tensor k({1, 1, 2, 2});
  k.data = {1, 1, 1, 1};
  const Tensor spread = tape_tconv2d(one, k, 2, 0);
  REQUIRE(spread.shape == std::vector<int>{1, 1, 2, 2});
  for (double v : spread.data) CHECK(v == doctest::Approx(1.0));

  const Tensor zero = Tensor::zeros({1, 1, 3, 3});
  const Tensor z = tape_tconv2d(zero, k, 2, 0);
  for (double v : z.data) CHECK(v == 0.0);
}

TEST_CASE("gdn forward examples") {
  // gamma = 0, beta = 1: normalization disabled.
  Rng rng(5);
  const Tensor x = Tensor::randn({1, 3, 4, 4}, rng);
  Tape t;
  Var y = t.gdn(t.leaf(x), t.leaf(Tensor::full({3}, 1.0)), t.leaf(Tensor::zeros({3, 3})), false);
  CHECK(max_abs_diff(t.value(y), x) < 1e-15);

  // Scalar hand evaluation: 2/sqrt(0.5 + 4).
  Tensor s({1, 1, 1, 1});
  s.data = {2.0};
  Tape t2;
  Var y2 = t2.gdn(t2.leaf(s), t2.leaf(Tensor::full({1}, 0.5)), t2.leaf(Tensor::full({1, 1}, 1.0)),
                  false);
  CHECK(t2.value(y2).data[0] == doctest::Approx(2.0 / std::sqrt(4.5)).epsilon(1e-12));

  // Non-positive beta rejected.
  Tape t3;
  CHECK_THROWS_AS(
      t3.gdn(t3.leaf(s), t3.leaf(Tensor::zeros({1})), t3.leaf(Tensor::zeros({1, 1})), false),
      ConfigError);
}

TEST_CASE("inverse gdn approximately undoes gdn for weak normalization") {
  Rng rng(17);
  const Tensor x = Tensor::uniform({1, 4, 5, 5}, rng, -1.0, 1.0);
  const Tensor beta = Tensor::full({4}, 1.0);
  const Tensor gamma = Tensor::full({4, 4}, 1e-4);
  Tape t;
  Var mid = t.gdn(t.leaf(x), t.leaf(beta), t.leaf(gamma), false);
  Var back = t.gdn(mid, t.leaf(beta), t.leaf(gamma), true);
  CHECK(max_abs_diff(t.value(back), x) < 1e-6);
}

TEST_CASE("backward basics") {
  Rng rng(3);
  const Tensor x = Tensor::randn({1, 2, 3, 3}, rng);

  Tape t;
  Var xv = t.leaf(x, true);
  Var s = t.sum(xv);
  const Tensor g = t.backward(s, {xv})[0];
  for (double v : g.data) CHECK(v == doctest::Approx(1.0));

  const Tensor target = Tensor::randn(x.shape, rng);
  Tape t2;
  Var xv2 = t2.leaf(x, true);
  Var loss = t2.sumsq_to_const(xv2, target);
  const Tensor g2 = t2.backward(loss, {xv2})[0];
  for (std::size_t i = 0; i < g2.data.size(); ++i) {
    CHECK(g2.data[i] == doctest::Approx(2.0 * (x.data[i] - target.data[i])).epsilon(1e-12));
  }

  // Loss must be scalar; unreachable wrt gets zeros.
  Tape t3;
  Var a = t3.leaf(x, true);
  Var b = t3.leaf(target, true);
  Var l3 = t3.sum(a);
  CHECK_THROWS_AS(t3.backward(a, {a}), ConfigError);
  const auto grads = t3.backward(l3, {a, b});
  for (double v : grads[1].data) CHECK(v == 0.0);
}

TEST_CASE("full encoder gradient matches central finite differences") {
  const QualityPreset preset = QualityPreset::ladder(1);
  CodecModel m = make_model(Arch::FpGdnToy, preset, 77);
  Rng rng(123);
  Tensor img = Tensor::uniform({1, 3, 16, 16}, rng, 0.0, 1.0);
  const Tensor z_tgt = Tensor::randn({1, preset.latent_channels, 2, 2}, rng);

  Tape tape;
  ModelVars mv = stage_model(tape, m, false);
  Var xv = tape.leaf(img, true);
  Var z = encoder_forward(tape, m, mv, xv);
  Var loss = tape.l2_to_const(z, z_tgt);
  const Tensor grad = tape.backward(loss, {xv})[0];

  auto loss_at = [&](const Tensor& x) {
    Tape t;
    ModelVars v = stage_model(t, m, false);
    Var lv = t.l2_to_const(encoder_forward(t, m, v, t.leaf(x)), z_tgt);
    return t.value(lv).data[0];
  };

  const double h = 1e-5;
  double grad_scale = 0.0;
  for (double v : grad.data) grad_scale = std::max(grad_scale, std::fabs(v));
  double max_rel = 0.0;
  Rng pick(9);
  for (int k = 0; k < 120; ++k) {
    const std::size_t i = static_cast<std::size_t>(pick.below(img.data.size()));
    Tensor hi = img, lo = img;
    hi.data[i] += h;
    lo.data[i] -= h;
    const double fd = (loss_at(hi) - loss_at(lo)) / (2.0 * h);
    const double rel = std::fabs(fd - grad.data[i]) / std::max(1e-3 * grad_scale, std::fabs(fd));
    max_rel = std::max(max_rel, rel);
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("primitive gradients match finite differences across random seeds") {
  // Property: every differentiable primitive agrees with central differences.
  for (int seed = 0; seed < 100; ++seed) {
    Rng r(5000 + static_cast<std::uint64_t>(seed));
    const int kind = static_cast<int>(r.below(5));
    const int c = 2 + static_cast<int>(r.below(2));
    Tensor x = Tensor::randn({1, c, 4, 4}, r);

    Tensor k = Tensor::randn({2, c, 3, 3}, r);
    Tensor beta = Tensor::uniform({c}, r, 0.3, 1.5);
    Tensor gamma = Tensor::uniform({c, c}, r, 0.0, 0.2);
    Tensor ref = Tensor::randn({1, 2, 4, 4}, r);

    auto value_and_grad = [&](const Tensor& input, double* val) {
      Tape t;
      Var xv = t.leaf(input, true);
      Var out;
      switch (kind) {
        case 0: out = t.l2_to_const(t.conv2d(xv, t.leaf(k), 1, 1), ref); break;
        case 1: {
          Rng kr(101 + static_cast<std::uint64_t>(seed));
          Tensor tk = Tensor::randn({c, 2, 4, 4}, kr);
          Tensor tref = Tensor::zeros({1, 2, 8, 8});
          out = t.l2_to_const(t.conv2d_transpose(xv, t.leaf(tk), 2, 1), tref);
          break;
        }
        case 2: out = t.sum(t.gdn(xv, t.leaf(beta), t.leaf(gamma), false)); break;
        case 3: out = t.sum(t.gdn(xv, t.leaf(beta), t.leaf(gamma), true)); break;
        default: {
          Tensor tgt = Tensor::zeros(input.shape);
          out = t.add(t.l2_to_const(t.tanh_op(xv), tgt),
                      t.sum(t.softplus_floor(xv, 1e-6)));
          break;
        }
      }
      *val = t.value(out).data[0];
      return t.backward(out, {xv})[0];
    };

    double base = 0.0;
    const Tensor grad = value_and_grad(x, &base);
    double gmax = 1e-6;
    for (double v : grad.data) gmax = std::max(gmax, std::fabs(v));
    const double h = 1e-5;
    for (int probe_i = 0; probe_i < 4; ++probe_i) {
      const std::size_t i = static_cast<std::size_t>(r.below(x.data.size()));
      Tensor hi = x, lo = x;
      hi.data[i] += h;
      lo.data[i] -= h;
      double vh = 0.0, vl = 0.0;
      value_and_grad(hi, &vh);
      value_and_grad(lo, &vl);
      const double fd = (vh - vl) / (2.0 * h);
      CHECK(std::fabs(fd - grad.data[i]) <= 1e-4 * std::max(gmax, std::fabs(fd)) + 1e-9);
    }
  }
}

TEST_CASE("gdn parameter gradients match finite differences") {
  Rng r(33);
  const int c = 3;
  const Tensor x = Tensor::randn({1, c, 3, 3}, r);
  Tensor beta = Tensor::uniform({c}, r, 0.4, 1.2);
  Tensor gamma = Tensor::uniform({c, c}, r, 0.0, 0.3);

  for (bool inverse : {false, true}) {
    auto value = [&](const Tensor& bb, const Tensor& gg, double* out) {
      Tape t;
      Var y = t.gdn(t.leaf(x), t.leaf(bb), t.leaf(gg), inverse);
      *out = t.value(t.sum(y)).data[0];
    };
    Tape t;
    Var bv = t.leaf(beta, true);
    Var gv = t.leaf(gamma, true);
    Var loss = t.sum(t.gdn(t.leaf(x), bv, gv, inverse));
    const auto grads = t.backward(loss, {bv, gv});
    const double h = 1e-6;
    for (std::size_t i = 0; i < beta.data.size(); ++i) {
      Tensor hi = beta, lo = beta;
      hi.data[i] += h;
      lo.data[i] -= h;
      double vh = 0.0, vl = 0.0;
      value(hi, gamma, &vh);
      value(lo, gamma, &vl);
      CHECK(grads[0].data[i] == doctest::Approx((vh - vl) / (2 * h)).epsilon(1e-4));
    }
    for (std::size_t i = 0; i < gamma.data.size(); ++i) {
      Tensor hi = gamma, lo = gamma;
      hi.data[i] += h;
      lo.data[i] -= h;
      double vh = 0.0, vl = 0.0;
      value(beta, hi, &vh);
      value(beta, lo, &vl);
      CHECK(grads[1].data[i] == doctest::Approx((vh - vl) / (2 * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("adam behaves per the update equations") {
  Tensor p = Tensor::full({4}, 1.0);
  AdamState st = AdamState::for_param(p);
  AdamHyper h;
  h.lr = 0.1;

  // Zero gradient from zero state: parameters unchanged.
  adam_step(p, Tensor::zeros({4}), st, h);
  for (double v : p.data) CHECK(v == 1.0);

  // Single step from zero state with constant gradient: hand recurrence.
  Tensor q = Tensor::full({1}, 0.0);
  AdamState st2 = AdamState::for_param(q);
  Tensor g = Tensor::full({1}, 0.5);
  adam_step(q, g, st2, h);
  const double m = (1 - h.beta1) * 0.5, v = (1 - h.beta2) * 0.25;
  const double mhat = m / (1 - h.beta1), vhat = v / (1 - h.beta2);
  CHECK(q.data[0] == doctest::Approx(-h.lr * mhat / (std::sqrt(vhat) + h.eps)).epsilon(1e-12));

  // Determinism: identical runs bit-identical.
  Tensor p1 = Tensor::full({8}, 0.3), p2 = Tensor::full({8}, 0.3);
  AdamState s1 = AdamState::for_param(p1), s2 = AdamState::for_param(p2);
  Rng r1(4), r2(4);
  for (int i = 0; i < 10; ++i) {
    const Tensor g1 = Tensor::randn({8}, r1);
    const Tensor g2 = Tensor::randn({8}, r2);
    adam_step(p1, g1, s1, h);
    adam_step(p2, g2, s2, h);
  }
  CHECK(p1.data == p2.data);
}

TEST_CASE("cosine annealing schedule endpoints and midpoint") {
  CHECK(cosine_annealing_lr(0, 100, 0.03, 0.0) == doctest::Approx(0.03));
  CHECK(cosine_annealing_lr(100, 100, 0.03, 0.001) == doctest::Approx(0.001));
  CHECK(cosine_annealing_lr(50, 100, 0.03, 0.0) == doctest::Approx(0.015));
  CHECK_THROWS_AS(cosine_annealing_lr(0, 0, 0.03, 0.0), ConfigError);
  CHECK_THROWS_AS(cosine_annealing_lr(5, 4, 0.03, 0.0), ConfigError);
}

TEST_CASE("tensors surface non-finite values") {
  Tensor t = Tensor::zeros({2, 2});
  t.data[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.ensure_finite("test"), NumericError);
}
