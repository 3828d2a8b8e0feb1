#include "nic/autodiff.hpp"

#include <cmath>

#include "nic/errors.hpp"
#include "nic/special.hpp"

namespace nic {

namespace {
constexpr double kLog2e = 1.4426950408889634073599246810;
constexpr double kBitsFloor = 1e-12;  // likelihood floor keeping bits finite
}  // namespace

Var Tape::leaf(Tensor value, bool requires_grad) {
  Var v = push(std::move(value), {}, nullptr);
  node(v.id).needs_grad = requires_grad;
  return v;
}

Var Tape::push(Tensor value, std::vector<int> parents, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  for (int p : n.parents) {
    if (node(p).needs_grad) n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(int id) {
  Node& n = node(id);
  if (!n.grad_live) {
    n.grad = Tensor::zeros(n.value.shape);
    n.grad_live = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  Tensor& dst = grad_buf(id);
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
}

Var Tape::conv2d(Var input, Var kernel, int stride, int padding) {
  const Tensor& in = value(input);
  const Tensor& k = value(kernel);
  kernels::ConvDims d = kernels::conv2d_dims(in.shape, k.shape, stride, padding);
  Tensor out({d.n, d.cout, d.oh, d.ow});
  kernels::conv2d_fwd(in.data.data(), k.data.data(), out.data.data(), d);
  return push(std::move(out), {input.id, kernel.id}, [d](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pin = n.parents[0], pk = n.parents[1];
    Tensor gin, gk;
    kernels::conv2d_bwd(t.node(pin).value, t.node(pk).value, n.grad, d,
                        t.node(pin).needs_grad ? &gin : nullptr,
                        t.node(pk).needs_grad ? &gk : nullptr);
    if (t.node(pin).needs_grad) t.accumulate(pin, gin);
    if (t.node(pk).needs_grad) t.accumulate(pk, gk);
  });
}

Var Tape::conv2d_transpose(Var input, Var kernel, int stride, int padding) {
  const Tensor& in = value(input);
  const Tensor& k = value(kernel);
  kernels::ConvDims d = kernels::conv2d_transpose_dims(in.shape, k.shape, stride, padding);
  Tensor out({d.n, d.cin, d.h, d.w});
  kernels::conv2d_transpose_fwd(in.data.data(), k.data.data(), out.data.data(), d, d.h, d.w);
  return push(std::move(out), {input.id, kernel.id}, [d](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pin = n.parents[0], pk = n.parents[1];
    Tensor gin, gk;
    kernels::conv2d_transpose_bwd(t.node(pin).value, t.node(pk).value, n.grad, d, d.h, d.w,
                                  t.node(pin).needs_grad ? &gin : nullptr,
                                  t.node(pk).needs_grad ? &gk : nullptr);
    if (t.node(pin).needs_grad) t.accumulate(pin, gin);
    if (t.node(pk).needs_grad) t.accumulate(pk, gk);
  });
}

Var Tape::add_channel_bias(Var x, Var bias) {
  const Tensor& xt = value(x);
  const Tensor& bt = value(bias);
  require_rank(xt, 4, "add_channel_bias input");
  require_shape(bt, {xt.shape[1]}, "add_channel_bias bias");
  Tensor out = xt;
  const int n = xt.shape[0], c = xt.shape[1], hw = xt.shape[2] * xt.shape[3];
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < c; ++i) {
      double* row = out.data.data() + (static_cast<std::size_t>(b) * c + i) * hw;
      const double bv = bt.data[static_cast<std::size_t>(i)];
      for (int p = 0; p < hw; ++p) row[p] += bv;
    }
  }
  return push(std::move(out), {x.id, bias.id}, [n, c, hw](Tape& t, int self) {
    const Node& nd = t.node(self);
    const int px = nd.parents[0], pb = nd.parents[1];
    if (t.node(px).needs_grad) t.accumulate(px, nd.grad);
    if (t.node(pb).needs_grad) {
      Tensor gb({c});
      for (int b = 0; b < n; ++b) {
        for (int i = 0; i < c; ++i) {
          const double* row = nd.grad.data.data() + (static_cast<std::size_t>(b) * c + i) * hw;
          double s = 0.0;
          for (int p = 0; p < hw; ++p) s += row[p];
          gb.data[static_cast<std::size_t>(i)] += s;
        }
      }
      t.accumulate(pb, gb);
    }
  });
}

Var Tape::gdn(Var x, Var beta, Var gamma_matrix, bool inverse) {
  const Tensor& xt = value(x);
  const Tensor& bt = value(beta);
  const Tensor& gt = value(gamma_matrix);
  require_rank(xt, 4, "gdn input");
  const int c = xt.shape[1];
  require_shape(bt, {c}, "gdn beta");
  require_shape(gt, {c, c}, "gdn gamma");
  for (double b : bt.data) {
    if (!(b > 0.0)) throw ConfigError("gdn: beta must be strictly positive");
  }
  Tensor out(xt.shape);
  kernels::gdn_fwd(xt.data.data(), bt.data.data(), gt.data.data(), out.data.data(), xt.shape[0],
                   c, xt.shape[2] * xt.shape[3], inverse);
  return push(std::move(out), {x.id, beta.id, gamma_matrix.id}, [inverse](Tape& t, int self) {
    const Node& n = t.node(self);
    const int px = n.parents[0], pb = n.parents[1], pg = n.parents[2];
    Tensor gx, gb, gg;
    kernels::gdn_bwd(t.node(px).value, t.node(pb).value, t.node(pg).value, n.grad, inverse,
                     t.node(px).needs_grad ? &gx : nullptr, t.node(pb).needs_grad ? &gb : nullptr,
                     t.node(pg).needs_grad ? &gg : nullptr);
    if (t.node(px).needs_grad) t.accumulate(px, gx);
    if (t.node(pb).needs_grad) t.accumulate(pb, gb);
    if (t.node(pg).needs_grad) t.accumulate(pg, gg);
  });
}

Var Tape::relu(Var x) {
  const Tensor& xt = value(x);
  Tensor out(xt.shape);
  kernels::relu_fwd(xt.data.data(), out.data.data(), xt.data.size());
  return push(std::move(out), {x.id}, [](Tape& t, int self) {
    const Node& n = t.node(self);
    const int px = n.parents[0];
    if (!t.node(px).needs_grad) return;
    const Tensor& xv = t.node(px).value;
    Tensor gx(xv.shape);
    for (std::size_t i = 0; i < gx.data.size(); ++i) {
      gx.data[i] = xv.data[i] > 0.0 ? n.grad.data[i] : 0.0;
    }
    t.accumulate(px, gx);
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& at = value(a);
  const Tensor& bt = value(b);
  if (!at.same_shape(bt)) {
    throw ConfigError("add: shape mismatch " + shape_str(at.shape) + " vs " + shape_str(bt.shape));
  }
  Tensor out = at;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bt.data[i];
  return push(std::move(out), {a.id, b.id}, [](Tape& t, int self) {
    const Node& n = t.node(self);
    if (t.node(n.parents[0]).needs_grad) t.accumulate(n.parents[0], n.grad);
    if (t.node(n.parents[1]).needs_grad) t.accumulate(n.parents[1], n.grad);
  });
}

Var Tape::affine(Var a, double mul, double shift) {
  Tensor out = value(a);
  for (double& v : out.data) v = v * mul + shift;
  return push(std::move(out), {a.id}, [mul](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pa = n.parents[0];
    if (!t.node(pa).needs_grad) return;
    Tensor ga(n.grad.shape);
    for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] = n.grad.data[i] * mul;
    t.accumulate(pa, ga);
  });
}

Var Tape::add_const(Var a, const Tensor& c) {
  const Tensor& at = value(a);
  if (!at.same_shape(c)) throw ConfigError("add_const: shape mismatch");
  Tensor out = at;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
  return push(std::move(out), {a.id}, [](Tape& t, int self) {
    const Node& n = t.node(self);
    if (t.node(n.parents[0]).needs_grad) t.accumulate(n.parents[0], n.grad);
  });
}

Var Tape::tanh_op(Var a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), {a.id}, [](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pa = n.parents[0];
    if (!t.node(pa).needs_grad) return;
    Tensor ga(n.grad.shape);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      const double y = n.value.data[i];
      ga.data[i] = n.grad.data[i] * (1.0 - y * y);
    }
    t.accumulate(pa, ga);
  });
}

Var Tape::softplus_floor(Var a, double floor) {
  Tensor out = value(a);
  for (double& v : out.data) v = floor + (v > 30.0 ? v : std::log1p(std::exp(v)));
  return push(std::move(out), {a.id}, [](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pa = n.parents[0];
    if (!t.node(pa).needs_grad) return;
    const Tensor& av = t.node(pa).value;
    Tensor ga(av.shape);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = n.grad.data[i] / (1.0 + std::exp(-av.data[i]));
    }
    t.accumulate(pa, ga);
  });
}

Var Tape::sum(Var a) {
  const Tensor& at = value(a);
  double s = 0.0;
  for (double v : at.data) s += v;
  Tensor out({1});
  out.data[0] = s;
  return push(std::move(out), {a.id}, [](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pa = n.parents[0];
    if (!t.node(pa).needs_grad) return;
    const double g = n.grad.data[0];
    Tensor ga(t.node(pa).value.shape);
    for (double& v : ga.data) v = g;
    t.accumulate(pa, ga);
  });
}

Var Tape::l2_to_const(Var a, const Tensor& target) {
  const Tensor& at = value(a);
  if (!at.same_shape(target)) throw ConfigError("l2_to_const: shape mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < at.data.size(); ++i) {
    const double dlt = at.data[i] - target.data[i];
    ss += dlt * dlt;
  }
  const double l2 = std::sqrt(ss);
  Tensor out({1});
  out.data[0] = l2;
  Tensor tgt = target;
  return push(std::move(out), {a.id}, [tgt = std::move(tgt), l2](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pa = n.parents[0];
    if (!t.node(pa).needs_grad || l2 == 0.0) return;  // zero gradient at the minimum
    const double g = n.grad.data[0] / l2;
    const Tensor& av = t.node(pa).value;
    Tensor ga(av.shape);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = g * (av.data[i] - tgt.data[i]);
    }
    t.accumulate(pa, ga);
  });
}

Var Tape::sumsq_to_const(Var a, const Tensor& target) {
  const Tensor& at = value(a);
  if (!at.same_shape(target)) throw ConfigError("sumsq_to_const: shape mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < at.data.size(); ++i) {
    const double dlt = at.data[i] - target.data[i];
    ss += dlt * dlt;
  }
  Tensor out({1});
  out.data[0] = ss;
  Tensor tgt = target;
  return push(std::move(out), {a.id}, [tgt = std::move(tgt)](Tape& t, int self) {
    const Node& n = t.node(self);
    const int pa = n.parents[0];
    if (!t.node(pa).needs_grad) return;
    const double g = 2.0 * n.grad.data[0];
    const Tensor& av = t.node(pa).value;
    Tensor ga(av.shape);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = g * (av.data[i] - tgt.data[i]);
    }
    t.accumulate(pa, ga);
  });
}

Var Tape::cosine_to_const(Var a, const Tensor& target) {
  const Tensor& at = value(a);
  if (!at.same_shape(target)) throw ConfigError("cosine_to_const: shape mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < at.data.size(); ++i) {
    ab += at.data[i] * target.data[i];
    aa += at.data[i] * at.data[i];
    bb += target.data[i] * target.data[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  double cs = 0.0;
  bool degenerate = false;
  if (na == 0.0 || nb == 0.0) {
    cosine_zero_norm_ = true;
    degenerate = true;
  } else {
    cs = ab / (na * nb);
  }
  Tensor out({1});
  out.data[0] = cs;
  Tensor tgt = target;
  return push(std::move(out), {a.id},
              [tgt = std::move(tgt), ab, aa, na, nb, degenerate](Tape& t, int self) {
                const Node& n = t.node(self);
                const int pa = n.parents[0];
                if (!t.node(pa).needs_grad || degenerate) return;
                const double g = n.grad.data[0];
                const Tensor& av = t.node(pa).value;
                Tensor ga(av.shape);
                const double inv = 1.0 / (na * nb);
                const double proj = ab / (aa * na * nb);
                for (std::size_t i = 0; i < ga.data.size(); ++i) {
                  ga.data[i] = g * (tgt.data[i] * inv - av.data[i] * proj);
                }
                t.accumulate(pa, ga);
              });
}

Var Tape::gaussian_bits(Var z, Var mu, Var log_sigma, double step) {
  const Tensor& zt = value(z);
  const Tensor& mt = value(mu);
  const Tensor& st = value(log_sigma);
  require_rank(zt, 4, "gaussian_bits z");
  const int c = zt.shape[1];
  require_shape(mt, {c}, "gaussian_bits mu");
  require_shape(st, {c}, "gaussian_bits log_sigma");
  if (!(step > 0.0)) throw ConfigError("gaussian_bits: step must be positive");

  const int n = zt.shape[0], hw = zt.shape[2] * zt.shape[3];
  double total = 0.0;
  for (int b = 0; b < n; ++b) {
    for (int i = 0; i < c; ++i) {
      const double m = mt.data[static_cast<std::size_t>(i)];
      const double sg = std::exp(st.data[static_cast<std::size_t>(i)]);
      const double* row = zt.data.data() + (static_cast<std::size_t>(b) * c + i) * hw;
      for (int p = 0; p < hw; ++p) {
        const double hi = (row[p] - m + 0.5 * step) / sg;
        const double lo = (row[p] - m - 0.5 * step) / sg;
        const double prob = norm_cdf(hi) - norm_cdf(lo);
        total += -kLog2e * std::log(prob > kBitsFloor ? prob : kBitsFloor);
      }
    }
  }
  Tensor out({1});
  out.data[0] = total;
  return push(std::move(out), {z.id, mu.id, log_sigma.id}, [step](Tape& t, int self) {
    const Node& nd = t.node(self);
    const int pz = nd.parents[0], pm = nd.parents[1], ps = nd.parents[2];
    const bool need_z = t.node(pz).needs_grad, need_m = t.node(pm).needs_grad,
               need_s = t.node(ps).needs_grad;
    if (!need_z && !need_m && !need_s) return;
    const double g = nd.grad.data[0];
    const Tensor& zv = t.node(pz).value;
    const Tensor& mv = t.node(pm).value;
    const Tensor& sv = t.node(ps).value;
    const int n = zv.shape[0], c = zv.shape[1], hw = zv.shape[2] * zv.shape[3];
    Tensor gz, gm, gs;
    if (need_z) gz = Tensor::zeros(zv.shape);
    if (need_m) gm = Tensor::zeros(mv.shape);
    if (need_s) gs = Tensor::zeros(sv.shape);
    for (int b = 0; b < n; ++b) {
      for (int i = 0; i < c; ++i) {
        const double m = mv.data[static_cast<std::size_t>(i)];
        const double sg = std::exp(sv.data[static_cast<std::size_t>(i)]);
        const double* row = zv.data.data() + (static_cast<std::size_t>(b) * c + i) * hw;
        for (int p = 0; p < hw; ++p) {
          const double hi = (row[p] - m + 0.5 * step) / sg;
          const double lo = (row[p] - m - 0.5 * step) / sg;
          const double prob = norm_cdf(hi) - norm_cdf(lo);
          if (prob <= kBitsFloor) continue;  // clipped region, flat
          const double scale = -g * kLog2e / prob;
          const double phi_hi = norm_pdf(hi), phi_lo = norm_pdf(lo);
          if (need_z) {
            gz.data[(static_cast<std::size_t>(b) * c + i) * hw + p] +=
                scale * (phi_hi - phi_lo) / sg;
          }
          if (need_m) {
            gm.data[static_cast<std::size_t>(i)] += scale * -(phi_hi - phi_lo) / sg;
          }
          if (need_s) {
            // d prob / d log_sigma = -(hi*phi(hi) - lo*phi(lo))
            gs.data[static_cast<std::size_t>(i)] += scale * -(hi * phi_hi - lo * phi_lo);
          }
        }
      }
    }
    if (need_z) t.accumulate(pz, gz);
    if (need_m) t.accumulate(pm, gm);
    if (need_s) t.accumulate(ps, gs);
  });
}

std::vector<Tensor> Tape::backward(Var loss, const std::vector<Var>& wrt) {
  if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size())) {
    throw ConfigError("backward: invalid loss var");
  }
  if (node(loss.id).value.numel() != 1) {
    throw ConfigError("backward: loss must be scalar, got " +
                      shape_str(node(loss.id).value.shape));
  }
  for (Node& n : nodes_) {
    n.grad_live = false;
    n.grad = Tensor();
  }
  grad_buf(loss.id).data[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = node(id);
    if (!n.grad_live || !n.needs_grad || !n.back) continue;
    n.back(*this, id);
  }
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (Var v : wrt) {
    const Node& n = node(v.id);
    out.push_back(n.grad_live ? n.grad : Tensor::zeros(n.value.shape));
  }
  return out;
}

}  // namespace nic
