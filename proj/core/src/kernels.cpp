#include "nic/kernels.hpp"

#include <cmath>

namespace nic::kernels {

ConvDims conv2d_dims(const std::vector<int>& in, const std::vector<int>& k, int stride, int pad) {
  if (in.size() != 4 || k.size() != 4) {
    throw ConfigError("conv2d: input and kernel must be rank 4, got " + shape_str(in) + " and " +
                      shape_str(k));
  }
  if (stride <= 0) throw ConfigError("conv2d: stride must be positive");
  if (pad < 0) throw ConfigError("conv2d: padding must be non-negative");
  if (in[1] != k[1]) {
    throw ConfigError("conv2d: input channels " + std::to_string(in[1]) +
                      " != kernel channels " + std::to_string(k[1]));
  }
  ConvDims d;
  d.n = in[0];
  d.cin = in[1];
  d.h = in[2];
  d.w = in[3];
  d.cout = k[0];
  d.kh = k[2];
  d.kw = k[3];
  d.stride = stride;
  d.pad = pad;
  d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw) {
    throw ConfigError("conv2d: kernel larger than padded input");
  }
  return d;
}

ConvDims conv2d_transpose_dims(const std::vector<int>& in, const std::vector<int>& k, int stride,
                               int pad) {
  if (in.size() != 4 || k.size() != 4) {
    throw ConfigError("conv2d_transpose: input and kernel must be rank 4, got " + shape_str(in) +
                      " and " + shape_str(k));
  }
  if (stride <= 0) throw ConfigError("conv2d_transpose: stride must be positive");
  if (pad < 0) throw ConfigError("conv2d_transpose: padding must be non-negative");
  if (in[1] != k[0]) {
    throw ConfigError("conv2d_transpose: input channels " + std::to_string(in[1]) +
                      " != kernel leading extent " + std::to_string(k[0]));
  }
  ConvDims d;
  d.n = in[0];
  d.cout = in[1];  // forward-conv output side
  d.cin = k[1];    // forward-conv input side == transpose output channels
  d.oh = in[2];
  d.ow = in[3];
  d.kh = k[2];
  d.kw = k[3];
  d.stride = stride;
  d.pad = pad;
  d.h = (d.oh - 1) * stride + d.kh - 2 * pad;
  d.w = (d.ow - 1) * stride + d.kw - 2 * pad;
  if (d.h <= 0 || d.w <= 0) throw ConfigError("conv2d_transpose: empty output");
  return d;
}

void conv2d_bwd(const Tensor& in, const Tensor& k, const Tensor& gout, const ConvDims& d,
                Tensor* gin, Tensor* gk) {
  if (gin) {
    *gin = Tensor::zeros(in.shape);
    conv2d_transpose_fwd(gout.data.data(), k.data.data(), gin->data.data(), d, d.h, d.w);
  }
  if (gk) {
    *gk = Tensor::zeros(k.shape);
    for (int co = 0; co < d.cout; ++co) {
      for (int ci = 0; ci < d.cin; ++ci) {
        double* gkp = gk->data.data() + (static_cast<std::size_t>(co) * d.cin + ci) * d.kh * d.kw;
        for (int khi = 0; khi < d.kh; ++khi) {
          for (int kwi = 0; kwi < d.kw; ++kwi) {
            double acc = 0.0;
            for (int n = 0; n < d.n; ++n) {
              const double* gop =
                  gout.data.data() + (static_cast<std::size_t>(n) * d.cout + co) * d.oh * d.ow;
              const double* inp =
                  in.data.data() + (static_cast<std::size_t>(n) * d.cin + ci) * d.h * d.w;
              for (int oh = 0; oh < d.oh; ++oh) {
                const int ih = oh * d.stride - d.pad + khi;
                if (ih < 0 || ih >= d.h) continue;
                for (int ow = 0; ow < d.ow; ++ow) {
                  const int iw = ow * d.stride - d.pad + kwi;
                  if (iw < 0 || iw >= d.w) continue;
                  acc += gop[oh * d.ow + ow] * inp[ih * d.w + iw];
                }
              }
            }
            gkp[khi * d.kw + kwi] = acc;
          }
        }
      }
    }
  }
}

void conv2d_transpose_bwd(const Tensor& in, const Tensor& k, const Tensor& gout,
                          const ConvDims& d, int out_h, int out_w, Tensor* gin, Tensor* gk) {
  if (gin) {
    // Adjoint of the adjoint is the forward conv over gout with the same
    // kernel memory; (Ca,Cb,kh,kw) already matches conv2d's (Cout,Cin,kh,kw).
    *gin = Tensor::zeros(in.shape);
    ConvDims cd = conv2d_dims(gout.shape, k.shape, d.stride, d.pad);
    conv2d_fwd(gout.data.data(), k.data.data(), gin->data.data(), cd);
  }
  if (gk) {
    *gk = Tensor::zeros(k.shape);
    const int ca_n = d.cout;
    const int cb_n = d.cin;
    for (int ca = 0; ca < ca_n; ++ca) {
      for (int cb = 0; cb < cb_n; ++cb) {
        double* gkp = gk->data.data() + (static_cast<std::size_t>(ca) * cb_n + cb) * d.kh * d.kw;
        for (int khi = 0; khi < d.kh; ++khi) {
          for (int kwi = 0; kwi < d.kw; ++kwi) {
            double acc = 0.0;
            for (int n = 0; n < d.n; ++n) {
              const double* inp =
                  in.data.data() + (static_cast<std::size_t>(n) * ca_n + ca) * d.oh * d.ow;
              const double* gop =
                  gout.data.data() + (static_cast<std::size_t>(n) * cb_n + cb) * out_h * out_w;
              for (int h = 0; h < d.oh; ++h) {
                const int y = h * d.stride - d.pad + khi;
                if (y < 0 || y >= out_h) continue;
                for (int w = 0; w < d.ow; ++w) {
                  const int x = w * d.stride - d.pad + kwi;
                  if (x < 0 || x >= out_w) continue;
                  acc += inp[h * d.ow + w] * gop[y * out_w + x];
                }
              }
            }
            gkp[khi * d.kw + kwi] = acc;
          }
        }
      }
    }
  }
}

void gdn_bwd(const Tensor& x, const Tensor& beta, const Tensor& gamma, const Tensor& gout,
             bool inverse, Tensor* gx, Tensor* gbeta, Tensor* ggamma) {
  const int n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
  if (gx) *gx = Tensor::zeros(x.shape);
  if (gbeta) *gbeta = Tensor::zeros(beta.shape);
  if (ggamma) *ggamma = Tensor::zeros(gamma.shape);
  std::vector<double> sq(static_cast<std::size_t>(c)), t(static_cast<std::size_t>(c)),
      r(static_cast<std::size_t>(c)), colsum(static_cast<std::size_t>(c));
  for (int b = 0; b < n; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * c * hw;
    const double* xb = x.data.data() + base;
    const double* gob = gout.data.data() + base;
    for (int p = 0; p < hw; ++p) {
      for (int j = 0; j < c; ++j) {
        const double v = xb[j * hw + p];
        sq[static_cast<std::size_t>(j)] = v * v;
      }
      for (int i = 0; i < c; ++i) {
        double den = beta.data[static_cast<std::size_t>(i)];
        const double* grow = gamma.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) den += grow[j] * sq[static_cast<std::size_t>(j)];
        const double ri = std::sqrt(den);
        r[static_cast<std::size_t>(i)] = ri;
        // t_i folds gout, x and the power of r shared by all partials of y_i.
        t[static_cast<std::size_t>(i)] =
            inverse ? gob[i * hw + p] * xb[i * hw + p] / ri
                    : gob[i * hw + p] * xb[i * hw + p] / (den * ri);
      }
      if (gx) {
        for (int m = 0; m < c; ++m) colsum[static_cast<std::size_t>(m)] = 0.0;
        for (int i = 0; i < c; ++i) {
          const double ti = t[static_cast<std::size_t>(i)];
          const double* grow = gamma.data.data() + static_cast<std::size_t>(i) * c;
          for (int m = 0; m < c; ++m) colsum[static_cast<std::size_t>(m)] += ti * grow[m];
        }
        double* gxb = gx->data.data() + base;
        for (int m = 0; m < c; ++m) {
          const double direct = inverse ? gob[m * hw + p] * r[static_cast<std::size_t>(m)]
                                        : gob[m * hw + p] / r[static_cast<std::size_t>(m)];
          const double mix = xb[m * hw + p] * colsum[static_cast<std::size_t>(m)];
          gxb[m * hw + p] = direct + (inverse ? mix : -mix);
        }
      }
      if (gbeta) {
        for (int i = 0; i < c; ++i) {
          const double half_t = 0.5 * t[static_cast<std::size_t>(i)];
          gbeta->data[static_cast<std::size_t>(i)] += inverse ? half_t : -half_t;
        }
      }
      if (ggamma) {
        for (int i = 0; i < c; ++i) {
          const double half_t = 0.5 * t[static_cast<std::size_t>(i)];
          double* grow = ggamma->data.data() + static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) {
            const double v = half_t * sq[static_cast<std::size_t>(j)];
            grow[j] += inverse ? v : -v;
          }
        }
      }
    }
  }
}

}  // namespace nic::kernels
