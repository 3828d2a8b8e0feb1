#pragma once

#include <vector>

#include "nic/errors.hpp"
#include "nic/tensor.hpp"

// Raw forward/backward compute kernels shared by the tape (f64) and the
// compression-facing forward path (f32 or f64). All accumulations run in a
// fixed (ci, kh, kw) row-major order; no pairwise/tree reductions, so results
// are reproducible byte-for-byte on a given platform.

namespace nic::kernels {

struct ConvDims {
  int n, cin, h, w;        // input
  int cout, kh, kw;        // kernel
  int stride, pad;
  int oh, ow;              // output
};

// Validates shapes and computes output extents for conv2d.
ConvDims conv2d_dims(const std::vector<int>& in, const std::vector<int>& k, int stride, int pad);
// Same for conv2d_transpose; output extents are (h-1)*stride + kh - 2*pad.
ConvDims conv2d_transpose_dims(const std::vector<int>& in, const std::vector<int>& k, int stride,
                               int pad);

template <typename T>
void conv2d_fwd(const T* in, const T* k, T* out, const ConvDims& d) {
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.cout; ++co) {
      T* outp = out + (static_cast<std::size_t>(n) * d.cout + co) * d.oh * d.ow;
      for (int oh = 0; oh < d.oh; ++oh) {
        const int ih0 = oh * d.stride - d.pad;
        int kh_lo = ih0 < 0 ? -ih0 : 0;
        int kh_hi = d.kh;
        if (ih0 + kh_hi > d.h) kh_hi = d.h - ih0;
        for (int ow = 0; ow < d.ow; ++ow) {
          const int iw0 = ow * d.stride - d.pad;
          int kw_lo = iw0 < 0 ? -iw0 : 0;
          int kw_hi = d.kw;
          if (iw0 + kw_hi > d.w) kw_hi = d.w - iw0;
          T acc = T(0);
          for (int ci = 0; ci < d.cin; ++ci) {
            const T* inp = in + (static_cast<std::size_t>(n) * d.cin + ci) * d.h * d.w;
            const T* kp = k + (static_cast<std::size_t>(co) * d.cin + ci) * d.kh * d.kw;
            for (int khi = kh_lo; khi < kh_hi; ++khi) {
              const T* irow = inp + (ih0 + khi) * d.w + iw0;
              const T* krow = kp + khi * d.kw;
              for (int kwi = kw_lo; kwi < kw_hi; ++kwi) acc += irow[kwi] * krow[kwi];
            }
          }
          outp[oh * d.ow + ow] = acc;
        }
      }
    }
  }
}

// Scatter formulation of the adjoint: each input position spreads its value
// through the kernel onto the (stride-spaced) output window. `out_h/out_w`
// may exceed the natural extents when recovering a primal input whose tail
// rows were dropped by the forward floor; those positions simply receive no
// contributions. Accumulation order is fixed at (ca, cb, h, w, kh, kw).
template <typename T>
void conv2d_transpose_fwd(const T* in, const T* k, T* out, const ConvDims& d, int out_h,
                          int out_w) {
  const int ca_n = d.cout;  // channels of `in` (the forward conv's output side)
  const int cb_n = d.cin;   // channels of `out`
  const std::size_t total = static_cast<std::size_t>(d.n) * cb_n * out_h * out_w;
  for (std::size_t i = 0; i < total; ++i) out[i] = T(0);
  for (int n = 0; n < d.n; ++n) {
    for (int ca = 0; ca < ca_n; ++ca) {
      const T* inp = in + (static_cast<std::size_t>(n) * ca_n + ca) * d.oh * d.ow;
      for (int cb = 0; cb < cb_n; ++cb) {
        const T* kp = k + (static_cast<std::size_t>(ca) * cb_n + cb) * d.kh * d.kw;
        T* outp = out + (static_cast<std::size_t>(n) * cb_n + cb) * out_h * out_w;
        for (int h = 0; h < d.oh; ++h) {
          const int y0 = h * d.stride - d.pad;
          int kh_lo = y0 < 0 ? -y0 : 0;
          int kh_hi = d.kh;
          if (y0 + kh_hi > out_h) kh_hi = out_h - y0;
          for (int w = 0; w < d.ow; ++w) {
            const T v = inp[h * d.ow + w];
            const int x0 = w * d.stride - d.pad;
            int kw_lo = x0 < 0 ? -x0 : 0;
            int kw_hi = d.kw;
            if (x0 + kw_hi > out_w) kw_hi = out_w - x0;
            for (int khi = kh_lo; khi < kh_hi; ++khi) {
              T* orow = outp + (y0 + khi) * out_w + x0;
              const T* krow = kp + khi * d.kw;
              for (int kwi = kw_lo; kwi < kw_hi; ++kwi) orow[kwi] += v * krow[kwi];
            }
          }
        }
      }
    }
  }
}

// y_c = x_c * (beta_c + sum_j gamma_cj x_j^2)^(-1/2), or ^(+1/2) when inverse.
template <typename T>
void gdn_fwd(const T* x, const T* beta, const T* gamma, T* y, int n, int c, int hw, bool inverse) {
  std::vector<T> sq(static_cast<std::size_t>(c));
  for (int b = 0; b < n; ++b) {
    const T* xb = x + static_cast<std::size_t>(b) * c * hw;
    T* yb = y + static_cast<std::size_t>(b) * c * hw;
    for (int p = 0; p < hw; ++p) {
      for (int j = 0; j < c; ++j) {
        const T v = xb[j * hw + p];
        sq[static_cast<std::size_t>(j)] = v * v;
      }
      for (int i = 0; i < c; ++i) {
        T den = beta[i];
        const T* grow = gamma + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) den += grow[j] * sq[static_cast<std::size_t>(j)];
        using std::sqrt;
        const T r = sqrt(den);
        yb[i * hw + p] = inverse ? xb[i * hw + p] * r : xb[i * hw + p] / r;
      }
    }
  }
}

template <typename T>
void relu_fwd(const T* x, T* y, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// Backward passes (training/attack arithmetic, f64 only).
void conv2d_bwd(const Tensor& in, const Tensor& k, const Tensor& gout, const ConvDims& d,
                Tensor* gin, Tensor* gk);
void conv2d_transpose_bwd(const Tensor& in, const Tensor& k, const Tensor& gout,
                          const ConvDims& d, int out_h, int out_w, Tensor* gin, Tensor* gk);
void gdn_bwd(const Tensor& x, const Tensor& beta, const Tensor& gamma, const Tensor& gout,
             bool inverse, Tensor* gx, Tensor* gbeta, Tensor* ggamma);

}  // namespace nic::kernels
