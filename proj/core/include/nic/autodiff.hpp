#pragma once

#include <functional>
#include <vector>

#include "nic/kernels.hpp"
#include "nic/tensor.hpp"

namespace nic {

// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Records one forward graph, owned by a single
// attack/training run; replaying backward visits each node exactly once in
// reverse push order. Gradients are only propagated into subgraphs that
// contain a grad-requiring leaf, so attacks (input-only gradients) skip the
// kernel-gradient work entirely.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(Var v) const { return node(v.id).value; }
  std::size_t size() const { return nodes_.size(); }

  // -- primitives ---------------------------------------------------------
  Var conv2d(Var input, Var kernel, int stride, int padding);
  Var conv2d_transpose(Var input, Var kernel, int stride, int padding);
  Var add_channel_bias(Var x, Var bias);
  Var gdn(Var x, Var beta, Var gamma_matrix, bool inverse);
  Var relu(Var x);
  Var add(Var a, Var b);
  Var affine(Var a, double mul, double shift);
  Var add_const(Var a, const Tensor& c);
  Var tanh_op(Var a);
  Var softplus_floor(Var a, double floor);  // floor + log(1 + e^a), elementwise
  Var sum(Var a);
  Var l2_to_const(Var a, const Tensor& target);      // ||a - t||_2, scalar
  Var sumsq_to_const(Var a, const Tensor& target);   // ||a - t||_2^2, scalar
  Var cosine_to_const(Var a, const Tensor& target);  // CS(a, t), scalar
  // Per-channel Gaussian entropy model: total bits of z under
  // N(mu_c, sigma_c^2) integrated over quantization bins of width `step`.
  Var gaussian_bits(Var z, Var mu, Var log_sigma, double step);

  // Gradients of a scalar loss w.r.t. each listed var (zeros if unreachable).
  std::vector<Tensor> backward(Var loss, const std::vector<Var>& wrt);

  // Set when cosine_to_const met a zero-norm vector and returned CS = 0.
  bool cosine_zero_norm_hit() const { return cosine_zero_norm_; }

 private:
  using BackFn = std::function<void(Tape&, int)>;

  struct Node {
    Tensor value;
    Tensor grad;
    bool grad_live = false;
    bool needs_grad = false;
    std::vector<int> parents;
    BackFn back;
  };

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Var push(Tensor value, std::vector<int> parents, BackFn back);
  Tensor& grad_buf(int id);
  void accumulate(int id, const Tensor& g);

  std::vector<Node> nodes_;
  bool cosine_zero_norm_ = false;
};

}  // namespace nic
