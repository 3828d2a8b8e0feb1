#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nic/rng.hpp"

namespace nic {

// Precision the values were produced at. Storage is always double; the tag
// records which arithmetic path generated the contents.
enum class Precision : std::uint8_t { F64, F32, F16Emulated };

// Dense N-dimensional array. Images and latents use (N,C,H,W); parameter
// vectors/matrices use their natural ranks.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  Precision prec = Precision::F64;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  // NCHW accessors for rank-4 tensors.
  double& at(int n, int c, int h, int w) {
    return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }
  double at(int n, int c, int h, int w) const {
    return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }

  static Tensor zeros(std::vector<int> s);
  static Tensor full(std::vector<int> s, double v);
  static Tensor randn(std::vector<int> s, Rng& rng, double stddev = 1.0);
  static Tensor uniform(std::vector<int> s, Rng& rng, double lo, double hi);

  // Throws NumericError naming `context` if any value is NaN/Inf.
  void ensure_finite(const char* context) const;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what);
void require_rank(const Tensor& t, int rank, const char* what);

// Elementwise helpers used across modules (not differentiable; the tape has
// its own op set).
double dot(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& t);
Tensor clamp01(const Tensor& t);

// FNV-1a over the raw little-endian bytes of shape+data; used by the
// determinism checks and output provenance headers.
std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t tensor_hash(const Tensor& t);

}  // namespace nic
