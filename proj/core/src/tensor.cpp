#include "nic/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "nic/errors.hpp"

namespace nic {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::zeros(std::vector<int> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::randn(std::vector<int> s, Rng& rng, double stddev) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = rng.normal() * stddev;
  return t;
}

Tensor Tensor::uniform(std::vector<int> s, Rng& rng, double lo, double hi) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

void Tensor::ensure_finite(const char* context) const {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in ") + context);
    }
  }
}

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ConfigError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what) {
  if (t.shape != shape) {
    throw ConfigError(std::string(what) + ": expected shape " + shape_str(shape) + ", got " +
                      shape_str(t.shape));
  }
}

void require_rank(const Tensor& t, int rank, const char* what) {
  if (static_cast<int>(t.shape.size()) != rank) {
    throw ConfigError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                      shape_str(t.shape));
  }
}

double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ConfigError("dot: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return s;
}

Tensor clamp01(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return out;
}

std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t tensor_hash(const Tensor& t) {
  std::uint64_t h = fnv1a64(t.shape.data(), t.shape.size() * sizeof(int));
  return fnv1a64(t.data.data(), t.data.size() * sizeof(double), h);
}

}  // namespace nic
