#include "nic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "nic/errors.hpp"
#include "nic/image_io.hpp"

namespace nic {

std::vector<Tensor> ingest_dataset(const std::string& dir, int size, IngestStats* stats) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw NotFoundError("dataset directory missing: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") {
      names.push_back(e.path().string());
    }
  }
  std::sort(names.begin(), names.end());
  std::vector<Tensor> out;
  IngestStats st;
  for (const std::string& name : names) {
    try {
      Tensor img = read_ppm(name);
      out.push_back(resize_bilinear(center_crop_square(img), size, size));
      st.loaded++;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "ingest: skipping %s (%s)\n", name.c_str(), e.what());
      st.skipped++;
    }
  }
  if (stats) *stats = st;
  return out;
}

namespace {

struct Color {
  double r, g, b;
};

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

void fill(Tensor& img, const Color& c) {
  const int hw = img.shape[2] * img.shape[3];
  for (int p = 0; p < hw; ++p) {
    img.data[static_cast<std::size_t>(p)] = c.r;
    img.data[static_cast<std::size_t>(hw + p)] = c.g;
    img.data[static_cast<std::size_t>(2 * hw + p)] = c.b;
  }
}

void set_px(Tensor& img, int y, int x, const Color& c) {
  img.at(0, 0, y, x) = c.r;
  img.at(0, 1, y, x) = c.g;
  img.at(0, 2, y, x) = c.b;
}

Color lerp(const Color& a, const Color& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

}  // namespace

Tensor synth_image(int size, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0xDA7A);
  Tensor img({1, 3, size, size});
  const int kind = static_cast<int>(seed % 6);
  const Color c0 = random_color(rng), c1 = random_color(rng);
  switch (kind) {
    case 0: {  // linear ramp along a random direction
      const double ang = rng.uniform(0.0, 6.283185307179586);
      const double dx = std::cos(ang), dy = std::sin(ang);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          double t = ((x + 0.5) / size - 0.5) * dx + ((y + 0.5) / size - 0.5) * dy;
          t = std::clamp(t + 0.5, 0.0, 1.0);
          set_px(img, y, x, lerp(c0, c1, t));
        }
      }
      break;
    }
    case 1: {  // radial blend
      const double cy = rng.uniform(0.25, 0.75) * size, cx = rng.uniform(0.25, 0.75) * size;
      const double rad = rng.uniform(0.3, 0.7) * size;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double d = std::hypot(y - cy, x - cx) / rad;
          set_px(img, y, x, lerp(c0, c1, std::clamp(d, 0.0, 1.0)));
        }
      }
      break;
    }
    case 2: {  // flat rectangles
      fill(img, c0);
      const int n = 3 + static_cast<int>(rng.below(4));
      for (int k = 0; k < n; ++k) {
        const Color c = random_color(rng);
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
        const int hh = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 2)));
        const int ww = 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 2)));
        for (int y = y0; y < std::min(size, y0 + hh); ++y) {
          for (int x = x0; x < std::min(size, x0 + ww); ++x) set_px(img, y, x, c);
        }
      }
      break;
    }
    case 3: {  // flat discs
      fill(img, c0);
      const int n = 3 + static_cast<int>(rng.below(4));
      for (int k = 0; k < n; ++k) {
        const Color c = random_color(rng);
        const double cy = rng.uniform(0.0, 1.0) * size, cx = rng.uniform(0.0, 1.0) * size;
        const double rad = rng.uniform(0.08, 0.3) * size;
        for (int y = 0; y < size; ++y) {
          for (int x = 0; x < size; ++x) {
            if (std::hypot(y - cy, x - cx) <= rad) set_px(img, y, x, c);
          }
        }
      }
      break;
    }
    case 4: {  // sinusoid texture
      const double fy = rng.uniform(0.8, 2.5), fx = rng.uniform(0.8, 2.5);
      const double ph = rng.uniform(0.0, 6.283185307179586);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double s =
              0.5 + 0.5 * std::sin(6.283185307179586 * (fy * y + fx * x) / size + ph);
          set_px(img, y, x, lerp(c0, c1, s));
        }
      }
      break;
    }
    default: {  // checkerboard, cells no smaller than the codec's footprint
      const int cell = size / 6 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 4)));
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          set_px(img, y, x, ((y / cell + x / cell) % 2 == 0) ? c0 : c1);
        }
      }
      break;
    }
  }
  // One [1,2,1]/4 separable smoothing pass takes the aliasing edge off the
  // flat-color classes; photographic corpora have no step edges either.
  Tensor out = img;
  for (int c = 0; c < 3; ++c) {
    Tensor tmp({size, size});
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const int xl = x > 0 ? x - 1 : 0, xr = x < size - 1 ? x + 1 : size - 1;
        tmp.data[static_cast<std::size_t>(y) * size + x] =
            0.25 * img.at(0, c, y, xl) + 0.5 * img.at(0, c, y, x) + 0.25 * img.at(0, c, y, xr);
      }
    }
    for (int y = 0; y < size; ++y) {
      const int yu = y > 0 ? y - 1 : 0, yd = y < size - 1 ? y + 1 : size - 1;
      for (int x = 0; x < size; ++x) {
        out.at(0, c, y, x) = 0.25 * tmp.data[static_cast<std::size_t>(yu) * size + x] +
                             0.5 * tmp.data[static_cast<std::size_t>(y) * size + x] +
                             0.25 * tmp.data[static_cast<std::size_t>(yd) * size + x];
      }
    }
  }
  return out;
}

void generate_synthetic_dataset(const std::string& dir, int count, int size, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04d.ppm", i);
    const Tensor img = synth_image(size, seed * 1000003ULL + static_cast<std::uint64_t>(i));
    write_ppm((fs::path(dir) / name).string(), img);
  }
}

PairSuite make_pair_suite(const std::vector<Tensor>& pool, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("make_pair_suite: count must be >= 1");
  if (pool.size() < static_cast<std::size_t>(2 * count)) {
    throw ConfigError("make_pair_suite: pool of " + std::to_string(pool.size()) +
                      " images cannot supply " + std::to_string(count) + " disjoint pairs");
  }
  Rng rng = Rng::derive(seed, 0x5017E);
  std::vector<int> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
  }
  PairSuite suite;
  std::size_t cursor = 0;
  while (static_cast<int>(suite.pairs.size()) < count) {
    if (cursor + 1 >= idx.size()) {
      throw ConfigError("make_pair_suite: ran out of byte-distinct images");
    }
    const int a = idx[cursor], b = idx[cursor + 1];
    cursor += 2;
    if (pool[static_cast<std::size_t>(a)].data == pool[static_cast<std::size_t>(b)].data) {
      continue;  // byte-identical images cannot form a pair
    }
    suite.pairs.emplace_back(a, b);
  }
  return suite;
}

}  // namespace nic
