#include "nic/image_io.hpp"

#include <cmath>

#include "nic/bitstream.hpp"
#include "nic/errors.hpp"

namespace nic {

namespace {

// PPM token reader: skips whitespace and '#' comments.
struct PpmScanner {
  const std::uint8_t* p;
  std::size_t n, pos = 0;
  int next_int(const std::string& path) {
    while (pos < n) {
      const char c = static_cast<char>(p[pos]);
      if (c == '#') {
        while (pos < n && p[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    int v = 0;
    bool any = false;
    while (pos < n && p[pos] >= '0' && p[pos] <= '9') {
      v = v * 10 + (p[pos] - '0');
      any = true;
      ++pos;
    }
    if (!any) throw NumericError("malformed PPM header in " + path);
    return v;
  }
};

}  // namespace

Tensor read_ppm(const std::string& path) {
  const std::vector<std::uint8_t> buf = read_file_bytes(path);
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') {
    throw NumericError("not a binary P6 PPM: " + path);
  }
  PpmScanner sc{buf.data(), buf.size(), 2};
  const int w = sc.next_int(path);
  const int h = sc.next_int(path);
  const int maxval = sc.next_int(path);
  if (w <= 0 || h <= 0) throw NumericError("bad PPM extents in " + path);
  if (maxval != 255) throw NumericError("only 8-bit PPM supported: " + path);
  sc.pos += 1;  // single whitespace byte after maxval
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (sc.pos + need > buf.size()) throw NumericError("truncated PPM payload in " + path);
  Tensor img({1, 3, h, w});
  const std::uint8_t* px = buf.data() + sc.pos;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(0, c, y, x) = static_cast<double>(px[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0;
      }
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  require_rank(image, 4, "write_ppm image");
  if (image.shape[0] != 1 || image.shape[1] != 3) {
    throw ConfigError("write_ppm: expected (1,3,H,W), got " + shape_str(image.shape));
  }
  const int h = image.shape[2], w = image.shape[3];
  std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> buf(header.begin(), header.end());
  buf.reserve(buf.size() + static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = image.at(0, c, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        buf.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
    }
  }
  write_file_atomic(path, buf.data(), buf.size());
}

Tensor center_crop_square(const Tensor& image) {
  require_rank(image, 4, "center_crop_square image");
  const int h = image.shape[2], w = image.shape[3];
  const int side = h < w ? h : w;
  const int y0 = (h - side) / 2, x0 = (w - side) / 2;
  Tensor out({1, image.shape[1], side, side});
  for (int c = 0; c < image.shape[1]; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        out.at(0, c, y, x) = image.at(0, c, y0 + y, x0 + x);
      }
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
  require_rank(image, 4, "resize_bilinear image");
  if (out_h <= 0 || out_w <= 0) throw ConfigError("resize_bilinear: bad output extents");
  const int h = image.shape[2], w = image.shape[3];
  if (h == out_h && w == out_w) return image;
  Tensor out({1, image.shape[1], out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int c = 0; c < image.shape[1]; ++c) {
    for (int y = 0; y < out_h; ++y) {
      double fy = (y + 0.5) * sy - 0.5;
      fy = fy < 0.0 ? 0.0 : (fy > h - 1.0 ? h - 1.0 : fy);
      const int y0 = static_cast<int>(fy);
      const int y1 = y0 + 1 < h ? y0 + 1 : y0;
      const double wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        double fx = (x + 0.5) * sx - 0.5;
        fx = fx < 0.0 ? 0.0 : (fx > w - 1.0 ? w - 1.0 : fx);
        const int x0 = static_cast<int>(fx);
        const int x1 = x0 + 1 < w ? x0 + 1 : x0;
        const double wx = fx - x0;
        const double a = image.at(0, c, y0, x0) * (1.0 - wx) + image.at(0, c, y0, x1) * wx;
        const double b = image.at(0, c, y1, x0) * (1.0 - wx) + image.at(0, c, y1, x1) * wx;
        out.at(0, c, y, x) = a * (1.0 - wy) + b * wy;
      }
    }
  }
  return out;
}

}  // namespace nic
