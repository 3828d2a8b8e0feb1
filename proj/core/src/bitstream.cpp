#include "nic/bitstream.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nic/errors.hpp"

namespace nic {

Bitstream Bitstream::with_header(int height, int width, int qf) {
  if (height < 0 || height > 0xFFFF || width < 0 || width > 0xFFFF || qf < 0 || qf > 0xFF) {
    throw ConfigError("bitstream header: extents out of range");
  }
  Bitstream b;
  b.header = {'N', 'B', 1, static_cast<std::uint8_t>(qf),
              static_cast<std::uint8_t>(height & 0xFF), static_cast<std::uint8_t>(height >> 8),
              static_cast<std::uint8_t>(width & 0xFF),  static_cast<std::uint8_t>(width >> 8)};
  return b;
}

void Bitstream::set_payload(std::vector<std::uint8_t> bytes) {
  payload = std::move(bytes);
  bit_length = static_cast<std::uint64_t>(payload.size()) * 8;
}

void write_nicb(const std::string& path, const Bitstream& b) {
  std::vector<std::uint8_t> buf;
  buf.reserve(12 + b.payload.size());
  buf.insert(buf.end(), b.header.begin(), b.header.end());
  const auto n = static_cast<std::uint32_t>(b.payload.size());
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((n >> (8 * i)) & 0xFF));
  buf.insert(buf.end(), b.payload.begin(), b.payload.end());
  write_file_atomic(path, buf.data(), buf.size());
}

Bitstream read_nicb(const std::string& path) {
  const std::vector<std::uint8_t> buf = read_file_bytes(path);
  if (buf.size() < 12 || buf[0] != 'N' || buf[1] != 'B') {
    throw NumericError("read_nicb: not a .nicb file: " + path);
  }
  if (buf[2] != 1) throw NumericError("read_nicb: unsupported version");
  Bitstream b;
  std::copy(buf.begin(), buf.begin() + 8, b.header.begin());
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(buf[8 + i]) << (8 * i);
  if (buf.size() != 12u + n) throw NumericError("read_nicb: truncated payload");
  b.set_payload(std::vector<std::uint8_t>(buf.begin() + 12, buf.end()));
  return b;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot open " + path);
  f.seekg(0, std::ios::end);
  const auto len = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> out(len);
  if (len > 0) f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(len));
  if (!f) throw NotFoundError("short read on " + path);
  return out;
}

void write_file_atomic(const std::string& path, const void* data, std::size_t len) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw NotFoundError("cannot write " + tmp.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw NotFoundError("short write on " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

}  // namespace nic
