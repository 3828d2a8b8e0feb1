#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nic {

// Compressed stream: 8-byte container header plus the coder payload.
// Header layout (little-endian): "NB" magic, version, quality factor,
// u16 height, u16 width. Collision/Hamming comparisons look at the payload
// only, never the header.
struct Bitstream {
  std::array<std::uint8_t, 8> header{};
  std::vector<std::uint8_t> payload;
  std::uint64_t bit_length = 0;  // payload bits; trailing pad bits are zero

  static Bitstream with_header(int height, int width, int qf);

  int height() const { return header[4] | (header[5] << 8); }
  int width() const { return header[6] | (header[7] << 8); }
  int qf() const { return header[3]; }

  void set_payload(std::vector<std::uint8_t> bytes);

  // Equality of the coded content: bit length and payload bytes.
  bool payload_equal(const Bitstream& o) const {
    return bit_length == o.bit_length && payload == o.payload;
  }
  friend bool operator==(const Bitstream& a, const Bitstream& b) { return a.payload_equal(b); }
};

// .nicb file: header(8) | u32le payload byte count | payload.
void write_nicb(const std::string& path, const Bitstream& b);
Bitstream read_nicb(const std::string& path);

// Small file helpers shared by the persistence paths. Writes go through a
// temp file + rename so concurrent readers never see partial output.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_atomic(const std::string& path, const void* data, std::size_t len);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace nic
