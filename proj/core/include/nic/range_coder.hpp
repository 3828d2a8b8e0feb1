#pragma once

#include <cstdint>
#include <vector>

namespace nic {

// Carry-less 32-bit range coder (Subbotin variant). Integer-only state
// transitions, so encode/decode trajectories are bit-exact across platforms.
// Frequencies are 16-bit: total <= 1<<16, every symbol freq >= 1. Instead of
// propagating carries, the coder clamps `range` whenever low+range would
// straddle a 64K boundary, wasting at most a fraction of a bit per renorm.

class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
  // Flushes the final 4 bytes and returns the stream.
  std::vector<std::uint8_t> finish();

 private:
  void normalize();
  std::vector<std::uint8_t> out_;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t len);

  // Scaled cumulative value of the next symbol, in [0, total).
  std::uint32_t decode_freq(std::uint32_t total);
  // Commit the symbol chosen from decode_freq's value.
  void decode_update(std::uint32_t cum, std::uint32_t freq);

  std::size_t consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace nic
