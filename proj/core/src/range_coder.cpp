#include "nic/range_coder.hpp"

#include "nic/errors.hpp"

namespace nic {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kBot = 1u << 16;
}  // namespace

void RangeEncoder::normalize() {
  // First clause: top byte of low settled, emit it. Second: range underflow,
  // clamp range up to the next 64K boundary so no carry can occur.
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (0u - low_) & (kBot - 1)), true))) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
  if (freq == 0 || total > kBot || cum + freq > total) {
    throw ConfigError("range coder: invalid frequency interval");
  }
  range_ /= total;
  low_ += cum * range_;
  range_ *= freq;
  normalize();
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 4; ++i) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= len_) throw NumericError("range coder: truncated stream");
  return data_[pos_++];
}

std::uint32_t RangeDecoder::decode_freq(std::uint32_t total) {
  if (total == 0 || total > kBot) throw ConfigError("range coder: invalid total");
  range_ /= total;
  std::uint32_t v = (code_ - low_) / range_;
  if (v >= total) throw NumericError("range coder: corrupt stream (state violation)");
  return v;
}

void RangeDecoder::decode_update(std::uint32_t cum, std::uint32_t freq) {
  low_ += cum * range_;
  range_ *= freq;
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (0u - low_) & (kBot - 1)), true))) {
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

}  // namespace nic
