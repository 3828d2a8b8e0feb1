#pragma once

#include <cstdint>
#include <vector>

#include "nic/rng.hpp"

namespace nic {

// Discretized CDF of one latent channel over the closed symbol range
// [smin, smin + nsym - 1]. Strictly increasing (freq >= 1 everywhere),
// cdf.front() == 0 and cdf.back() == 1<<16 exactly.
struct ChannelCdf {
  std::int32_t smin = 0;
  std::vector<std::uint32_t> cdf;  // size nsym + 1

  int nsym() const { return static_cast<int>(cdf.size()) - 1; }
  std::int32_t smax() const { return smin + nsym() - 1; }
  bool contains(std::int32_t s) const { return s >= smin && s <= smax(); }

  std::uint32_t cum(std::int32_t s) const { return cdf[static_cast<std::size_t>(s - smin)]; }
  std::uint32_t freq(std::int32_t s) const {
    const auto i = static_cast<std::size_t>(s - smin);
    return cdf[i + 1] - cdf[i];
  }
  // Symbol whose [cum, cum+freq) interval contains `scaled`.
  std::int32_t find(std::uint32_t scaled) const;

  double entropy_bits() const;  // sum of -p log2 p over the table
  std::int32_t sample(Rng& rng) const;
};

// Static per-channel entropy model backing the coder. Channels are
// independent; the table total is pinned to 2^16 per channel.
struct FactorizedPrior {
  static constexpr std::uint32_t kTotal = 1u << 16;
  std::vector<ChannelCdf> channels;

  bool fitted() const { return !channels.empty(); }
  double bits_for_symbol(int channel, std::int32_t s) const;
};

// Scale raw (already smoothed, all >= 1) counts to an exact 2^16 total with
// every frequency kept >= 1; largest-remainder apportionment, deterministic.
ChannelCdf make_channel_cdf(std::int32_t smin, const std::vector<std::uint64_t>& counts);

}  // namespace nic
