#include "nic/prior.hpp"

#include <algorithm>
#include <cmath>

#include "nic/errors.hpp"

namespace nic {

std::int32_t ChannelCdf::find(std::uint32_t scaled) const {
  // Binary search for the last index with cdf[i] <= scaled.
  std::size_t lo = 0, hi = cdf.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (cdf[mid] > scaled) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return smin + static_cast<std::int32_t>(lo);
}

double ChannelCdf::entropy_bits() const {
  double h = 0.0;
  const double total = static_cast<double>(FactorizedPrior::kTotal);
  for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
    const double p = static_cast<double>(cdf[i + 1] - cdf[i]) / total;
    h -= p * std::log2(p);
  }
  return h;
}

std::int32_t ChannelCdf::sample(Rng& rng) const {
  const auto scaled = static_cast<std::uint32_t>(rng.below(FactorizedPrior::kTotal));
  return find(scaled);
}

double FactorizedPrior::bits_for_symbol(int channel, std::int32_t s) const {
  const ChannelCdf& c = channels[static_cast<std::size_t>(channel)];
  if (!c.contains(s)) throw NumericError("prior: symbol out of fitted range");
  return -std::log2(static_cast<double>(c.freq(s)) / static_cast<double>(kTotal));
}

ChannelCdf make_channel_cdf(std::int32_t smin, const std::vector<std::uint64_t>& counts) {
  const std::size_t n = counts.size();
  if (n == 0) throw ConfigError("make_channel_cdf: empty counts");
  if (n > FactorizedPrior::kTotal) throw ConfigError("make_channel_cdf: symbol range too wide");
  std::uint64_t raw_total = 0;
  for (std::uint64_t c : counts) {
    if (c == 0) throw ConfigError("make_channel_cdf: zero count (smoothing missing)");
    raw_total += c;
  }

  // One guaranteed slot per symbol, remainder apportioned proportionally.
  const std::uint64_t budget = FactorizedPrior::kTotal - n;
  std::vector<std::uint32_t> freq(n, 1);
  std::vector<std::pair<std::uint64_t, std::size_t>> rema(n);  // (remainder, index)
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t num = counts[i] * budget;
    const std::uint64_t share = num / raw_total;
    freq[i] += static_cast<std::uint32_t>(share);
    assigned += share;
    rema[i] = {num % raw_total, i};
  }
  std::uint64_t left = budget - assigned;
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; left > 0; i = (i + 1) % n, --left) freq[rema[i].second] += 1;

  ChannelCdf out;
  out.smin = smin;
  out.cdf.resize(n + 1);
  out.cdf[0] = 0;
  for (std::size_t i = 0; i < n; ++i) out.cdf[i + 1] = out.cdf[i] + freq[i];
  return out;
}

}  // namespace nic
