#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nic/tensor.hpp"

namespace nic {

struct IngestStats {
  int loaded = 0;
  int skipped = 0;
};

// Load every P6 PPM under `dir` (lexicographic filename order), center-crop
// to square and bilinear-resize to size x size. Unreadable files are skipped
// with a warning on stderr and counted.
std::vector<Tensor> ingest_dataset(const std::string& dir, int size,
                                   IngestStats* stats = nullptr);

// Structured synthetic images standing in for small photo corpora: linear and
// radial color ramps, flat-color shapes, sinusoid textures, checkerboards.
Tensor synth_image(int size, std::uint64_t seed);
void generate_synthetic_dataset(const std::string& dir, int count, int size, std::uint64_t seed);

struct PairSuite {
  std::vector<std::pair<int, int>> pairs;  // (src, tgt) indices into the pool
};

// Draw `count` disjoint (src, tgt) pairs from the pool without replacement,
// seeded. Every pair must be byte-distinct.
PairSuite make_pair_suite(const std::vector<Tensor>& pool, int count, std::uint64_t seed);

}  // namespace nic
