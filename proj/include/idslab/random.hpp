#pragma once

#include <cstdint>
#include <random>

namespace idslab {

// Named, independent generator streams derived from one run seed, so that e.g.
// the candidate order does not depend on how many random scores were drawn.
enum class Stream : std::uint64_t {
  InitialDraw = 1,
  InitialBatches,
  Candidates,
  Replay,
  RandomScores,
  Finetune,
  ModelInit,
  SynthMeans,
  SynthPool,
  SynthValidation,
  SynthTest,
  Split,
  Probe,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace idslab
