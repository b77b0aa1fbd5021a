#pragma once

// Configuration shared by the training-dynamics tests and the acceptance
// binary: the default synthetic cohort, and the default model at a hidden
// width that keeps a five-seed benchmark inside its time budget on one core.

#include "mcnet/data/synth.hpp"
#include "mcnet/training/training.hpp"

namespace mcnet::bench {

inline constexpr int kHidden = 64;

inline SynthConfig cohort_config(std::uint64_t seed) {
  SynthConfig sc;  // N = 600, D = 20, T = 5
  sc.seed = seed;
  return sc;
}

inline TrainConfig train_config(std::uint64_t seed) {
  TrainConfig tc;
  tc.model.hidden = kHidden;
  tc.seed = seed;
  return tc;
}

}  // namespace mcnet::bench
