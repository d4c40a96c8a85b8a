#pragma once

#include "dsm/dataset.hpp"
#include "dsm/rng.hpp"

namespace dsm {

/// Parametric image-classification data with a two-level class hierarchy.
///
/// Each class prototype is the sum of a pattern shared by its group (classes
/// 0..K-1 are split into `groups` consecutive groups) and a class-specific
/// pattern, both built from random Gaussian blobs. A sample is the prototype
/// of its class, randomly shifted, plus a weaker shifted prototype of another
/// class and pixel noise, on a mid-gray background.
struct ToyDataConfig {
  int classes = 10;
  int groups = 5;
  int train_per_class = 200;
  int test_per_class = 50;
  ImageShape shape{1, 16, 16};
  int blobs_per_pattern = 3;
  double group_weight = 0.6;       ///< share of the prototype taken by the group pattern
  double amplitude = 0.35;         ///< peak prototype contrast
  double distractor_max = 0.5;     ///< distractor weight drawn from U(0, distractor_max)
  double noise = 0.06;
  int max_shift = 1;
};

/// Train and test samples, tagged by split.
Dataset make_toy_dataset(const ToyDataConfig& config, Rng& rng);

}  // namespace dsm
