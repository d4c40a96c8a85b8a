#pragma once

#include <span>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/math.hpp"
#include "dsm/rng.hpp"

namespace dsm::augment {

/// Output of a mixing augmentation in the unified form
/// mixed = x * M + partner * (1 - M), evaluated elementwise.
struct MixResult {
  ImageBatch mixed;
  Tensor mask;                 ///< (n, c, h, w); binary for Cutout/CutMix, constant lambda for Mixup
  std::vector<double> lambda;  ///< per-sample weight of the original image
  std::vector<int> partner;    ///< partner row per sample; -1 means the all-zero image
};

/// Half-open pixel rectangle [top, bottom) x [left, right).
struct Box {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;

  int area() const noexcept { return (bottom > top && right > left) ? (bottom - top) * (right - left) : 0; }
};

enum class MixKind { none, cutout, mixup, cutmix };

MixKind parse_mix_kind(const std::string& name);
std::string to_string(MixKind kind);

/// Beta(alpha, alpha) draw.
double sample_lambda(double alpha, Rng& rng);

/// Masks a uniformly placed mask_side x mask_side square to zero. The square
/// always lies fully inside the image, so every sample loses the same area.
MixResult cutout(const ImageBatch& x, int mask_side, Rng& rng);
/// Cutout with the square's top-left corner given per sample.
MixResult cutout_at(const ImageBatch& x, int mask_side, std::span<const std::pair<int, int>> corners);

/// mixed = lambda * x + (1 - lambda) * x_ref with one lambda for the batch.
MixResult mixup(const ImageBatch& x, const ImageBatch& x_ref, double lambda);
MixResult mixup(const ImageBatch& x, const ImageBatch& x_ref, std::span<const double> lambdas);

/// CutMix: lambda0 ~ Beta(alpha, alpha), a rectangle of side ratio sqrt(1 - lambda0)
/// centered uniformly and clipped at the border is copied from x_ref; the reported
/// lambda is recomputed from the clipped area.
MixResult cutmix(const ImageBatch& x, const ImageBatch& x_ref, double alpha, Rng& rng);
/// CutMix with the pasted rectangle given per sample.
MixResult cutmix_boxes(const ImageBatch& x, const ImageBatch& x_ref, std::span<const Box> boxes);
/// Rectangle for one CutMix draw at a given lambda0.
Box cutmix_box(int height, int width, double lambda0, Rng& rng);

/// lambda * e_y + (1 - lambda) * e_{y_prime}.
LabelDistribution pseudo_label(double lambda, int y, int y_prime, int classes);

/// Random partner permutation without fixed points when n >= 2 (Sattolo's algorithm).
std::vector<int> partner_permutation(int n, Rng& rng);

struct MixConfig {
  MixKind kind = MixKind::none;
  double alpha = 1.0;     ///< Beta parameter for Mixup and CutMix
  int cutout_side = 0;    ///< 0 means half the image height
};

/// Applies `config.kind` to a batch, drawing partners from the batch itself.
/// MixKind::none returns the input with an all-one mask and lambda 1.
MixResult mix_batch(const ImageBatch& x, const MixConfig& config, Rng& rng);

}  // namespace dsm::augment
