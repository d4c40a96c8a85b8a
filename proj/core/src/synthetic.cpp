#include "dsm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsm {

namespace {

// Sum of random signed Gaussian blobs, normalized to unit peak magnitude.
Tensor blob_pattern(const ToyDataConfig& cfg, Rng& rng) {
  const ImageShape s = cfg.shape;
  Tensor p({s.channels, s.height, s.width});
  for (int b = 0; b < cfg.blobs_per_pattern; ++b) {
    const double cy = rng.uniform(1.0, s.height - 2.0);
    const double cx = rng.uniform(1.0, s.width - 2.0);
    const double sigma = rng.uniform(0.8, 2.2);
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    std::vector<double> channel_gain(static_cast<std::size_t>(s.channels));
    for (double& g : channel_gain) g = rng.uniform(0.5, 1.0);
    for (int c = 0; c < s.channels; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          p[(static_cast<std::size_t>(c) * s.height + y) * s.width + x] +=
              sign * channel_gain[static_cast<std::size_t>(c)] * std::exp(-d2 / (2.0 * sigma * sigma));
        }
  }
  double peak = 0.0;
  for (double v : p.values()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : p.values()) v /= peak;
  return p;
}

void add_shifted(const Tensor& pattern, double weight, int dy, int dx, ImageShape s, std::span<double> out) {
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height; ++y) {
      const int sy = y - dy;
      if (sy < 0 || sy >= s.height) continue;
      for (int x = 0; x < s.width; ++x) {
        const int sx = x - dx;
        if (sx < 0 || sx >= s.width) continue;
        out[(static_cast<std::size_t>(c) * s.height + y) * s.width + x] +=
            weight * pattern[(static_cast<std::size_t>(c) * s.height + sy) * s.width + sx];
      }
    }
}

}  // namespace

Dataset make_toy_dataset(const ToyDataConfig& cfg, Rng& rng) {
  if (cfg.classes < 2 || cfg.groups < 1 || cfg.groups > cfg.classes)
    throw std::invalid_argument("make_toy_dataset: need classes >= 2 and 1 <= groups <= classes");
  if (cfg.train_per_class < 1 || cfg.test_per_class < 0) throw std::invalid_argument("make_toy_dataset: bad split sizes");

  Rng proto_rng = rng.fork("prototypes");
  std::vector<Tensor> group_patterns;
  for (int g = 0; g < cfg.groups; ++g) group_patterns.push_back(blob_pattern(cfg, proto_rng));
  std::vector<Tensor> prototypes;
  for (int k = 0; k < cfg.classes; ++k) {
    const int g = k * cfg.groups / cfg.classes;
    Tensor own = blob_pattern(cfg, proto_rng);
    Tensor proto = Tensor::like(own);
    for (std::size_t i = 0; i < proto.size(); ++i)
      proto[i] = cfg.group_weight * group_patterns[static_cast<std::size_t>(g)][i] + (1.0 - cfg.group_weight) * own[i];
    prototypes.push_back(std::move(proto));
  }

  const ImageShape s = cfg.shape;
  const int per_class = cfg.train_per_class + cfg.test_per_class;
  const int total = per_class * cfg.classes;
  Tensor pixels({total, s.channels, s.height, s.width});
  std::vector<int> labels;
  std::vector<Split> splits;
  std::vector<std::string> ids;
  Rng sample_rng = rng.fork("samples");
  int row = 0;
  for (int split = 0; split < 2; ++split) {
    const int count = split == 0 ? cfg.train_per_class : cfg.test_per_class;
    for (int i = 0; i < count; ++i)
      for (int k = 0; k < cfg.classes; ++k, ++row) {
        auto out = pixels.row(row);
        std::fill(out.begin(), out.end(), 0.5);
        add_shifted(prototypes[static_cast<std::size_t>(k)], cfg.amplitude,
                    sample_rng.uniform_int(-cfg.max_shift, cfg.max_shift),
                    sample_rng.uniform_int(-cfg.max_shift, cfg.max_shift), s, out);
        int other = sample_rng.uniform_int(0, cfg.classes - 2);
        if (other >= k) ++other;
        add_shifted(prototypes[static_cast<std::size_t>(other)], cfg.amplitude * sample_rng.uniform(0.0, cfg.distractor_max),
                    sample_rng.uniform_int(-cfg.max_shift, cfg.max_shift),
                    sample_rng.uniform_int(-cfg.max_shift, cfg.max_shift), s, out);
        for (double& v : out) v = std::clamp(v + sample_rng.normal(0.0, cfg.noise), 0.0, 1.0);
        labels.push_back(k);
        splits.push_back(split == 0 ? Split::train : Split::test);
        ids.push_back((split == 0 ? "train-" : "test-") + std::to_string(row));
      }
  }
  return Dataset(ImageBatch(std::move(pixels), std::move(ids)), std::move(labels), cfg.classes, std::move(splits));
}

}  // namespace dsm
