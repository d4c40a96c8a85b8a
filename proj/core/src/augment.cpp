#include "dsm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsm::augment {

MixKind parse_mix_kind(const std::string& name) {
  if (name == "none") return MixKind::none;
  if (name == "cutout") return MixKind::cutout;
  if (name == "mixup") return MixKind::mixup;
  if (name == "cutmix") return MixKind::cutmix;
  throw std::invalid_argument("unknown mix strategy '" + name + "'");
}

std::string to_string(MixKind kind) {
  switch (kind) {
    case MixKind::none: return "none";
    case MixKind::cutout: return "cutout";
    case MixKind::mixup: return "mixup";
    case MixKind::cutmix: return "cutmix";
  }
  return "none";
}

double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_lambda: alpha must be positive");
  return rng.beta(alpha, alpha);
}

namespace {

// Unified form: mixed = x * M + partner * (1 - M); partner row -1 is the zero image.
MixResult blend(const ImageBatch& x, const Tensor* x_ref, Tensor mask, std::vector<int> partner,
                std::vector<double> lambda) {
  const Tensor& px = x.pixels();
  Tensor mixed = Tensor::like(px);
  const std::size_t stride = px.stride0();
  for (int s = 0; s < px.dim(0); ++s) {
    const int p = partner[static_cast<std::size_t>(s)];
    for (std::size_t i = 0; i < stride; ++i) {
      const std::size_t idx = static_cast<std::size_t>(s) * stride + i;
      const double other = (p < 0 || x_ref == nullptr) ? 0.0 : (*x_ref)[static_cast<std::size_t>(p) * stride + i];
      mixed[idx] = px[idx] * mask[idx] + other * (1.0 - mask[idx]);
    }
  }
  return {ImageBatch(std::move(mixed), x.ids()), std::move(mask), std::move(lambda), std::move(partner)};
}

void check_pair(const ImageBatch& x, const ImageBatch& x_ref) {
  if (!x.pixels().same_shape(x_ref.pixels()))
    throw std::invalid_argument("mixing augmentation: shape mismatch " + x.pixels().shape_string() + " vs " +
                                x_ref.pixels().shape_string());
}

Tensor box_mask(const Tensor& like, std::span<const Box> boxes) {
  Tensor mask = Tensor::like(like, 1.0);
  const int c = like.dim(1), h = like.dim(2), w = like.dim(3);
  for (int s = 0; s < like.dim(0); ++s) {
    const Box& b = boxes[static_cast<std::size_t>(s)];
    for (int ch = 0; ch < c; ++ch)
      for (int y = std::max(b.top, 0); y < std::min(b.bottom, h); ++y)
        for (int xx = std::max(b.left, 0); xx < std::min(b.right, w); ++xx) mask.at(s, ch, y, xx) = 0.0;
  }
  return mask;
}

Box clip(Box b, int h, int w) {
  b.top = std::clamp(b.top, 0, h);
  b.bottom = std::clamp(b.bottom, 0, h);
  b.left = std::clamp(b.left, 0, w);
  b.right = std::clamp(b.right, 0, w);
  return b;
}

}  // namespace

MixResult cutout_at(const ImageBatch& x, int mask_side, std::span<const std::pair<int, int>> corners) {
  const ImageShape s = x.shape();
  if (mask_side <= 0 || mask_side > std::min(s.height, s.width))
    throw std::invalid_argument("cutout: mask_side must be in (0, min(h, w)]");
  if (corners.size() != static_cast<std::size_t>(x.count())) throw std::invalid_argument("cutout: one corner per sample");
  std::vector<Box> boxes;
  std::vector<double> lambda;
  for (const auto& [top, left] : corners) {
    const Box b = clip({top, left, top + mask_side, left + mask_side}, s.height, s.width);
    boxes.push_back(b);
    lambda.push_back(1.0 - static_cast<double>(b.area()) / (s.height * s.width));
  }
  return blend(x, nullptr, box_mask(x.pixels(), boxes), std::vector<int>(boxes.size(), -1), std::move(lambda));
}

MixResult cutout(const ImageBatch& x, int mask_side, Rng& rng) {
  const ImageShape s = x.shape();
  if (mask_side <= 0 || mask_side > std::min(s.height, s.width))
    throw std::invalid_argument("cutout: mask_side must be in (0, min(h, w)]");
  std::vector<std::pair<int, int>> corners;
  for (int i = 0; i < x.count(); ++i) {
    const int top = rng.uniform_int(0, s.height - mask_side);
    const int left = rng.uniform_int(0, s.width - mask_side);
    corners.emplace_back(top, left);
  }
  return cutout_at(x, mask_side, corners);
}

MixResult mixup(const ImageBatch& x, const ImageBatch& x_ref, std::span<const double> lambdas) {
  check_pair(x, x_ref);
  if (lambdas.size() != static_cast<std::size_t>(x.count())) throw std::invalid_argument("mixup: one lambda per sample");
  Tensor mask = Tensor::like(x.pixels());
  const std::size_t stride = mask.stride0();
  std::vector<int> partner;
  for (int s = 0; s < x.count(); ++s) {
    const double lam = lambdas[static_cast<std::size_t>(s)];
    if (!(lam >= 0.0 && lam <= 1.0)) throw std::invalid_argument("mixup: lambda must lie in [0, 1]");
    std::fill_n(mask.data() + static_cast<std::size_t>(s) * stride, stride, lam);
    partner.push_back(s);
  }
  return blend(x, &x_ref.pixels(), std::move(mask), std::move(partner), {lambdas.begin(), lambdas.end()});
}

MixResult mixup(const ImageBatch& x, const ImageBatch& x_ref, double lambda) {
  const std::vector<double> lambdas(static_cast<std::size_t>(x.count()), lambda);
  return mixup(x, x_ref, lambdas);
}

Box cutmix_box(int height, int width, double lambda0, Rng& rng) {
  const double ratio = std::sqrt(1.0 - lambda0);
  const int cut_h = static_cast<int>(height * ratio);
  const int cut_w = static_cast<int>(width * ratio);
  const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(height)));
  const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
  return clip({cy - cut_h / 2, cx - cut_w / 2, cy + cut_h / 2, cx + cut_w / 2}, height, width);
}

MixResult cutmix_boxes(const ImageBatch& x, const ImageBatch& x_ref, std::span<const Box> boxes) {
  check_pair(x, x_ref);
  if (boxes.size() != static_cast<std::size_t>(x.count())) throw std::invalid_argument("cutmix: one box per sample");
  const ImageShape s = x.shape();
  std::vector<Box> clipped;
  std::vector<double> lambda;
  std::vector<int> partner;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    clipped.push_back(clip(boxes[i], s.height, s.width));
    lambda.push_back(1.0 - static_cast<double>(clipped.back().area()) / (s.height * s.width));
    partner.push_back(static_cast<int>(i));
  }
  return blend(x, &x_ref.pixels(), box_mask(x.pixels(), clipped), std::move(partner), std::move(lambda));
}

MixResult cutmix(const ImageBatch& x, const ImageBatch& x_ref, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("cutmix: alpha must be positive");
  check_pair(x, x_ref);
  const ImageShape s = x.shape();
  std::vector<Box> boxes;
  for (int i = 0; i < x.count(); ++i) {
    const double lambda0 = sample_lambda(alpha, rng);
    boxes.push_back(cutmix_box(s.height, s.width, lambda0, rng));
  }
  return cutmix_boxes(x, x_ref, boxes);
}

LabelDistribution pseudo_label(double lambda, int y, int y_prime, int classes) {
  if (y < 0 || y >= classes || y_prime < 0 || y_prime >= classes)
    throw std::out_of_range("pseudo_label: class index out of range");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("pseudo_label: lambda must lie in [0, 1]");
  std::vector<double> p(static_cast<std::size_t>(classes), 0.0);
  p[static_cast<std::size_t>(y)] += lambda;
  p[static_cast<std::size_t>(y_prime)] += 1.0 - lambda;
  return LabelDistribution(std::move(p));
}

std::vector<int> partner_permutation(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i)));
    std::swap(p[static_cast<std::size_t>(i)], p[j]);
  }
  return p;
}

MixResult mix_batch(const ImageBatch& x, const MixConfig& config, Rng& rng) {
  const int n = x.count();
  switch (config.kind) {
    case MixKind::none: {
      std::vector<int> partner(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) partner[static_cast<std::size_t>(i)] = i;
      return {x, Tensor::like(x.pixels(), 1.0), std::vector<double>(static_cast<std::size_t>(n), 1.0), std::move(partner)};
    }
    case MixKind::cutout: {
      const int side = config.cutout_side > 0 ? config.cutout_side : x.shape().height / 2;
      return cutout(x, side, rng);
    }
    case MixKind::mixup:
    case MixKind::cutmix: {
      const std::vector<int> partner = partner_permutation(n, rng);
      const ImageBatch x_ref = x.gather(partner);
      MixResult r;
      if (config.kind == MixKind::mixup) {
        std::vector<double> lambdas;
        for (int i = 0; i < n; ++i) lambdas.push_back(sample_lambda(config.alpha, rng));
        r = mixup(x, x_ref, lambdas);
      } else {
        r = cutmix(x, x_ref, config.alpha, rng);
      }
      r.partner = partner;
      return r;
    }
  }
  throw std::logic_error("unhandled mix kind");
}

}  // namespace dsm::augment
