#include "dsm/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsm/math.hpp"

namespace dsm::attacks {

Objective parse_objective(const std::string& name) {
  if (name == "untargeted_ce") return Objective::untargeted_ce;
  if (name == "targeted_ce") return Objective::targeted_ce;
  if (name == "targeted_logit") return Objective::targeted_logit;
  if (name == "embedding_dodge") return Objective::embedding_dodge;
  if (name == "embedding_impersonate") return Objective::embedding_impersonate;
  throw std::invalid_argument("unknown attack objective '" + name + "'");
}

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::untargeted_ce: return "untargeted_ce";
    case Objective::targeted_ce: return "targeted_ce";
    case Objective::targeted_logit: return "targeted_logit";
    case Objective::embedding_dodge: return "embedding_dodge";
    case Objective::embedding_impersonate: return "embedding_impersonate";
  }
  return "untargeted_ce";
}

int ascent_sign(Objective objective) {
  switch (objective) {
    case Objective::untargeted_ce:
    case Objective::targeted_logit:
    case Objective::embedding_impersonate: return 1;
    case Objective::targeted_ce:
    case Objective::embedding_dodge: return -1;
  }
  return 1;
}

bool is_embedding_objective(Objective objective) {
  return objective == Objective::embedding_dodge || objective == Objective::embedding_impersonate;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("attack: epsilon must lie in [0, 1]");
  if (!(beta > 0.0)) throw std::invalid_argument("attack: step size beta must be positive");
  if (!(mu >= 0.0)) throw std::invalid_argument("attack: momentum mu must be non-negative");
  if (iterations < 1) throw std::invalid_argument("attack: iteration count N must be at least 1");
  if (!(transform_prob >= 0.0 && transform_prob <= 1.0))
    throw std::invalid_argument("attack: transform probability must lie in [0, 1]");
  if (!(diversity_min_ratio > 0.0 && diversity_min_ratio <= 1.0))
    throw std::invalid_argument("attack: diversity_min_ratio must lie in (0, 1]");
}

Tensor clip_project(const Tensor& x_adv, const Tensor& x_orig, double epsilon) {
  require_same_shape(x_adv, x_orig, "clip_project");
  Tensor out = Tensor::like(x_adv);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = std::max(x_orig[i] - epsilon, 0.0);
    const double hi = std::min(x_orig[i] + epsilon, 1.0);
    out[i] = std::clamp(x_adv[i], lo, hi);
  }
  return out;
}

ImageBatch clip_project(const ImageBatch& x_adv, const ImageBatch& x_orig, double epsilon) {
  return ImageBatch(clip_project(x_adv.pixels(), x_orig.pixels(), epsilon), x_adv.ids());
}

namespace {

void check_ensemble(Ensemble models) {
  if (models.empty()) throw std::invalid_argument("attack: empty model list");
  for (const Model* m : models) {
    if (m == nullptr) throw std::invalid_argument("attack: null model in ensemble");
    if (m->class_count() != models[0]->class_count())
      throw std::invalid_argument("attack: ensemble members disagree on class count");
  }
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// d CE(t, mean_m softmax(z_m)) / d z_m for every member.
std::vector<Tensor> probability_fusion_grads(const std::vector<Tensor>& logits, const Tensor& targets,
                                             std::vector<double>& loss) {
  const double members = static_cast<double>(logits.size());
  std::vector<Tensor> probs;
  for (const auto& z : logits) probs.push_back(softmax_rows(z));
  Tensor mean = Tensor::like(probs[0]);
  for (const auto& p : probs)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i] / members;
  const int n = mean.dim(0), k = mean.dim(1);
  Tensor upstream = Tensor::like(mean);
  for (int r = 0; r < n; ++r) {
    loss[static_cast<std::size_t>(r)] = cross_entropy(targets.row(r), mean.row(r));
    for (int c = 0; c < k; ++c)
      upstream.at(r, c) = targets.at(r, c) == 0.0 ? 0.0 : -targets.at(r, c) / std::max(mean.at(r, c), kProbabilityFloor);
  }
  std::vector<Tensor> grads;
  for (const auto& p : probs) {
    Tensor g = Tensor::like(p);
    for (int r = 0; r < n; ++r) {
      double dot = 0.0;
      for (int c = 0; c < k; ++c) dot += p.at(r, c) * upstream.at(r, c);
      for (int c = 0; c < k; ++c) g.at(r, c) = p.at(r, c) * (upstream.at(r, c) - dot) / members;
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace

InputGradient ensemble_gradient(Ensemble models, const Tensor& x, Objective objective, const AttackTargets& targets,
                                Fusion fusion) {
  check_ensemble(models);
  const int n = x.dim(0);
  const std::size_t members = models.size();
  InputGradient result{Tensor::like(x), std::vector<double>(static_cast<std::size_t>(n), 0.0)};

  if (is_embedding_objective(objective)) {
    if (!targets.reference || targets.reference->count() != n)
      throw std::invalid_argument("embedding objective needs one reference image per sample");
    // mean cosine similarity over members
    for (const Model* m : models) {
      const ForwardTrace trace = m->forward(x);
      const LossSpec spec = CosineLoss{m->embed(targets.reference->pixels())};
      OutputGradient up = loss_output_gradient(trace, spec);
      for (double& v : up.grad_embedding.values()) v /= static_cast<double>(members);
      const Tensor g = m->backward(trace, nullptr, &up.grad_embedding, nullptr);
      for (std::size_t i = 0; i < g.size(); ++i) result.grad[i] += g[i];
      for (int r = 0; r < n; ++r) result.loss[static_cast<std::size_t>(r)] += up.loss[static_cast<std::size_t>(r)] / members;
    }
    return result;
  }

  if (static_cast<int>(targets.labels.size()) != n) throw std::invalid_argument("attack: one label per sample required");
  const int classes = models[0]->class_count();
  std::vector<ForwardTrace> traces;
  traces.reserve(members);
  for (const Model* m : models) traces.push_back(m->forward(x));

  std::vector<Tensor> member_grads;
  if (objective != Objective::targeted_logit && fusion == Fusion::probabilities) {
    std::vector<Tensor> logits;
    for (const auto& t : traces) logits.push_back(t.logits());
    member_grads = probability_fusion_grads(logits, one_hot_rows(targets.labels, classes), result.loss);
  } else {
    ForwardTrace fused;
    Tensor mean({n, classes});
    for (const auto& t : traces)
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += t.logits()[i];
    if (members > 1)
      for (double& v : mean.values()) v /= static_cast<double>(members);
    fused.activations = {Tensor(), Tensor(), std::move(mean)};
    const LossSpec spec = objective == Objective::targeted_logit
                              ? LossSpec{LogitLoss{targets.labels}}
                              : LossSpec{CrossEntropyLoss{one_hot_rows(targets.labels, classes)}};
    OutputGradient up = loss_output_gradient(fused, spec);
    result.loss = std::move(up.loss);
    if (members > 1)
      for (double& v : up.grad_logits.values()) v /= static_cast<double>(members);
    member_grads.assign(members, up.grad_logits);
  }
  for (std::size_t m = 0; m < members; ++m) {
    const Tensor g = models[m]->backward(traces[m], &member_grads[m], nullptr, nullptr);
    if (m == 0) {
      result.grad = g;
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) result.grad[i] += g[i];
    }
  }
  return result;
}

AdvResult fgsm(const Model& model, const ImageBatch& x, std::span<const int> labels, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("fgsm: epsilon must lie in [0, 1]");
  const Model* members[] = {&model};
  AttackTargets targets{{labels.begin(), labels.end()}, std::nullopt};
  const InputGradient v = ensemble_gradient(members, x.pixels(), Objective::untargeted_ce, targets);
  Tensor adv = x.pixels();
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = std::clamp(adv[i] + epsilon * sign_of(v.grad[i]), 0.0, 1.0);
  AdvResult result{ImageBatch(std::move(adv), x.ids()), {}, 1};
  for (int s = 0; s < x.count(); ++s) {
    double l1 = 0.0;
    for (double g : v.grad.row(s)) l1 += std::abs(g);
    result.grad_norm_trace.push_back({l1});
  }
  return result;
}

namespace {

AdvResult momentum_iterate(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg,
                           Rng* diversity_rng) {
  cfg.validate();
  check_ensemble(models);
  const Tensor& x0 = x.pixels();
  const int n = x0.dim(0);
  const std::size_t stride = x0.stride0();
  const double step = ascent_sign(cfg.objective) > 0 ? cfg.beta : -cfg.beta;
  Tensor xi = x0;
  Tensor g = Tensor::like(x0);
  std::vector<std::vector<double>> trace(static_cast<std::size_t>(n));

  for (int it = 0; it < cfg.iterations; ++it) {
    InputGradient v;
    if (diversity_rng != nullptr) {
      const DiversityMap map(x.shape(), draw_diversity(n, x.shape(), cfg.transform_prob, *diversity_rng,
                                                       cfg.diversity_min_ratio));
      if (map.identity()) {
        v = ensemble_gradient(models, xi, cfg.objective, targets, cfg.fusion);
      } else {
        v = ensemble_gradient(models, map.apply(xi), cfg.objective, targets, cfg.fusion);
        v.grad = map.adjoint(v.grad);
      }
    } else {
      v = ensemble_gradient(models, xi, cfg.objective, targets, cfg.fusion);
    }
    for (int s = 0; s < n; ++s) {
      const std::size_t base = static_cast<std::size_t>(s) * stride;
      double l1 = 0.0;
      for (std::size_t i = 0; i < stride; ++i) l1 += std::abs(v.grad[base + i]);
      trace[static_cast<std::size_t>(s)].push_back(l1);
      for (std::size_t i = 0; i < stride; ++i) {
        const double normalized = l1 > 0.0 ? v.grad[base + i] / l1 : 0.0;
        g[base + i] = cfg.mu * g[base + i] + normalized;
      }
    }
    Tensor stepped = xi;
    for (std::size_t i = 0; i < stepped.size(); ++i) stepped[i] = xi[i] + step * sign_of(g[i]);
    xi = clip_project(stepped, x0, cfg.epsilon);
  }
  return {ImageBatch(std::move(xi), x.ids()), std::move(trace), cfg.iterations};
}

}  // namespace

AdvResult mi_fgsm(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg) {
  return momentum_iterate(models, x, targets, cfg, nullptr);
}

AdvResult mi_fgsm(const Model& model, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg) {
  const Model* members[] = {&model};
  return mi_fgsm(members, x, targets, cfg);
}

DiversityMap::DiversityMap(ImageShape shape, std::span<const DiversityDraw> draws) : shape_(shape) {
  const int h = shape.height, w = shape.width;
  for (const DiversityDraw& d : draws) {
    std::vector<int> src;
    if (d.apply && !(d.side == h && d.top == 0 && d.left == 0)) {
      const int out_h = d.side;
      const int out_w = std::max(1, static_cast<int>(std::lround(static_cast<double>(d.side) * w / h)));
      if (out_h < 1 || out_h > h || out_w > w || d.top < 0 || d.left < 0 || d.top + out_h > h || d.left + out_w > w)
        throw std::invalid_argument("input diversity: resized image does not fit the canvas");
      src.assign(static_cast<std::size_t>(shape.pixels()), -1);
      for (int c = 0; c < shape.channels; ++c)
        for (int y = 0; y < out_h; ++y)
          for (int x = 0; x < out_w; ++x) {
            const int sy = std::min(h - 1, y * h / out_h);
            const int sx = std::min(w - 1, x * w / out_w);
            src[static_cast<std::size_t>((c * h + d.top + y) * w + d.left + x)] = (c * h + sy) * w + sx;
          }
      identity_ = false;
    }
    source_.push_back(std::move(src));
  }
}

Tensor DiversityMap::apply(const Tensor& x) const {
  Tensor out = x;
  for (std::size_t s = 0; s < source_.size(); ++s) {
    if (source_[s].empty()) continue;
    auto in = x.row(static_cast<int>(s));
    auto dst = out.row(static_cast<int>(s));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = source_[s][i] < 0 ? 0.0 : in[static_cast<std::size_t>(source_[s][i])];
  }
  return out;
}

Tensor DiversityMap::adjoint(const Tensor& grad_out) const {
  Tensor grad = grad_out;
  for (std::size_t s = 0; s < source_.size(); ++s) {
    if (source_[s].empty()) continue;
    auto gin = grad_out.row(static_cast<int>(s));
    auto dst = grad.row(static_cast<int>(s));
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t i = 0; i < gin.size(); ++i)
      if (source_[s][i] >= 0) dst[static_cast<std::size_t>(source_[s][i])] += gin[i];
  }
  return grad;
}

std::vector<DiversityDraw> draw_diversity(int count, ImageShape shape, double transform_prob, Rng& rng,
                                          double min_ratio) {
  std::vector<DiversityDraw> draws;
  const int lo = static_cast<int>(std::ceil(min_ratio * shape.height));
  for (int i = 0; i < count; ++i) {
    DiversityDraw d;
    d.apply = rng.bernoulli(transform_prob);
    if (d.apply) {
      d.side = rng.uniform_int(lo, shape.height);
      const int out_w = std::max(1, static_cast<int>(std::lround(static_cast<double>(d.side) * shape.width / shape.height)));
      d.top = rng.uniform_int(0, shape.height - d.side);
      d.left = rng.uniform_int(0, shape.width - out_w);
    }
    draws.push_back(d);
  }
  return draws;
}

ImageBatch input_diversity(const ImageBatch& x, double transform_prob, Rng& rng) {
  if (!(transform_prob >= 0.0 && transform_prob <= 1.0))
    throw std::invalid_argument("input diversity: probability must lie in [0, 1]");
  const DiversityMap map(x.shape(), draw_diversity(x.count(), x.shape(), transform_prob, rng));
  return ImageBatch(map.apply(x.pixels()), x.ids());
}

AdvResult mdi2_fgsm(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg,
                    Rng& rng) {
  return momentum_iterate(models, x, targets, cfg, &rng);
}

AdvResult mdi2_fgsm(const Model& model, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg,
                    Rng& rng) {
  const Model* members[] = {&model};
  return mdi2_fgsm(members, x, targets, cfg, rng);
}

InputGradient targeted_logit_loss(const Model& model, const Tensor& x, std::span<const int> targets) {
  return input_gradient(model, x, LogitLoss{{targets.begin(), targets.end()}});
}

AdvResult ensemble_attack(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg,
                          Rng& rng) {
  return cfg.diversity ? mdi2_fgsm(models, x, targets, cfg, rng) : mi_fgsm(models, x, targets, cfg);
}

}  // namespace dsm::attacks
