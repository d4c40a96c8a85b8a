#include "dsm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dsm/attacks.hpp"
#include "dsm/math.hpp"

namespace dsm::training {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("train: batch size m must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  for (std::size_t i = 1; i < decay_epochs.size(); ++i)
    if (decay_epochs[i] <= decay_epochs[i - 1]) throw std::invalid_argument("train: decay epochs must be strictly increasing");
  if (!(decay_factor > 0.0)) throw std::invalid_argument("train: decay factor must be positive");
  if (weight_decay < 0.0 || momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("train: need weight_decay >= 0 and 0 <= momentum < 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("train: alpha must be positive");
  if (crop_pad < 0) throw std::invalid_argument("train: crop_pad must be non-negative");
  if (!(rescale_prob >= 0.0 && rescale_prob <= 1.0)) throw std::invalid_argument("train: rescale_prob must lie in [0, 1]");
  if (!(temperature > 0.0)) throw std::invalid_argument("train: temperature must be positive");
  if (label == labeling::LabelKind::smooth && !(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("train: smoothing gamma must lie in [0, 1)");
}

double TrainConfig::learning_rate_at(int epoch) const {
  double lr = learning_rate;
  for (int e : decay_epochs)
    if (epoch >= e) lr *= decay_factor;
  return lr;
}

bool TrainLog::same_trajectory(const TrainLog& other) const {
  if (epochs.size() != other.epochs.size()) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || a.loss != b.loss || a.train_accuracy != b.train_accuracy ||
        a.test_accuracy != b.test_accuracy)
      return false;
  }
  return true;
}

std::string TrainLog::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.loss;
    j["train_accuracy"] = r.train_accuracy ? nlohmann::ordered_json(*r.train_accuracy) : nlohmann::ordered_json();
    j["test_accuracy"] = r.test_accuracy ? nlohmann::ordered_json(*r.test_accuracy) : nlohmann::ordered_json();
    j["wall_seconds"] = r.wall_seconds;
    os << j.dump() << '\n';
  }
  return os.str();
}

double softmax_ce_batch_loss(const Model& model, const ForwardTrace& trace, const Tensor& targets, Gradients& grads) {
  LossAndGrad lg = softmax_cross_entropy(trace.logits(), targets);
  model.backward(trace, &lg.grad, nullptr, &grads);
  return lg.loss;
}

double distillation_loss(const Model& student, const Model& teacher, const Tensor& x, double temperature) {
  const Tensor soft = labeling::dark_label(teacher, x, student.class_count(), temperature);
  const Tensor probs = softmax_rows(student.logits(x));
  double total = 0.0;
  for (int r = 0; r < x.dim(0); ++r) total += cross_entropy(soft.row(r), probs.row(r));
  return total / x.dim(0);
}

Tensor normal_augment(const Tensor& x, bool flip, int crop_pad, Rng& rng, double rescale_prob) {
  if (!flip && crop_pad == 0 && rescale_prob == 0.0) return x;
  Tensor out = Tensor::like(x);
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  for (int s = 0; s < n; ++s) {
    const bool mirror = flip && rng.bernoulli(0.5);
    const int dy = crop_pad > 0 ? rng.uniform_int(-crop_pad, crop_pad) : 0;
    const int dx = crop_pad > 0 ? rng.uniform_int(-crop_pad, crop_pad) : 0;
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const int sy = std::clamp(y + dy, 0, h - 1);
          int sx = std::clamp(xx + dx, 0, w - 1);
          if (mirror) sx = w - 1 - sx;
          out.at(s, ch, y, xx) = x.at(s, ch, sy, sx);
        }
  }
  if (rescale_prob > 0.0) {
    const ImageShape shape{c, h, w};
    const attacks::DiversityMap map(shape, attacks::draw_diversity(n, shape, rescale_prob, rng));
    out = map.apply(out);
  }
  return out;
}

Tensor build_targets(const augment::MixResult& mix, const labeling::LabelStrategy& strategy, const Dataset& data,
                     std::span<const int> rows, Rng& rng) {
  using labeling::LabelKind;
  strategy.validate();
  const int n = static_cast<int>(rows.size());
  const int classes = data.classes();
  Tensor targets({n, classes});

  if (labeling::needs_teacher(strategy.kind)) {
    targets = labeling::dark_label(*strategy.teacher, mix.mixed.pixels(), classes, strategy.temperature);
    if (strategy.kind == LabelKind::dark) return targets;
    const std::vector<int> labels = data.labels(rows);
    for (int r = 0; r < n; ++r) {
      const auto row = targets.row(r);
      const LabelDistribution p(std::vector<double>(row.begin(), row.end()));
      const int y = labels[static_cast<std::size_t>(r)];
      const LabelDistribution q =
          strategy.kind == LabelKind::dark_shuffled ? labeling::shuffle_dark(p, y, rng) : labeling::reverse_dark(p, y);
      std::copy(q.probs().begin(), q.probs().end(), targets.row(r).begin());
    }
    return targets;
  }

  const std::vector<int> labels = data.labels(rows);
  auto base = [&](int y) {
    return strategy.kind == LabelKind::smooth ? labeling::smooth_label(y, classes, strategy.gamma)
                                              : labeling::one_hot(y, classes);
  };
  for (int r = 0; r < n; ++r) {
    const LabelDistribution own = base(labels[static_cast<std::size_t>(r)]);
    const double lambda = mix.lambda[static_cast<std::size_t>(r)];
    const int partner = mix.partner[static_cast<std::size_t>(r)];
    auto dst = targets.row(r);
    // Cutout (partner -1) keeps the original label
    if (partner < 0 || partner == r || lambda == 1.0) {
      std::copy(own.probs().begin(), own.probs().end(), dst.begin());
      continue;
    }
    const LabelDistribution other = base(labels[static_cast<std::size_t>(partner)]);
    for (int k = 0; k < classes; ++k)
      dst[static_cast<std::size_t>(k)] = lambda * own[static_cast<std::size_t>(k)] + (1.0 - lambda) * other[static_cast<std::size_t>(k)];
  }
  return targets;
}

std::vector<int> predict(const Model& model, const Tensor& x, int batch_size) {
  std::vector<int> out;
  const int n = x.dim(0);
  for (int start = 0; start < n; start += batch_size) {
    std::vector<int> rows;
    for (int i = start; i < std::min(n, start + batch_size); ++i) rows.push_back(i);
    const auto part = argmax_rows(model.logits(x.gather(rows)));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

double accuracy(const Model& model, const Dataset& data, int batch_size) {
  const auto pred = predict(model, data.images().pixels(), batch_size);
  const auto& labels = data.all_labels();
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace {

void sgd_step(Model& model, const Gradients& grads, std::vector<Tensor>& velocity, double lr, const TrainConfig& cfg) {
  auto params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params[p]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grads[p][i] + cfg.weight_decay * value[i];
      velocity[p][i] = cfg.momentum * velocity[p][i] + g;
      value[i] -= lr * velocity[p][i];
    }
  }
  model.round_parameters_to_float();
}

}  // namespace

TrainLog train_with_loss(Model& model, const Model* teacher, const Dataset& data, const TrainConfig& cfg,
                         const BatchLoss& loss, const Dataset* test, std::optional<double> adversarial_eps) {
  cfg.validate();
  if (data.classes() != model.class_count())
    throw std::invalid_argument("train: dataset has " + std::to_string(data.classes()) + " classes, model predicts " +
                                std::to_string(model.class_count()));
  if (teacher != nullptr && teacher->class_count() != model.class_count())
    throw std::invalid_argument("train: teacher and student class counts differ");
  labeling::LabelStrategy strategy{cfg.label, cfg.gamma, cfg.temperature, teacher};
  strategy.validate();
  if (adversarial_eps && *adversarial_eps < 0.0) throw std::invalid_argument("train: eps_r must be non-negative");

  const bool reads_labels = labeling::needs_labels(cfg.label);
  const augment::MixConfig mix_cfg{cfg.mix, cfg.alpha, cfg.cutout_side};
  const Rng root(cfg.seed, "train");
  std::vector<Tensor> velocity = model.zero_gradients();
  TrainLog log;
  const int n = data.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = cfg.learning_rate_at(epoch);
    Rng epoch_rng = root.fork("epoch", static_cast<std::uint64_t>(epoch));
    const std::vector<int> order = epoch_rng.permutation(n);
    double loss_sum = 0.0;
    int correct = 0;
    int batches = 0;
    for (int start = 0, b = 0; start < n; start += cfg.batch_size, ++b) {
      Rng batch_rng = epoch_rng.fork("batch", static_cast<std::uint64_t>(b));
      Rng aug_rng = batch_rng.fork("normal");
      Rng mix_rng = batch_rng.fork("mix");
      Rng label_rng = batch_rng.fork("label");
      const std::vector<int> rows(order.begin() + start, order.begin() + std::min(n, start + cfg.batch_size));
      Tensor x = normal_augment(data.images().pixels().gather(rows), cfg.flip, cfg.crop_pad, aug_rng, cfg.rescale_prob);

      if (adversarial_eps && *adversarial_eps > 0.0) {
        // ramp the budget up over the first third of training; a fresh network
        // attacked at full budget collapses to the uniform prediction
        const int ramp = std::max(1, cfg.epochs / 3);
        const double eps = *adversarial_eps * std::min(1.0, static_cast<double>(epoch * n + start + 1) /
                                                               (static_cast<double>(ramp) * n));
        attacks::AttackConfig inner;
        inner.epsilon = eps;
        inner.beta = eps / 4.0;
        inner.mu = 0.0;
        inner.iterations = 5;
        inner.diversity = false;
        const attacks::AttackTargets t{data.labels(rows), std::nullopt};
        x = attacks::mi_fgsm(model, ImageBatch(std::move(x)), t, inner).adversarial.pixels();
      }

      const augment::MixResult mix = augment::mix_batch(ImageBatch(std::move(x)), mix_cfg, mix_rng);
      const Tensor targets = build_targets(mix, strategy, data, rows, label_rng);

      const ForwardTrace trace = model.forward(mix.mixed.pixels());
      for (double v : trace.logits().values())
        if (!std::isfinite(v))
          throw std::runtime_error("training diverged: non-finite logits at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b) + " (learning rate " + std::to_string(lr) + ")");
      Gradients grads = model.zero_gradients();
      const double batch_loss = loss(model, trace, targets, grads);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b) + " (learning rate " + std::to_string(lr) + ")");
      sgd_step(model, grads, velocity, lr, cfg);

      loss_sum += batch_loss;
      ++batches;
      if (reads_labels) {
        const auto pred = argmax_rows(trace.logits());
        const auto truth = argmax_rows(targets);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = batches > 0 ? loss_sum / batches : 0.0;
    if (reads_labels && n > 0) rec.train_accuracy = static_cast<double>(correct) / n;
    if (test != nullptr) rec.test_accuracy = accuracy(model, *test);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back(rec);
  }
  return log;
}

TrainLog train_normal(Model& model, const Dataset& data, const TrainConfig& cfg, const Dataset* test) {
  TrainConfig normal = cfg;
  normal.mix = augment::MixKind::none;
  normal.label = labeling::LabelKind::one_hot;
  return train_with_loss(model, nullptr, data, normal, softmax_ce_batch_loss, test);
}

TrainLog train_dsm(Model& student, const Model* teacher, const Dataset& data, const TrainConfig& cfg,
                   const Dataset* test) {
  if (labeling::needs_teacher(cfg.label) && teacher == nullptr)
    throw std::invalid_argument("train_dsm: label strategy " + labeling::to_string(cfg.label) + " needs a teacher");
  return train_with_loss(student, teacher, data, cfg, softmax_ce_batch_loss, test);
}

TrainLog train_slightly_robust(Model& model, const Dataset& data, const TrainConfig& cfg, double eps_r,
                               const Dataset* test) {
  if (eps_r < 0.0) throw std::invalid_argument("train_slightly_robust: eps_r must be non-negative");
  TrainConfig robust = cfg;
  robust.mix = augment::MixKind::none;
  robust.label = labeling::LabelKind::one_hot;
  return train_with_loss(model, nullptr, data, robust, softmax_ce_batch_loss, test, eps_r);
}

}  // namespace dsm::training
