#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dsm/augment.hpp"
#include "dsm/dataset.hpp"
#include "dsm/labeling.hpp"
#include "dsm/model.hpp"

namespace dsm::training {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.05;
  std::vector<int> decay_epochs{15, 25};
  double decay_factor = 0.1;
  double weight_decay = 5e-4;
  double momentum = 0.9;

  augment::MixKind mix = augment::MixKind::none;
  double alpha = 1.0;
  int cutout_side = 0;  ///< 0: half the image height

  labeling::LabelKind label = labeling::LabelKind::one_hot;
  double gamma = 0.1;
  double temperature = 1.0;

  bool flip = false;
  int crop_pad = 1;  ///< random translation by up to this many pixels, edge-replicated
  double rescale_prob = 0.5;  ///< chance of a random shrink-and-pad rescale per sample

  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> train_accuracy;  ///< absent when the run may not read labels
  std::optional<double> test_accuracy;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// Equality on everything except wall time.
  bool same_trajectory(const TrainLog& other) const;
  /// One JSON object per line.
  std::string to_jsonl() const;
};

/// Computes the batch loss from a forward trace and soft targets, accumulating
/// parameter gradients of that loss into `grads`.
using BatchLoss = std::function<double(const Model& model, const ForwardTrace& trace, const Tensor& targets,
                                       Gradients& grads)>;

/// Mean softmax cross-entropy against soft targets.
double softmax_ce_batch_loss(const Model& model, const ForwardTrace& trace, const Tensor& targets, Gradients& grads);

/// Mean over the batch of CE(softmax(teacher(x) / T), softmax(student(x))).
double distillation_loss(const Model& student, const Model& teacher, const Tensor& x, double temperature = 1.0);

/// Random flip, edge-replicated translation and, with probability rescale_prob,
/// a shrink to side in [0.75h, h] zero-padded back to h.
Tensor normal_augment(const Tensor& x, bool flip, int crop_pad, Rng& rng, double rescale_prob = 0.0);

/// Soft training targets for a mixed batch under `strategy`. `rows` index the
/// batch in `data`; labels are only read for strategies that need them.
Tensor build_targets(const augment::MixResult& mix, const labeling::LabelStrategy& strategy, const Dataset& data,
                     std::span<const int> rows, Rng& rng);

/// Plain surrogate training: one-hot labels, normal augmentations only.
TrainLog train_normal(Model& model, const Dataset& data, const TrainConfig& cfg, const Dataset* test = nullptr);

/// Dark-surrogate training: each batch is mixed per cfg.mix, the teacher labels the
/// mixed images, and the student descends CE(teacher probs, student probs).
/// One-hot and smoothed strategies run the same loop without a teacher.
TrainLog train_dsm(Model& student, const Model* teacher, const Dataset& data, const TrainConfig& cfg,
                   const Dataset* test = nullptr);

/// Adversarial training: each batch is replaced by a 5-step iterative sign attack
/// on the current model with budget eps_r (step eps_r / 4) before the CE step.
TrainLog train_slightly_robust(Model& model, const Dataset& data, const TrainConfig& cfg, double eps_r,
                               const Dataset* test = nullptr);

/// Generic loop shared by the routines above; `loss` defaults to softmax CE.
TrainLog train_with_loss(Model& model, const Model* teacher, const Dataset& data, const TrainConfig& cfg,
                         const BatchLoss& loss, const Dataset* test = nullptr,
                         std::optional<double> adversarial_eps = std::nullopt);

double accuracy(const Model& model, const Dataset& data, int batch_size = 256);
std::vector<int> predict(const Model& model, const Tensor& x, int batch_size = 256);

}  // namespace dsm::training
