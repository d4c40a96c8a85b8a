#pragma once

#include <string>

#include "dsm/math.hpp"
#include "dsm/model.hpp"
#include "dsm/rng.hpp"

namespace dsm::labeling {

enum class LabelKind { one_hot, smooth, dark, dark_shuffled, dark_reversed };

LabelKind parse_label_kind(const std::string& name);
std::string to_string(LabelKind kind);
/// True for the kinds that query a teacher model.
bool needs_teacher(LabelKind kind);
/// True for the kinds that read ground-truth labels.
bool needs_labels(LabelKind kind);

struct LabelStrategy {
  LabelKind kind = LabelKind::one_hot;
  double gamma = 0.1;              ///< smoothing mass moved off the true class
  double temperature = 1.0;        ///< teacher softmax temperature
  const Model* teacher = nullptr;  ///< required by the dark kinds

  /// Throws if the strategy's invariants do not hold.
  void validate() const;
};

LabelDistribution one_hot(int y, int classes);
/// (1 - gamma) at y and gamma / (K - 1) elsewhere.
LabelDistribution smooth_label(int y, int classes, double gamma);

/// Row-wise softmax(f(x) / T) of the teacher: the dark-knowledge soft labels.
Tensor dark_label(const Model& teacher, const Tensor& x, double temperature = 1.0);
/// Same, checking the teacher's class count against the dataset's.
Tensor dark_label(const Model& teacher, const Tensor& x, int expected_classes, double temperature = 1.0);

/// Keeps p_y and permutes the other entries uniformly at random.
LabelDistribution shuffle_dark(const LabelDistribution& p, int y, Rng& rng);

/// Keeps p_y; the non-true entries keep their positions but the values are
/// reassigned so the rank order among them is inverted: the position holding
/// the largest value receives the smallest, and so on. Ties rank by ascending
/// position.
LabelDistribution reverse_dark(const LabelDistribution& p, int y);

}  // namespace dsm::labeling
