#pragma once

#include <span>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

/// Floor applied to probabilities before taking logs in cross_entropy.
inline constexpr double kProbabilityFloor = 1e-12;

/// A probability vector over K classes.
class LabelDistribution {
public:
  LabelDistribution() = default;
  /// Validates non-negativity and unit sum (within `tolerance`).
  explicit LabelDistribution(std::vector<double> probs, double tolerance = 1e-6);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  bool operator==(const LabelDistribution&) const = default;

private:
  std::vector<double> probs_;
};

bool on_simplex(std::span<const double> p, double tolerance = 1e-6);

LabelDistribution softmax(std::span<const double> logits);
/// Row-wise softmax of an (n, K) logit matrix, optionally at a temperature.
Tensor softmax_rows(const Tensor& logits, double temperature = 1.0);

/// -sum_i p_i log max(q_i, floor).
double cross_entropy(std::span<const double> p, std::span<const double> q);
double cross_entropy(const LabelDistribution& p, const LabelDistribution& q);

struct LossAndGrad {
  double loss = 0.0;  ///< mean over rows
  Tensor grad;        ///< d loss / d logits, same shape as logits
};

/// Mean over the batch of CE(targets_i, softmax(logits_i)) and its gradient
/// (softmax - targets) / n with respect to the logits.
LossAndGrad softmax_cross_entropy(const Tensor& logits, const Tensor& targets);

/// Per-row CE(targets_i, softmax(logits_i)).
std::vector<double> softmax_cross_entropy_rows(const Tensor& logits, const Tensor& targets);

/// (n, K) one-hot matrix.
Tensor one_hot_rows(std::span<const int> labels, int classes);

}  // namespace dsm
