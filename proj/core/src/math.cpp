#include "dsm/math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsm {

bool on_simplex(std::span<const double> p, double tolerance) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

LabelDistribution::LabelDistribution(std::vector<double> probs, double tolerance) : probs_(std::move(probs)) {
  if (!on_simplex(probs_, tolerance)) throw std::invalid_argument("label distribution is not on the simplex");
}

namespace {

void softmax_into(std::span<const double> z, std::span<double> out, double temperature) {
  double peak = -INFINITY;
  for (double v : z) {
    if (!std::isfinite(v)) throw std::domain_error("softmax: non-finite logit");
    peak = std::max(peak, v);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - peak) / temperature);
    total += out[i];
  }
  for (double& v : out) v /= total;
}

}  // namespace

LabelDistribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  std::vector<double> out(logits.size());
  softmax_into(logits, out, 1.0);
  return LabelDistribution(std::move(out));
}

Tensor softmax_rows(const Tensor& logits, double temperature) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_rows: expected (n, K) logits");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_rows: temperature must be positive");
  Tensor out = Tensor::like(logits);
  for (int r = 0; r < logits.dim(0); ++r) softmax_into(logits.row(r), out.row(r), temperature);
  return out;
}

double cross_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("cross_entropy: class count mismatch (" + std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != 0.0) total -= p[i] * std::log(std::max(q[i], kProbabilityFloor));
  return total;
}

double cross_entropy(const LabelDistribution& p, const LabelDistribution& q) {
  return cross_entropy(p.probs(), q.probs());
}

std::vector<double> softmax_cross_entropy_rows(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "softmax_cross_entropy");
  const Tensor probs = softmax_rows(logits);
  std::vector<double> out(static_cast<std::size_t>(logits.dim(0)));
  for (int r = 0; r < logits.dim(0); ++r) out[static_cast<std::size_t>(r)] = cross_entropy(targets.row(r), probs.row(r));
  return out;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "softmax_cross_entropy");
  const int n = logits.dim(0);
  LossAndGrad result{0.0, softmax_rows(logits)};
  for (int r = 0; r < n; ++r) result.loss += cross_entropy(targets.row(r), result.grad.row(r));
  result.loss /= n;
  for (std::size_t i = 0; i < result.grad.size(); ++i) result.grad[i] = (result.grad[i] - targets[i]) / n;
  return result;
}

Tensor one_hot_rows(std::span<const int> labels, int classes) {
  Tensor out({static_cast<int>(labels.size()), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    out.at(static_cast<int>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace dsm
