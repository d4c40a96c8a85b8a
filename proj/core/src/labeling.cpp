#include "dsm/labeling.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dsm::labeling {

LabelKind parse_label_kind(const std::string& name) {
  if (name == "one_hot") return LabelKind::one_hot;
  if (name == "smooth") return LabelKind::smooth;
  if (name == "dark") return LabelKind::dark;
  if (name == "dark_shuffled") return LabelKind::dark_shuffled;
  if (name == "dark_reversed") return LabelKind::dark_reversed;
  throw std::invalid_argument("unknown label strategy '" + name + "'");
}

std::string to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::one_hot: return "one_hot";
    case LabelKind::smooth: return "smooth";
    case LabelKind::dark: return "dark";
    case LabelKind::dark_shuffled: return "dark_shuffled";
    case LabelKind::dark_reversed: return "dark_reversed";
  }
  return "one_hot";
}

bool needs_teacher(LabelKind kind) {
  return kind == LabelKind::dark || kind == LabelKind::dark_shuffled || kind == LabelKind::dark_reversed;
}

bool needs_labels(LabelKind kind) { return kind != LabelKind::dark; }

void LabelStrategy::validate() const {
  if (needs_teacher(kind) && teacher == nullptr)
    throw std::invalid_argument("label strategy " + to_string(kind) + " requires a teacher model");
  if (kind == LabelKind::smooth && !(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("label smoothing requires 0 <= gamma < 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("teacher temperature must be positive");
}

namespace {
void check_class(int y, int classes) {
  if (y < 0 || y >= classes)
    throw std::out_of_range("class " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
}
}  // namespace

LabelDistribution one_hot(int y, int classes) {
  check_class(y, classes);
  std::vector<double> p(static_cast<std::size_t>(classes), 0.0);
  p[static_cast<std::size_t>(y)] = 1.0;
  return LabelDistribution(std::move(p));
}

LabelDistribution smooth_label(int y, int classes, double gamma) {
  check_class(y, classes);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("smooth_label: gamma must lie in [0, 1)");
  if (gamma == 0.0) return one_hot(y, classes);
  if (classes < 2) throw std::invalid_argument("smooth_label: needs at least two classes when gamma > 0");
  std::vector<double> p(static_cast<std::size_t>(classes), gamma / (classes - 1));
  p[static_cast<std::size_t>(y)] = 1.0 - gamma;
  return LabelDistribution(std::move(p));
}

Tensor dark_label(const Model& teacher, const Tensor& x, double temperature) {
  return softmax_rows(teacher.logits(x), temperature);
}

Tensor dark_label(const Model& teacher, const Tensor& x, int expected_classes, double temperature) {
  if (teacher.class_count() != expected_classes)
    throw std::invalid_argument("teacher predicts " + std::to_string(teacher.class_count()) + " classes, dataset has " +
                                std::to_string(expected_classes));
  return dark_label(teacher, x, temperature);
}

LabelDistribution shuffle_dark(const LabelDistribution& p, int y, Rng& rng) {
  const int classes = static_cast<int>(p.size());
  check_class(y, classes);
  std::vector<double> others;
  for (int k = 0; k < classes; ++k)
    if (k != y) others.push_back(p[static_cast<std::size_t>(k)]);
  const std::vector<int> perm = rng.permutation(static_cast<int>(others.size()));
  std::vector<double> out(p.probs().begin(), p.probs().end());
  std::size_t next = 0;
  for (int k = 0; k < classes; ++k)
    if (k != y) out[static_cast<std::size_t>(k)] = others[static_cast<std::size_t>(perm[next++])];
  return LabelDistribution(std::move(out));
}

LabelDistribution reverse_dark(const LabelDistribution& p, int y) {
  const int classes = static_cast<int>(p.size());
  check_class(y, classes);
  std::vector<int> positions;
  for (int k = 0; k < classes; ++k)
    if (k != y) positions.push_back(k);
  // positions ordered by value descending, ties by ascending index
  std::vector<int> by_rank = positions;
  std::stable_sort(by_rank.begin(), by_rank.end(),
                   [&](int a, int b) { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });
  std::vector<double> out(p.probs().begin(), p.probs().end());
  const std::size_t m = by_rank.size();
  for (std::size_t r = 0; r < m; ++r)
    out[static_cast<std::size_t>(by_rank[r])] = p[static_cast<std::size_t>(by_rank[m - 1 - r])];
  return LabelDistribution(std::move(out));
}

}  // namespace dsm::labeling
