#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dsm/labeling.hpp"
#include "helpers.hpp"

using namespace dsm;
using namespace dsm::labeling;

TEST_CASE("one-hot labels") {
  const auto a = one_hot(2, 4);
  CHECK(std::vector<double>(a.probs().begin(), a.probs().end()) == std::vector<double>{0, 0, 1, 0});
  CHECK(one_hot(0, 1)[0] == 1.0);
  CHECK_THROWS_AS(one_hot(5, 3), std::out_of_range);
}

TEST_CASE("label smoothing") {
  const auto s = smooth_label(0, 10, 0.1);
  CHECK(std::abs(s[0] - 0.9) < 1e-12);
  for (std::size_t k = 1; k < 10; ++k) CHECK(std::abs(s[k] - 0.1 / 9.0) < 1e-12);
  CHECK(smooth_label(3, 5, 0.0) == one_hot(3, 5));
  const auto h = smooth_label(1, 2, 0.5);
  CHECK(h[0] == 0.5);
  CHECK(h[1] == 0.5);
  CHECK_THROWS(smooth_label(0, 1, 0.1));
  CHECK_THROWS(smooth_label(0, 3, 1.0));
}

TEST_CASE("dark labels are the teacher softmax") {
  const Model zero = make_model("conv_a", {1, 8, 8}, 5);
  const auto x = test::random_batch(3, {1, 8, 8}, 1).pixels();
  const Tensor u = dark_label(zero, x);
  for (double v : u.values()) CHECK(std::abs(v - 0.2) < 1e-12);

  const Model m = test::random_model("conv_a", {1, 8, 8}, 5, 3);
  const Tensor hot = dark_label(m, x, 1e6);
  for (double v : hot.values()) CHECK(std::abs(v - 0.2) < 1e-3);

  const Tensor logits = m.logits(x);
  const Tensor p = dark_label(m, x);
  for (int r = 0; r < 3; ++r) {
    const auto expected = softmax(logits.row(r));
    for (int k = 0; k < 5; ++k) CHECK(std::abs(p.at(r, k) - expected[static_cast<std::size_t>(k)]) < 1e-12);
  }
  CHECK_THROWS(dark_label(m, x, 7));
}

TEST_CASE("dark label of a two-class linear teacher") {
  // logits = (0.2*1 - 0.4*0.5 + 0.1, -0.3*1 + 0.6*0.5) = (0.1, 0.0)
  const Model m = test::linear_model({1, 1, 2}, 2, {0.2, -0.4, -0.3, 0.6}, {0.1, 0.0});
  const Tensor x({1, 1, 1, 2}, std::vector<double>{1.0, 0.5});
  const Tensor p = dark_label(m, x);
  const double p0 = 1.0 / (1.0 + std::exp(-0.1));
  CHECK(std::abs(p.at(0, 0) - p0) < 1e-12);
  CHECK(std::abs(p.at(0, 1) - (1.0 - p0)) < 1e-12);
}

TEST_CASE("shuffled dark knowledge") {
  Rng rng(4, "shuffle");
  const LabelDistribution two({0.7, 0.3});
  CHECK(shuffle_dark(two, 0, rng) == two);

  const LabelDistribution p({0.5, 0.3, 0.2});
  bool saw_swap = false, saw_same = false;
  for (int t = 0; t < 100; ++t) {
    const auto q = shuffle_dark(p, 0, rng);
    CHECK(q[0] == 0.5);
    const bool same = q[1] == 0.3 && q[2] == 0.2;
    const bool swap = q[1] == 0.2 && q[2] == 0.3;
    CHECK((same || swap));
    saw_same |= same;
    saw_swap |= swap;
  }
  CHECK(saw_same);
  CHECK(saw_swap);

  for (int t = 0; t < 1000; ++t) {
    std::vector<double> z(6);
    for (double& v : z) v = rng.normal(0, 2);
    const auto d = softmax(z);
    const int y = static_cast<int>(rng.below(6));
    const auto q = shuffle_dark(d, y, rng);
    double sum = 0.0;
    for (double v : q.probs()) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(q[static_cast<std::size_t>(y)] == d[static_cast<std::size_t>(y)]);
    std::vector<double> a(d.probs().begin(), d.probs().end()), b(q.probs().begin(), q.probs().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("reversed dark knowledge") {
  const auto q = reverse_dark(LabelDistribution({0.5, 0.3, 0.2}), 0);
  CHECK(q[0] == 0.5);
  CHECK(q[1] == 0.2);
  CHECK(q[2] == 0.3);

  const LabelDistribution ties({0.4, 0.2, 0.2, 0.2});
  CHECK(reverse_dark(ties, 0) == ties);
  const LabelDistribution two({0.1, 0.9});
  CHECK(reverse_dark(two, 1) == two);

  // ranks invert at fixed positions: 0.3 > 0.15 > 0.05 becomes 0.05 < 0.15 < 0.3
  const auto r = reverse_dark(LabelDistribution({0.05, 0.5, 0.3, 0.15}), 1);
  CHECK(r[0] == 0.3);
  CHECK(r[1] == 0.5);
  CHECK(r[2] == 0.05);
  CHECK(r[3] == 0.15);
}

TEST_CASE("label strategy validation") {
  const Model t = test::random_model("mlp", {1, 4, 4}, 3, 1);
  CHECK_THROWS((LabelStrategy{LabelKind::dark, 0.1, 1.0, nullptr}.validate()));
  CHECK_NOTHROW((LabelStrategy{LabelKind::dark, 0.1, 1.0, &t}.validate()));
  CHECK_THROWS((LabelStrategy{LabelKind::smooth, 1.0, 1.0, nullptr}.validate()));
  CHECK_NOTHROW((LabelStrategy{LabelKind::smooth, 0.1, 1.0, nullptr}.validate()));
  for (auto k : {LabelKind::one_hot, LabelKind::smooth, LabelKind::dark, LabelKind::dark_shuffled,
                 LabelKind::dark_reversed})
    CHECK(parse_label_kind(to_string(k)) == k);
  CHECK_FALSE(needs_labels(LabelKind::dark));
  CHECK(needs_labels(LabelKind::dark_shuffled));
}
