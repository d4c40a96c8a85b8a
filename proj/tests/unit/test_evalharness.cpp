#include <doctest.h>

#include <fstream>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "dsm/evalharness.hpp"
#include "dsm/synthetic.hpp"
#include "helpers.hpp"

using namespace dsm;
using namespace dsm::eval;

namespace {

template <typename T>
concept ExposesLogits = requires(const T& t, const Tensor& x) { t.logits(x); };
template <typename T>
concept ExposesGradients = requires(const T& t) { t.parameters(); };

static_assert(!ExposesLogits<VictimOracle>, "victims answer with labels only");
static_assert(!ExposesGradients<VictimOracle>, "victims hide their parameters");

Dataset tiny_eval(std::uint64_t seed) {
  ToyDataConfig cfg;
  cfg.classes = 4;
  cfg.groups = 2;
  cfg.train_per_class = 1;
  cfg.test_per_class = 8;
  cfg.shape = {1, 8, 8};
  Rng rng(seed, "toy");
  return make_toy_dataset(cfg, rng).split(Split::test);
}

}  // namespace

TEST_CASE("success predicates") {
  const Model m = test::linear_model({1, 1, 2}, 2, {1, 0, 0, 1});
  const VictimOracle v("lin", m);
  const ImageBatch x(Tensor({2, 1, 1, 2}, std::vector<double>{0.9, 0.1, 0.2, 0.8}));
  CHECK(v.predict(x) == std::vector<int>{0, 1});
  CHECK(untargeted_success(v, x, std::vector<int>{0, 0}) == std::vector<bool>{false, true});
  CHECK(targeted_success(v, x, std::vector<int>{0, 0}) == std::vector<bool>{true, false});
  CHECK_THROWS_AS(targeted_success(v, x, std::vector<int>{0, 2}), std::out_of_range);
  CHECK(success_rate({true, false, true, true}) == 0.75);
}

TEST_CASE("zero budget measures clean error") {
  const Dataset d = tiny_eval(1);
  const Model a = test::random_model("conv_a", {1, 8, 8}, 4, 1);
  const Model b = test::random_model("mlp", {1, 8, 8}, 4, 2);
  const Surrogate s{"a", {&a}};
  const VictimOracle victims[] = {{"b", b}};
  AttackSpec spec{Optimizer::mi_fgsm, {}};
  spec.config.epsilon = 0.0;
  const std::uint64_t seeds[] = {1};
  const auto r = run_matrix(std::span(&s, 1), victims, d, std::span(&spec, 1), seeds);
  const auto pred = victims[0].predict(d.images());
  int wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != d.all_labels()[i];
  for (const auto& c : r.cells)
    if (c.victim == "b") CHECK(c.successes == wrong);
  CHECK(r.clean_accuracy.at("b") == doctest::Approx(1.0 - static_cast<double>(wrong) / pred.size()));
}

TEST_CASE("self transfer equals the white-box rate") {
  const Dataset d = tiny_eval(2);
  const Model a = test::random_model("conv_a", {1, 8, 8}, 4, 3);
  const Surrogate s{"a", {&a}};
  const VictimOracle victims[] = {{"a-copy", a}};
  AttackSpec spec{Optimizer::mdi2_fgsm, {}};
  const std::uint64_t seeds[] = {1, 2};
  const auto r = run_matrix(std::span(&s, 1), victims, d, std::span(&spec, 1), seeds);
  REQUIRE(r.cells.size() == 4);
  for (std::uint64_t seed : seeds) {
    int wb = -1, tr = -2;
    for (const auto& c : r.cells) {
      if (c.seed != seed) continue;
      (c.victim == kWhiteBox ? wb : tr) = c.successes;
    }
    CHECK(wb == tr);
  }
  double sum = 0.0;
  for (const auto& c : r.cells)
    if (c.victim != kWhiteBox) sum += c.success_rate();
  CHECK(r.mean_transfer("a") == doctest::Approx(sum / 2));
}

TEST_CASE("report round trips") {
  const Dataset d = tiny_eval(3);
  const Model a = test::random_model("conv_a", {1, 8, 8}, 4, 4);
  const Model b = test::random_model("conv_b", {1, 8, 8}, 4, 5);
  const Surrogate s[] = {{"a", {&a}}, {"ab", {&a, &b}}};
  const VictimOracle victims[] = {{"b", b}};
  AttackSpec specs[] = {{Optimizer::fgsm, {}}, {Optimizer::mi_fgsm, {}}};
  specs[1].config.objective = attacks::Objective::targeted_ce;
  const std::uint64_t seeds[] = {7};
  const auto r = run_matrix(s, victims, d, specs, seeds);
  CHECK(r.cells.size() == 2 * 2 * 2);

  const std::string csv = report_csv(r);
  CHECK(csv.rfind("surrogate,victim,optimizer,objective,epsilon,N,seed,success_rate,samples\n", 0) == 0);
  const auto back = parse_report_csv(csv);
  CHECK(back.cells == r.cells);
  CHECK(report_csv(back) == csv);

  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j.at("cells").size() == r.cells.size());
  const auto snap = nlohmann::json::parse(r.config_snapshot);
  CHECK(snap.contains("seeds"));

  const auto dir = test::temp_dir("report");
  emit_report(r, dir / "r.csv", ReportFormat::csv);
  std::ifstream in(dir / "r.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == csv);
}

TEST_CASE("invalid grids are rejected") {
  const Dataset d = tiny_eval(4);
  const Model a = test::random_model("conv_a", {1, 8, 8}, 4, 6);
  const Model five = test::random_model("conv_a", {1, 8, 8}, 5, 6);
  const Surrogate s{"a", {&a}};
  const VictimOracle victims[] = {{"a", a}};
  const VictimOracle wrong[] = {{"five", five}};
  const AttackSpec spec{};
  const std::uint64_t seeds[] = {1};
  CHECK_THROWS(run_matrix({}, victims, d, std::span(&spec, 1), seeds));
  CHECK_THROWS(run_matrix(std::span(&s, 1), victims, d, {}, seeds));
  CHECK_THROWS(run_matrix(std::span(&s, 1), victims, d, std::span(&spec, 1), {}));
  CHECK_THROWS(run_matrix(std::span(&s, 1), wrong, d, std::span(&spec, 1), seeds));
  AttackSpec face{};
  face.config.objective = attacks::Objective::embedding_dodge;
  CHECK_THROWS(run_matrix(std::span(&s, 1), victims, d, std::span(&face, 1), seeds));

  const auto dir = test::temp_dir("plots");
  CHECK_THROWS(emit_line_plot(dir / "a.svg", {}, "t", "x", "y"));
  CHECK_THROWS(emit_bar_chart(dir / "b.svg", {}, "t", "y"));
  const Series series[] = {{"cm", {{0.1, 0.2}, {1.0, 0.3}}}};
  emit_line_plot(dir / "a.svg", series, "t", "alpha", "success", true);
  CHECK(std::filesystem::file_size(dir / "a.svg") > 0);
}

TEST_CASE("optimizer names") {
  for (Optimizer o : {Optimizer::fgsm, Optimizer::mi_fgsm, Optimizer::mdi2_fgsm})
    CHECK(parse_optimizer(to_string(o)) == o);
  CHECK_THROWS(parse_optimizer("cw"));
}
