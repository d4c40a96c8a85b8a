#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli/commands.hpp"

using namespace dsm::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dsm_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json tiny_data() {
  return Json::parse(R"({"source": "toy", "split": "train",
    "toy": {"classes": 4, "groups": 2, "train_per_class": 12, "test_per_class": 6, "shape": [1, 8, 8]}})");
}

std::string error_path(Command c, const Json& doc) {
  try {
    resolve_config(c, doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("unknown keys and bad types name their field") {
  Json doc{{"data", tiny_data()}, {"model", {{"arch", "conv_a"}}}};
  doc["train"] = {{"epochs", 1}, {"learnig_rate", 0.1}};
  CHECK(error_path(Command::train, doc) == "train.learnig_rate");
  doc["train"] = {{"epochs", "three"}};
  CHECK(error_path(Command::train, doc) == "train.epochs");
  doc["train"] = {{"epochs", 1}};
  doc["data"]["toy"]["colour"] = true;
  CHECK(error_path(Command::train, doc) == "data.toy.colour");
  doc["data"]["toy"].erase("colour");
  doc["extra"] = 1;
  CHECK(error_path(Command::train, doc) == "extra");
  doc.erase("extra");
  CHECK(error_path(Command::train, doc) == "<accepted>");
  CHECK(error_path(Command::train, Json{{"data", tiny_data()}}) == "model.arch");
}

TEST_CASE("budgets in 1/255 units and objective-dependent defaults") {
  const fs::path dir = scratch("budgets");
  Json ck{{"data", tiny_data()}, {"model", {{"arch", "mlp"}}}, {"train", {{"epochs", 0}}}, {"out_dir", dir.string()}};
  run_command(Command::train, resolve_config(Command::train, ck));
  const std::string ckpt = (dir / "model.ckpt").string();

  Json doc{{"data", tiny_data()}, {"surrogates", {{{"id", "s"}, {"members", {{{"checkpoint", ckpt}}}}}}}};
  doc["attack"] = {{"epsilon_255", 8}, {"beta_255", 1}};
  Json r = resolve_config(Command::attack, doc);
  CHECK(r["attack"]["epsilon"].get<double>() == doctest::Approx(8.0 / 255).epsilon(1e-15));
  CHECK(r["attack"]["beta"].get<double>() == doctest::Approx(1.0 / 255).epsilon(1e-15));
  CHECK_FALSE(r["attack"].contains("epsilon_255"));
  CHECK(r["attack"]["iterations"] == 10);

  r = resolve_config(Command::attack, doc, {std::nullopt, std::nullopt, "targeted_ce", std::nullopt});
  CHECK(r["attack"]["iterations"] == 200);
  CHECK(r["attack"]["objective"] == "targeted_ce");

  doc["attack"]["epsilon"] = 0.1;
  CHECK(error_path(Command::attack, doc) == "attack.epsilon_255");
  doc["attack"] = {{"optimizer", "pgd"}};
  CHECK(error_path(Command::attack, doc) == "attack.optimizer");
  fs::remove_all(dir);
}

TEST_CASE("output directory precedence") {
  Json doc{{"data", tiny_data()}, {"model", {{"arch", "mlp"}}}, {"out_dir", "from_config"}};
  unsetenv(kOutDirEnv);
  CHECK(resolve_config(Command::train, doc)["out_dir"] == "from_config");
  setenv(kOutDirEnv, "from_env", 1);
  CHECK(resolve_config(Command::train, doc)["out_dir"] == "from_env");
  CHECK(resolve_config(Command::train, doc, {std::nullopt, "from_flag", std::nullopt, std::nullopt})["out_dir"] ==
        "from_flag");
  unsetenv(kOutDirEnv);
}

TEST_CASE("invalid configs write nothing") {
  const fs::path dir = scratch("invalid") / "out";
  Json doc{{"data", tiny_data()}, {"model", {{"arch", "mlp"}}}, {"out_dir", dir.string()}};
  doc["teacher"] = {{"checkpoint", (dir / "missing.ckpt").string()}};
  CHECK_THROWS_AS(resolve_config(Command::distill, doc), ConfigError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("manifest re-runs reproduce artifacts byte for byte") {
  const fs::path root = scratch("rerun");
  Json train{{"seed", 3}, {"data", tiny_data()}, {"model", {{"arch", "conv_a"}}}, {"train", {{"epochs", 2}}}};
  train["out_dir"] = (root / "a").string();
  run_command(Command::train, resolve_config(Command::train, train));

  Json eval{{"data", tiny_data()}, {"seeds", {1, 2}}, {"out_dir", (root / "e1").string()}};
  eval["data"]["split"] = "test";
  eval["surrogates"] = {{{"id", "s"}, {"members", {{{"checkpoint", (root / "a" / "model.ckpt").string()}}}}}};
  eval["victims"] = {{{"id", "v"}, {"checkpoint", (root / "a" / "model.ckpt").string()}}};
  eval["attacks"] = {{{"optimizer", "mdi2_fgsm"}, {"epsilon_255", 16}}, {{"optimizer", "fgsm"}}};
  const auto first = run_command(Command::eval, resolve_config(Command::eval, eval));

  for (const auto& [cmd, dir] : {std::pair{Command::train, std::string("a")}, std::pair{Command::eval, std::string("e1")}}) {
    const Json doc = load_config_file(root / dir / "manifest.json", cmd);
    const Json resolved = resolve_config(cmd, doc, {std::nullopt, (root / (dir + "_again")).string(), std::nullopt, std::nullopt});
    const auto artifacts = run_command(cmd, resolved);
    CHECK_FALSE(artifacts.empty());
    for (const auto& a : artifacts) CHECK(slurp(root / dir / a) == slurp(root / (dir + "_again") / a));
  }
  CHECK(first.size() == 3);
  CHECK_THROWS_AS(load_config_file(root / "a" / "manifest.json", Command::eval), ConfigError);
  fs::remove_all(root);
}

TEST_CASE("sha256 of a known string") {
  const fs::path dir = scratch("sha");
  std::ofstream(dir / "abc") << "abc";
  CHECK(sha256_file(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}
