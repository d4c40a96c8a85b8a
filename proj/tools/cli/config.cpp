#include "config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "dsm/attacks.hpp"
#include "dsm/augment.hpp"
#include "dsm/evalharness.hpp"
#include "dsm/faceverify.hpp"
#include "dsm/labeling.hpp"
#include "dsm/synthetic.hpp"
#include "dsm/training.hpp"

namespace dsm::cli {

namespace {

// Leaves name a type; objects nest; a one-element array describes its elements.
const Json& schema() {
  static const Json model = {{"arch", "string"}, {"checkpoint", "string"}};
  static const Json attack = {{"optimizer", "string"},   {"epsilon", "number"},        {"epsilon_255", "number"},
                              {"beta", "number"},        {"beta_255", "number"},       {"mu", "number"},
                              {"iterations", "integer"}, {"transform_prob", "number"}, {"objective", "string"},
                              {"diversity", "boolean"},  {"fusion", "string"},         {"diversity_min_ratio", "number"}};
  static const Json toy = {{"classes", "integer"},      {"groups", "integer"},         {"train_per_class", "integer"},
                           {"test_per_class", "integer"}, {"shape", "array<integer>"}, {"blobs_per_pattern", "integer"},
                           {"group_weight", "number"},  {"amplitude", "number"},       {"distractor_max", "number"},
                           {"noise", "number"},         {"max_shift", "integer"},      {"seed", "integer"}};
  static const Json data = {{"source", "string"}, {"images", "string"},         {"labels", "string"},
                            {"classes", "integer"}, {"shape", "array<integer>"}, {"split", "string"},
                            {"limit", "integer"},  {"toy", toy}};
  static const Json train = {{"epochs", "integer"},         {"batch_size", "integer"},  {"learning_rate", "number"},
                             {"decay_epochs", "array<integer>"}, {"decay_factor", "number"}, {"weight_decay", "number"},
                             {"momentum", "number"},        {"mix", "string"},          {"alpha", "number"},
                             {"cutout_side", "integer"},    {"label", "string"},        {"gamma", "number"},
                             {"temperature", "number"},     {"flip", "boolean"},        {"crop_pad", "integer"},
                             {"rescale_prob", "number"},    {"eps_r", "number"},        {"eps_r_255", "number"}};
  static const Json face = {{"identities", "integer"},        {"per_identity", "integer"},
                            {"seed", "integer"},              {"shape", "array<integer>"},
                            {"template_amplitude", "number"}, {"identity_amplitude", "number"},
                            {"identity_blobs", "integer"},    {"brightness_jitter", "number"},
                            {"noise", "number"},              {"max_shift", "integer"},
                            {"pairs_per_kind", "integer"},    {"families", "integer"},
                            {"family_weight", "number"},      {"loss", "string"},
                            {"scale", "number"},              {"margin", "number"}};
  static const Json report = {{"input", "string"}, {"format", "string"}, {"title", "string"}};
  static const Json root = {{"seed", "integer"},
                            {"out_dir", "string"},
                            {"data", data},
                            {"eval_data", data},
                            {"model", model},
                            {"teacher", model},
                            {"train", train},
                            {"attack", attack},
                            {"attacks", Json::array({attack})},
                            {"surrogates", Json::array({{{"id", "string"}, {"members", Json::array({model})}}})},
                            {"victims", Json::array({{{"id", "string"}, {"checkpoint", "string"}}})},
                            {"seeds", "array<integer>"},
                            {"alphas", "array<number>"},
                            {"face", face},
                            {"report", report}};
  return root;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

bool is_integer(const Json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

void check_leaf(const std::string& type, const Json& v, const std::string& path) {
  auto fail = [&] { throw ConfigError(path, "expected " + type + ", got " + std::string(v.type_name())); };
  if (type == "string") {
    if (!v.is_string()) fail();
  } else if (type == "integer") {
    if (!is_integer(v)) fail();
  } else if (type == "number") {
    if (!v.is_number()) fail();
  } else if (type == "boolean") {
    if (!v.is_boolean()) fail();
  } else if (type.starts_with("array<")) {
    if (!v.is_array()) fail();
    const std::string element = type.substr(6, type.size() - 7);
    for (std::size_t i = 0; i < v.size(); ++i) check_leaf(element, v[i], path + "[" + std::to_string(i) + "]");
  }
}

void validate(const Json& schema_node, const Json& v, const std::string& path) {
  if (schema_node.is_string()) return check_leaf(schema_node.get<std::string>(), v, path);
  if (schema_node.is_array()) {
    if (!v.is_array()) throw ConfigError(path, "expected array, got " + std::string(v.type_name()));
    for (std::size_t i = 0; i < v.size(); ++i) validate(schema_node[0], v[i], path + "[" + std::to_string(i) + "]");
    return;
  }
  if (!v.is_object()) throw ConfigError(path, "expected object, got " + std::string(v.type_name()));
  for (const auto& [key, value] : v.items()) {
    const std::string child = join(path, key);
    if (!schema_node.contains(key)) throw ConfigError(child, "unknown key");
    validate(schema_node.at(key), value, child);
  }
}

// `base` filled in with every key of `user`; objects merge recursively.
Json overlay(Json base, const Json& user) {
  for (const auto& [key, value] : user.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object())
      base[key] = overlay(base[key], value);
    else
      base[key] = value;
  }
  return base;
}

template <typename F>
void expect(const std::string& path, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

void require(const Json& doc, const std::string& section, const std::string& key) {
  if (!doc.contains(section) || !doc[section].contains(key))
    throw ConfigError(join(section, key), "required by this command");
}

void one_of(const Json& v, const std::string& path, std::initializer_list<const char*> allowed) {
  const auto s = v.get<std::string>();
  for (const char* a : allowed)
    if (s == a) return;
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ConfigError(path, "'" + s + "' is not one of " + list);
}

Json shape_json(ImageShape s) { return Json::array({s.channels, s.height, s.width}); }

Json toy_defaults() {
  const ToyDataConfig c;
  return {{"classes", c.classes},
          {"groups", c.groups},
          {"train_per_class", c.train_per_class},
          {"test_per_class", c.test_per_class},
          {"shape", shape_json(c.shape)},
          {"blobs_per_pattern", c.blobs_per_pattern},
          {"group_weight", c.group_weight},
          {"amplitude", c.amplitude},
          {"distractor_max", c.distractor_max},
          {"noise", c.noise},
          {"max_shift", c.max_shift},
          {"seed", 0}};
}

Json resolve_data(const Json& user, const std::string& path) {
  const std::string source = user.value("source", "toy");
  Json d = {{"source", source}};
  one_of(d["source"], join(path, "source"), {"toy", "idx", "csv"});
  if (source == "toy") {
    if (user.contains("images") || user.contains("labels"))
      throw ConfigError(join(path, "images"), "file paths do not apply to toy data");
    d["toy"] = overlay(toy_defaults(), user.value("toy", Json::object()));
    d["split"] = user.value("split", "all");
  } else {
    if (!user.contains("images")) throw ConfigError(join(path, "images"), "required for " + source + " data");
    if (source == "idx" && !user.contains("labels")) throw ConfigError(join(path, "labels"), "required for idx data");
    if (source == "csv" && !user.contains("shape")) throw ConfigError(join(path, "shape"), "required for csv data");
    if (user.contains("toy")) throw ConfigError(join(path, "toy"), "only applies to toy data");
    d["images"] = user["images"];
    if (user.contains("labels")) d["labels"] = user["labels"];
    d["classes"] = user.value("classes", 10);
    if (user.contains("shape")) d["shape"] = user["shape"];
    d["split"] = user.value("split", "all");
    if (d["split"] != "all") throw ConfigError(join(path, "split"), "file datasets carry no split tags; use \"all\"");
  }
  one_of(d["split"], join(path, "split"), {"train", "test", "all"});
  d["limit"] = user.value("limit", 0);
  if (d["limit"].get<int>() < 0) throw ConfigError(join(path, "limit"), "must be non-negative");
  if (d.contains("toy") && d["toy"]["shape"].size() != 3)
    throw ConfigError(join(path, "toy.shape"), "expected [channels, height, width]");
  if (d.contains("shape") && d["shape"].size() != 3)
    throw ConfigError(join(path, "shape"), "expected [channels, height, width]");
  return d;
}

Json train_defaults(Command command) {
  const training::TrainConfig c;
  Json t = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"decay_epochs", c.decay_epochs},
            {"decay_factor", c.decay_factor},
            {"weight_decay", c.weight_decay},
            {"momentum", c.momentum},
            {"mix", augment::to_string(c.mix)},
            {"alpha", c.alpha},
            {"cutout_side", c.cutout_side},
            {"label", labeling::to_string(c.label)},
            {"gamma", c.gamma},
            {"temperature", c.temperature},
            {"flip", c.flip},
            {"crop_pad", c.crop_pad},
            {"rescale_prob", c.rescale_prob},
            {"eps_r", 0.0}};
  if (command == Command::distill) {
    t["mix"] = "cutmix";
    t["label"] = "dark";
  }
  return t;
}

Json resolve_train(Command command, const Json& user) {
  Json t = overlay(train_defaults(command), user);
  if (t.contains("eps_r_255")) {
    if (user.contains("eps_r")) throw ConfigError("train.eps_r_255", "give eps_r or eps_r_255, not both");
    t["eps_r"] = t["eps_r_255"].get<double>() / 255.0;
    t.erase("eps_r_255");
  }
  expect("train.mix", [&] { augment::parse_mix_kind(t["mix"].get<std::string>()); });
  expect("train.label", [&] { labeling::parse_label_kind(t["label"].get<std::string>()); });
  if (t["eps_r"].get<double>() < 0.0) throw ConfigError("train.eps_r", "must be non-negative");
  if (command == Command::train && labeling::needs_teacher(labeling::parse_label_kind(t["label"].get<std::string>())))
    throw ConfigError("train.label", "dark labels need a teacher; use the distill command");
  expect("train", [&] {
    training::TrainConfig c;
    c.epochs = t["epochs"];
    c.batch_size = t["batch_size"];
    c.learning_rate = t["learning_rate"];
    c.decay_epochs = t["decay_epochs"].get<std::vector<int>>();
    c.decay_factor = t["decay_factor"];
    c.weight_decay = t["weight_decay"];
    c.momentum = t["momentum"];
    c.alpha = t["alpha"];
    c.rescale_prob = t["rescale_prob"];
    c.crop_pad = t["crop_pad"];
    c.validate();
  });
  return t;
}

Json resolve_attack(Command command, const Json& user, const std::string& path, const Overrides& o) {
  attacks::AttackConfig c;
  if (command == Command::face_attack) {
    c.epsilon = 8.0 / 255.0;
    c.iterations = 20;
    c.objective = attacks::Objective::embedding_dodge;
  }
  Json a = {{"optimizer", "mdi2_fgsm"},
            {"epsilon", c.epsilon},
            {"beta", c.beta},
            {"mu", c.mu},
            {"iterations", c.iterations},
            {"transform_prob", c.transform_prob},
            {"objective", attacks::to_string(c.objective)},
            {"diversity", c.diversity},
            {"fusion", c.fusion == attacks::Fusion::logits ? "logits" : "probabilities"},
            {"diversity_min_ratio", c.diversity_min_ratio}};
  a = overlay(a, user);
  for (const char* key : {"epsilon", "beta"}) {
    const std::string scaled = std::string(key) + "_255";
    if (!a.contains(scaled)) continue;
    if (user.contains(key)) throw ConfigError(join(path, scaled), std::string("give ") + key + " or " + scaled + ", not both");
    a[key] = a[scaled].get<double>() / 255.0;
    a.erase(scaled);
  }
  if (o.objective) a["objective"] = *o.objective;
  if (o.optimizer) a["optimizer"] = *o.optimizer;
  expect(join(path, "objective"), [&] { attacks::parse_objective(a["objective"].get<std::string>()); });
  expect(join(path, "optimizer"), [&] { eval::parse_optimizer(a["optimizer"].get<std::string>()); });
  one_of(a["fusion"], join(path, "fusion"), {"logits", "probabilities"});
  const auto objective = attacks::parse_objective(a["objective"].get<std::string>());
  if ((objective == attacks::Objective::targeted_ce || objective == attacks::Objective::targeted_logit) &&
      !user.contains("iterations"))
    a["iterations"] = 200;
  if (command == Command::face_attack) {
    if (!attacks::is_embedding_objective(objective))
      throw ConfigError(join(path, "objective"), "face attacks take embedding_dodge or embedding_impersonate");
    a.erase("objective");  // both kinds run, dodging on same pairs and impersonation on different pairs
  } else if (attacks::is_embedding_objective(objective)) {
    throw ConfigError(join(path, "objective"), "embedding objectives belong to face-attack");
  }
  expect(path, [&] {
    attacks::AttackConfig v;
    v.epsilon = a["epsilon"];
    v.beta = a["beta"];
    v.mu = a["mu"];
    v.iterations = a["iterations"];
    v.transform_prob = a["transform_prob"];
    v.diversity_min_ratio = a["diversity_min_ratio"];
    v.validate();
  });
  return a;
}

Json resolve_face(const Json& user) {
  const face::IdentityDataConfig c;
  Json f = {{"identities", 20},
            {"per_identity", 40},
            {"seed", 0},
            {"shape", shape_json(c.shape)},
            {"template_amplitude", c.template_amplitude},
            {"identity_amplitude", c.identity_amplitude},
            {"identity_blobs", c.identity_blobs},
            {"brightness_jitter", c.brightness_jitter},
            {"noise", c.noise},
            {"max_shift", c.max_shift},
            {"pairs_per_kind", c.pairs_per_kind},
            {"families", c.families},
            {"family_weight", c.family_weight},
            {"loss", "am_softmax"}};
  f = overlay(f, user);
  if (f["shape"].size() != 3) throw ConfigError("face.shape", "expected [channels, height, width]");
  expect("face.loss", [&] {
    const auto kind = face::parse_margin_kind(f["loss"].get<std::string>());
    const auto d = face::MarginLossConfig::defaults(kind);
    if (!f.contains("scale")) f["scale"] = d.scale;
    if (!f.contains("margin")) f["margin"] = d.margin;
    face::MarginLossConfig{kind, f["scale"].get<double>(), f["margin"].get<double>()}.validate();
  });
  if (f["identities"].get<int>() < 2) throw ConfigError("face.identities", "need at least 2 identities");
  if (f["per_identity"].get<int>() < 2) throw ConfigError("face.per_identity", "need at least 2 samples per identity");
  return f;
}

Json resolve_model(const Json& doc, const std::string& section, bool need_arch, bool need_checkpoint,
                   const std::string& default_arch = {}) {
  Json m = doc.value(section, Json::object());
  if (need_arch && !m.contains("arch")) {
    if (default_arch.empty()) throw ConfigError(join(section, "arch"), "required by this command");
    m["arch"] = default_arch;
  }
  if (need_checkpoint) require(doc, section, "checkpoint");
  if (m.contains("arch") && !is_registered_architecture(m["arch"].get<std::string>()))
    throw ConfigError(join(section, "arch"), "unknown architecture '" + m["arch"].get<std::string>() + "'");
  return m;
}

void check_file(const Json& v, const std::string& path) {
  if (!std::filesystem::exists(v.get<std::string>()))
    throw ConfigError(path, "file not found: " + v.get<std::string>());
}

Json resolve_surrogates(const Json& doc) {
  if (!doc.contains("surrogates") || doc["surrogates"].empty()) throw ConfigError("surrogates", "required by this command");
  std::set<std::string> ids;
  const Json& s = doc["surrogates"];
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string p = "surrogates[" + std::to_string(i) + "]";
    if (!s[i].contains("id")) throw ConfigError(p + ".id", "required");
    if (!ids.insert(s[i]["id"].get<std::string>()).second) throw ConfigError(p + ".id", "duplicate id");
    if (!s[i].contains("members") || s[i]["members"].empty()) throw ConfigError(p + ".members", "required");
    for (std::size_t k = 0; k < s[i]["members"].size(); ++k) {
      const std::string mp = p + ".members[" + std::to_string(k) + "]";
      const Json& m = s[i]["members"][k];
      if (!m.contains("checkpoint")) throw ConfigError(mp + ".checkpoint", "required");
      if (m.contains("arch")) throw ConfigError(mp + ".arch", "taken from the checkpoint; remove it");
      check_file(m["checkpoint"], mp + ".checkpoint");
    }
  }
  return s;
}

Json resolve_victims(const Json& doc) {
  if (!doc.contains("victims") || doc["victims"].empty()) throw ConfigError("victims", "required by this command");
  std::set<std::string> ids;
  const Json& v = doc["victims"];
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = "victims[" + std::to_string(i) + "]";
    if (!v[i].contains("id")) throw ConfigError(p + ".id", "required");
    if (v[i]["id"] == eval::kWhiteBox) throw ConfigError(p + ".id", "reserved id");
    if (!ids.insert(v[i]["id"].get<std::string>()).second) throw ConfigError(p + ".id", "duplicate id");
    if (!v[i].contains("checkpoint")) throw ConfigError(p + ".checkpoint", "required");
    check_file(v[i]["checkpoint"], p + ".checkpoint");
  }
  return v;
}

void check_data_files(const Json& d, const std::string& path) {
  if (d.contains("images")) check_file(d["images"], join(path, "images"));
  if (d.contains("labels")) check_file(d["labels"], join(path, "labels"));
}

}  // namespace

Command parse_command(const std::string& name) {
  static const std::map<std::string, Command> names{
      {"train", Command::train},           {"distill", Command::distill},         {"attack", Command::attack},
      {"eval", Command::eval},             {"sweep-alpha", Command::sweep_alpha}, {"face-train", Command::face_train},
      {"face-attack", Command::face_attack}, {"report", Command::report}};
  const auto it = names.find(name);
  if (it == names.end()) throw std::invalid_argument("unknown command '" + name + "'");
  return it->second;
}

std::string to_string(Command command) {
  switch (command) {
    case Command::train: return "train";
    case Command::distill: return "distill";
    case Command::attack: return "attack";
    case Command::eval: return "eval";
    case Command::sweep_alpha: return "sweep-alpha";
    case Command::face_train: return "face-train";
    case Command::face_attack: return "face-attack";
    case Command::report: return "report";
  }
  return "?";
}

Json load_config_file(const std::filesystem::path& path, Command command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", "config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (doc.is_object() && doc.contains("manifest_version")) {
    if (doc.value("command", "") != to_string(command))
      throw ConfigError("command", "manifest was written by '" + doc.value("command", "") + "', not '" +
                                       to_string(command) + "'");
    return doc.at("config");
  }
  return doc;
}

Json resolve_config(Command command, const Json& document, const Overrides& overrides) {
  if (!document.is_object()) throw ConfigError("", "config must be a JSON object");
  validate(schema(), document, "");

  Json out;
  out["seed"] = overrides.seed ? Json(*overrides.seed) : document.value("seed", Json(0));
  std::string out_dir = document.value("out_dir", "runs/" + to_string(command));
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') out_dir = env;
  if (overrides.out_dir) out_dir = *overrides.out_dir;
  out["out_dir"] = out_dir;

  auto seeds = [&] {
    Json s = document.value("seeds", Json::array({out["seed"]}));
    if (s.empty()) throw ConfigError("seeds", "must not be empty");
    return s;
  };

  switch (command) {
    case Command::train:
    case Command::distill: {
      if (!document.contains("data")) throw ConfigError("data", "required by this command");
      out["data"] = resolve_data(document["data"], "data");
      check_data_files(out["data"], "data");
      out["model"] = resolve_model(document, "model", true, false);
      if (command == Command::distill) {
        out["teacher"] = resolve_model(document, "teacher", false, true);
        if (out["teacher"].contains("arch")) throw ConfigError("teacher.arch", "taken from the checkpoint; remove it");
        check_file(out["teacher"]["checkpoint"], "teacher.checkpoint");
      }
      out["train"] = resolve_train(command, document.value("train", Json::object()));
      if (command == Command::distill && out["train"]["eps_r"].get<double>() > 0.0)
        throw ConfigError("train.eps_r", "adversarial training applies to the train command only");
      break;
    }
    case Command::attack:
    case Command::eval: {
      if (!document.contains("data")) throw ConfigError("data", "required by this command");
      out["data"] = resolve_data(document["data"], "data");
      check_data_files(out["data"], "data");
      out["surrogates"] = resolve_surrogates(document);
      if (command == Command::attack) {
        out["attack"] = resolve_attack(command, document.value("attack", Json::object()), "attack", overrides);
      } else {
        if (document.contains("attack") && document.contains("attacks"))
          throw ConfigError("attacks", "give attack or attacks, not both");
        Json list = document.contains("attacks") ? document["attacks"]
                                                 : Json::array({document.value("attack", Json::object())});
        if (list.empty()) throw ConfigError("attacks", "must not be empty");
        Json resolved = Json::array();
        for (std::size_t i = 0; i < list.size(); ++i)
          resolved.push_back(resolve_attack(command, list[i], "attacks[" + std::to_string(i) + "]", overrides));
        out["attacks"] = resolved;
        out["victims"] = resolve_victims(document);
        out["seeds"] = seeds();
      }
      break;
    }
    case Command::sweep_alpha: {
      for (const char* key : {"data", "eval_data"})
        if (!document.contains(key)) throw ConfigError(key, "required by this command");
      out["data"] = resolve_data(document["data"], "data");
      out["eval_data"] = resolve_data(document["eval_data"], "eval_data");
      check_data_files(out["data"], "data");
      check_data_files(out["eval_data"], "eval_data");
      out["teacher"] = resolve_model(document, "teacher", false, true);
      check_file(out["teacher"]["checkpoint"], "teacher.checkpoint");
      out["model"] = resolve_model(document, "model", true, false);
      out["victims"] = resolve_victims(document);
      out["alphas"] = document.value("alphas", Json::array({0.1, 1.0, 4.0}));
      if (out["alphas"].empty()) throw ConfigError("alphas", "must not be empty");
      for (std::size_t i = 0; i < out["alphas"].size(); ++i)
        if (out["alphas"][i].get<double>() <= 0.0)
          throw ConfigError("alphas[" + std::to_string(i) + "]", "must be positive");
      out["seeds"] = seeds();
      out["train"] = resolve_train(Command::distill, document.value("train", Json::object()));
      out["train"].erase("mix");
      out["train"].erase("label");
      out["train"].erase("alpha");
      out["attack"] = resolve_attack(command, document.value("attack", Json::object()), "attack", overrides);
      break;
    }
    case Command::face_train: {
      out["face"] = resolve_face(document.value("face", Json::object()));
      out["model"] = resolve_model(document, "model", true, false, "face_a");
      Json train = document.value("train", Json::object());
      Json defaults = {{"epochs", 15}, {"learning_rate", 0.05}, {"decay_epochs", Json::array()}};
      out["train"] = resolve_train(command, overlay(defaults, train));
      for (const char* key : {"mix", "label", "alpha", "cutout_side", "gamma", "temperature", "eps_r"})
        if (train.contains(key)) throw ConfigError(join("train", key), "does not apply to face-train");
      for (const char* key : {"mix", "label", "alpha", "cutout_side", "gamma", "temperature", "eps_r"})
        out["train"].erase(key);
      break;
    }
    case Command::face_attack: {
      out["face"] = resolve_face(document.value("face", Json::object()));
      out["surrogates"] = resolve_surrogates(document);
      out["victims"] = resolve_victims(document);
      out["attack"] = resolve_attack(command, document.value("attack", Json::object()), "attack", overrides);
      out["seeds"] = seeds();
      break;
    }
    case Command::report: {
      require(document, "report", "input");
      out["report"] = overlay(Json{{"format", "csv"}, {"title", "Transfer success"}}, document["report"]);
      one_of(out["report"]["format"], "report.format", {"csv", "json"});
      check_file(out["report"]["input"], "report.input");
      break;
    }
  }
  return out;
}

}  // namespace dsm::cli
