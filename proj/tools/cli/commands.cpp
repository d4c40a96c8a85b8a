#include "commands.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>

#include "dsm/checkpoint.hpp"
#include "dsm/dataset.hpp"
#include "dsm/evalharness.hpp"
#include "dsm/faceverify.hpp"
#include "dsm/synthetic.hpp"
#include "dsm/training.hpp"

namespace dsm::cli {

namespace fs = std::filesystem;

namespace {

ImageShape to_shape(const Json& j) { return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()}; }

Dataset load_data(const Json& d) {
  Dataset data;
  const std::string source = d["source"];
  if (source == "toy") {
    const Json& t = d["toy"];
    ToyDataConfig c;
    c.classes = t["classes"];
    c.groups = t["groups"];
    c.train_per_class = t["train_per_class"];
    c.test_per_class = t["test_per_class"];
    c.shape = to_shape(t["shape"]);
    c.blobs_per_pattern = t["blobs_per_pattern"];
    c.group_weight = t["group_weight"];
    c.amplitude = t["amplitude"];
    c.distractor_max = t["distractor_max"];
    c.noise = t["noise"];
    c.max_shift = t["max_shift"];
    Rng rng(t["seed"].get<std::uint64_t>(), "toy-data");
    data = make_toy_dataset(c, rng);
    if (d["split"] == "train") data = data.split(Split::train);
    if (d["split"] == "test") data = data.split(Split::test);
  } else {
    DataSource s;
    s.format = source == "idx" ? DataFormat::idx : DataFormat::csv;
    s.images = d["images"].get<std::string>();
    if (d.contains("labels")) s.labels = d["labels"].get<std::string>();
    s.classes = d["classes"];
    if (d.contains("shape")) s.shape = to_shape(d["shape"]);
    data = load_dataset(s);
  }
  const int limit = d["limit"];
  if (limit > 0 && limit < data.size()) {
    std::vector<int> rows(static_cast<std::size_t>(limit));
    for (int i = 0; i < limit; ++i) rows[static_cast<std::size_t>(i)] = i;
    data = data.subset(rows);
  }
  return data;
}

face::IdentityData load_identities(const Json& f) {
  face::IdentityDataConfig c;
  c.shape = to_shape(f["shape"]);
  c.template_amplitude = f["template_amplitude"];
  c.identity_amplitude = f["identity_amplitude"];
  c.identity_blobs = f["identity_blobs"];
  c.brightness_jitter = f["brightness_jitter"];
  c.noise = f["noise"];
  c.max_shift = f["max_shift"];
  c.pairs_per_kind = f["pairs_per_kind"];
  c.families = f["families"];
  c.family_weight = f["family_weight"];
  Rng rng(f["seed"].get<std::uint64_t>(), "identities");
  return face::build_toy_identity_dataset(f["identities"], f["per_identity"], rng, c);
}

training::TrainConfig train_config(const Json& t, std::uint64_t seed) {
  training::TrainConfig c;
  c.epochs = t["epochs"];
  c.batch_size = t["batch_size"];
  c.learning_rate = t["learning_rate"];
  c.decay_epochs = t["decay_epochs"].get<std::vector<int>>();
  c.decay_factor = t["decay_factor"];
  c.weight_decay = t["weight_decay"];
  c.momentum = t["momentum"];
  if (t.contains("mix")) c.mix = augment::parse_mix_kind(t["mix"]);
  if (t.contains("alpha")) c.alpha = t["alpha"];
  if (t.contains("cutout_side")) c.cutout_side = t["cutout_side"];
  if (t.contains("label")) c.label = labeling::parse_label_kind(t["label"]);
  if (t.contains("gamma")) c.gamma = t["gamma"];
  if (t.contains("temperature")) c.temperature = t["temperature"];
  c.flip = t["flip"];
  c.crop_pad = t["crop_pad"];
  c.rescale_prob = t["rescale_prob"];
  c.seed = seed;
  return c;
}

eval::AttackSpec attack_spec(const Json& a) {
  eval::AttackSpec s;
  s.optimizer = eval::parse_optimizer(a["optimizer"]);
  s.config.epsilon = a["epsilon"];
  s.config.beta = a["beta"];
  s.config.mu = a["mu"];
  s.config.iterations = a["iterations"];
  s.config.transform_prob = a["transform_prob"];
  if (a.contains("objective")) s.config.objective = attacks::parse_objective(a["objective"]);
  s.config.diversity = a["diversity"];
  s.config.fusion = a["fusion"] == "logits" ? attacks::Fusion::logits : attacks::Fusion::probabilities;
  s.config.diversity_min_ratio = a["diversity_min_ratio"];
  return s;
}

std::vector<std::uint64_t> seed_list(const Json& j) { return j.get<std::vector<std::uint64_t>>(); }

/// Owns every loaded model so the non-owning views stay valid.
struct ModelStore {
  std::vector<std::unique_ptr<Model>> models;

  const Model* load(const Json& path, std::optional<int> classes = std::nullopt) {
    models.push_back(std::make_unique<Model>(load_checkpoint(path.get<std::string>(), classes)));
    return models.back().get();
  }
};

std::vector<eval::Surrogate> load_surrogates(const Json& list, ModelStore& store, std::optional<int> classes) {
  std::vector<eval::Surrogate> out;
  for (const auto& s : list) {
    eval::Surrogate sur{s["id"], {}};
    for (const auto& m : s["members"]) sur.members.push_back(store.load(m["checkpoint"], classes));
    out.push_back(std::move(sur));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Outputs {
  fs::path dir;
  std::vector<fs::path> artifacts;  // fingerprinted in the manifest
  std::vector<fs::path> logs;       // carry wall times, listed but not fingerprinted

  fs::path artifact(const std::string& name) {
    artifacts.push_back(name);
    return dir / name;
  }
  fs::path log(const std::string& name) {
    logs.push_back(name);
    return dir / name;
  }
};

void write_manifest(Command command, const Json& resolved, const Outputs& out) {
  Json m;
  m["manifest_version"] = 1;
  m["command"] = to_string(command);
  m["config"] = resolved;
  m["artifacts"] = Json::array();
  for (const auto& a : out.artifacts) {
    const fs::path p = out.dir / a;
    m["artifacts"].push_back({{"path", a.generic_string()}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  m["logs"] = Json::array();
  for (const auto& l : out.logs) m["logs"].push_back(l.generic_string());
  write_text(out.dir / "manifest.json", m.dump(2) + "\n");
}

void save_train_log(Outputs& out, const training::TrainLog& log) { write_text(out.log("train_log.jsonl"), log.to_jsonl()); }

// ---- commands ----

void cmd_train(const Json& cfg, Outputs& out, bool distill) {
  const Dataset data = load_data(cfg["data"]);
  const std::uint64_t seed = cfg["seed"];
  Rng init(seed, "init");
  Model model = make_model(cfg["model"]["arch"], data.shape(), data.classes(), init);
  const training::TrainConfig tc = train_config(cfg["train"], seed);
  training::TrainLog log;
  if (distill) {
    const Model teacher = load_checkpoint(cfg["teacher"]["checkpoint"].get<std::string>(), data.classes());
    log = training::train_dsm(model, &teacher, data, tc);
  } else if (const double eps_r = cfg["train"]["eps_r"]; eps_r > 0.0) {
    log = training::train_slightly_robust(model, data, tc, eps_r);
  } else {
    log = training::train_normal(model, data, tc);
  }
  save_checkpoint(model, out.artifact("model.ckpt"));
  save_train_log(out, log);
  std::cout << to_string(distill ? Command::distill : Command::train) << ": " << log.epochs.size()
            << " epochs, training accuracy "
            << (log.epochs.empty() || !log.epochs.back().train_accuracy
                    ? std::string("n/a (labels unread)")
                    : fmt(*log.epochs.back().train_accuracy))
            << "\n";
}

void cmd_attack(const Json& cfg, Outputs& out) {
  const Dataset data = load_data(cfg["data"]);
  ModelStore store;
  const auto surrogates = load_surrogates(cfg["surrogates"], store, data.classes());
  const eval::AttackSpec spec = attack_spec(cfg["attack"]);
  const std::uint64_t seed = cfg["seed"];
  const auto& labels = data.all_labels();
  const bool targeted = spec.config.objective == attacks::Objective::targeted_ce ||
                        spec.config.objective == attacks::Objective::targeted_logit;
  const attacks::AttackTargets targets{targeted ? eval::draw_targets(labels, data.classes(), seed) : labels,
                                       std::nullopt};
  save_idx_labels(out.artifact("labels.idx"), labels);
  if (targeted) save_idx_labels(out.artifact("targets.idx"), targets.labels);

  Json summary = Json::array();
  for (const auto& s : surrogates) {
    Rng rng(seed, "attack");
    const ImageBatch adv = eval::craft(s, data.images(), targets, spec, rng).adversarial;
    save_idx_images_float(out.artifact("adversarial_" + s.id + ".idx"), adv);
    const double linf = max_abs_diff(adv.pixels(), data.images().pixels());
    int hits = 0;
    for (const Model* m : s.members) {
      const auto pred = training::predict(*m, adv.pixels());
      for (std::size_t i = 0; i < pred.size(); ++i) hits += targeted ? pred[i] == targets.labels[i] : pred[i] != labels[i];
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(labels.size() * s.members.size());
    summary.push_back({{"surrogate", s.id}, {"member_success", rate}, {"max_linf", linf}, {"samples", data.size()}});
    std::cout << "attack: " << s.id << " white-box success " << fmt(rate) << "\n";
  }
  write_text(out.artifact("summary.json"), summary.dump(2) + "\n");
}

std::vector<eval::Bar> transfer_bars(const eval::TransferReport& r) {
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& c : r.cells) {
    if (c.victim == eval::kWhiteBox) continue;
    const auto key = std::make_pair(c.surrogate, c.optimizer + (c.objective == "untargeted_ce" ? "" : "/" + c.objective));
    if (!acc.contains(key)) order.push_back(key);
    acc[key].first += c.success_rate();
    acc[key].second += 1;
  }
  std::vector<eval::Bar> bars;
  for (const auto& k : order) bars.push_back({k.first + " " + k.second, acc[k].first / acc[k].second});
  return bars;
}

void emit_reports(const eval::TransferReport& r, Outputs& out, const std::string& title) {
  eval::emit_report(r, out.artifact("report.csv"), eval::ReportFormat::csv);
  eval::emit_report(r, out.artifact("report.json"), eval::ReportFormat::json);
  const auto bars = transfer_bars(r);
  if (!bars.empty()) eval::emit_bar_chart(out.artifact("transfer.svg"), bars, title, "mean transfer success");
  for (const auto& b : bars) std::cout << "  " << b.label << ": " << fmt(b.value) << "\n";
}

void cmd_eval(const Json& cfg, Outputs& out) {
  const Dataset data = load_data(cfg["data"]);
  ModelStore store;
  const auto surrogates = load_surrogates(cfg["surrogates"], store, data.classes());
  std::vector<eval::VictimOracle> victims;
  for (const auto& v : cfg["victims"]) victims.emplace_back(v["id"], *store.load(v["checkpoint"], data.classes()));
  std::vector<eval::AttackSpec> specs;
  for (const auto& a : cfg["attacks"]) specs.push_back(attack_spec(a));
  const auto seeds = seed_list(cfg["seeds"]);
  const auto report = eval::run_matrix(surrogates, victims, data, specs, seeds);
  std::cout << "eval: " << report.cells.size() << " cells\n";
  emit_reports(report, out, "Mean transfer success");
}

void cmd_sweep(const Json& cfg, Outputs& out) {
  const Dataset train = load_data(cfg["data"]);
  const Dataset held_out = load_data(cfg["eval_data"]);
  if (train.classes() != held_out.classes()) throw std::runtime_error("sweep-alpha: data and eval_data class counts differ");
  ModelStore store;
  const Model* teacher = store.load(cfg["teacher"]["checkpoint"], train.classes());
  eval::SweepSetup setup;
  setup.teacher = teacher;
  setup.student_architecture = cfg["model"]["arch"];
  setup.train = &train;
  setup.eval = &held_out;
  for (const auto& v : cfg["victims"]) setup.victims.emplace_back(v["id"], *store.load(v["checkpoint"], train.classes()));
  setup.train_config = train_config(cfg["train"], cfg["seed"]);
  setup.attack = attack_spec(cfg["attack"]);
  const auto alphas = cfg["alphas"].get<std::vector<double>>();
  const auto seeds = seed_list(cfg["seeds"]);
  const auto points = eval::sweep_alpha(setup, alphas, seeds);

  std::string csv = "alpha,seed,success\n";
  eval::Series series{"cutmix-dsm", {}};
  for (double alpha : alphas) {
    double sum = 0.0;
    int n = 0;
    for (const auto& p : points) {
      if (p.alpha != alpha) continue;
      csv += fmt(p.alpha) + "," + std::to_string(p.seed) + "," + fmt(p.success) + "\n";
      sum += p.success;
      ++n;
    }
    series.points.emplace_back(alpha, sum / n);
    std::cout << "sweep-alpha: alpha " << fmt(alpha) << " mean success " << fmt(sum / n) << "\n";
  }
  write_text(out.artifact("sweep.csv"), csv);
  eval::emit_line_plot(out.artifact("sweep.svg"), std::span(&series, 1), "CutMix dark surrogate", "alpha",
                       "mean transfer success", true);
}

void cmd_face_train(const Json& cfg, Outputs& out) {
  const auto ids = load_identities(cfg["face"]);
  const std::uint64_t seed = cfg["seed"];
  Rng init(seed, "init");
  Model model = make_model(cfg["model"]["arch"], ids.data.shape(), ids.data.classes(), init);
  const face::MarginLossConfig margin{face::parse_margin_kind(cfg["face"]["loss"]), cfg["face"]["scale"],
                                      cfg["face"]["margin"]};
  const auto log =
      face::train_face_classifier(model, ids.data.split(Split::train), margin, train_config(cfg["train"], seed));
  const auto t = face::calibrate_threshold(model, ids.data, ids.protocol);
  const double acc = face::verification_accuracy(model, ids.data, ids.protocol.evaluation, t.tau);
  save_checkpoint(model, out.artifact("model.ckpt"));
  face::save_protocol(out.artifact("pairs.txt"), ids.protocol, ids.data);
  write_text(out.artifact("verifier.json"),
             Json{{"tau", t.tau}, {"eer", t.eer}, {"verification_accuracy", acc}}.dump(2) + "\n");
  save_train_log(out, log);
  std::cout << "face-train: tau " << fmt(t.tau) << ", calibration EER " << fmt(t.eer) << ", evaluation accuracy "
            << fmt(acc) << "\n";
}

void cmd_face_attack(const Json& cfg, Outputs& out) {
  const auto ids = load_identities(cfg["face"]);
  ModelStore store;
  std::vector<face::FaceSurrogate> surrogates;
  for (const auto& s : cfg["surrogates"]) {
    face::FaceSurrogate f{s["id"], {}};
    for (const auto& m : s["members"]) f.members.push_back(store.load(m["checkpoint"]));
    surrogates.push_back(std::move(f));
  }
  std::vector<face::FaceVictim> victims;
  for (const auto& v : cfg["victims"]) {
    const Model* m = store.load(v["checkpoint"]);
    victims.push_back({v["id"], m, face::calibrate_threshold(*m, ids.data, ids.protocol).tau});
  }
  const auto spec = attack_spec(cfg["attack"]);
  const auto seeds = seed_list(cfg["seeds"]);
  eval::TransferReport report;
  report.cells = face::run_face_matrix(surrogates, victims, ids.data, ids.protocol, spec.config, seeds);
  Json snap;
  snap["face"] = cfg["face"];
  snap["attack"] = cfg["attack"];
  snap["seeds"] = cfg["seeds"];
  report.config_snapshot = snap.dump();
  for (const auto& v : victims) report.clean_accuracy[v.id] = face::verification_accuracy(*v.model, ids.data, ids.protocol.evaluation, v.tau);
  std::cout << "face-attack: " << report.cells.size() << " cells\n";
  emit_reports(report, out, "Face transfer success");
}

void cmd_report(const Json& cfg, Outputs& out) {
  std::ifstream in(cfg["report"]["input"].get<std::string>(), std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto report = eval::parse_report_csv(ss.str());
  const bool json = cfg["report"]["format"] == "json";
  eval::emit_report(report, out.artifact(json ? "report.json" : "report.csv"),
                    json ? eval::ReportFormat::json : eval::ReportFormat::csv);
  const auto bars = transfer_bars(report);
  if (!bars.empty()) eval::emit_bar_chart(out.artifact("chart.svg"), bars, cfg["report"]["title"], "mean transfer success");
  for (const auto& b : bars) std::cout << "  " << b.label << ": " << fmt(b.value) << "\n";
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[digest[i] >> 4];
    s += hex[digest[i] & 15];
  }
  return s;
}

std::vector<fs::path> run_command(Command command, const Json& resolved) {
  Outputs out{resolved["out_dir"].get<std::string>(), {}, {}};
  fs::create_directories(out.dir);
  switch (command) {
    case Command::train: cmd_train(resolved, out, false); break;
    case Command::distill: cmd_train(resolved, out, true); break;
    case Command::attack: cmd_attack(resolved, out); break;
    case Command::eval: cmd_eval(resolved, out); break;
    case Command::sweep_alpha: cmd_sweep(resolved, out); break;
    case Command::face_train: cmd_face_train(resolved, out); break;
    case Command::face_attack: cmd_face_attack(resolved, out); break;
    case Command::report: cmd_report(resolved, out); break;
  }
  write_manifest(command, resolved, out);
  return out.artifacts;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Dark-surrogate transfer attacks: training, attacks and evaluation"};
  app.require_subcommand(1);
  struct Args {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, objective, optimizer;
  };
  std::map<std::string, Args> args;
  const std::map<std::string, std::string> help{
      {"train", "train a model on one-hot labels (optionally adversarially)"},
      {"distill", "train a dark surrogate from a teacher checkpoint"},
      {"attack", "craft adversarial examples on one or more surrogates"},
      {"eval", "run the surrogate x victim x attack x seed transfer matrix"},
      {"sweep-alpha", "CutMix dark surrogates across Beta(alpha, alpha)"},
      {"face-train", "train a face embedder on toy identities"},
      {"face-attack", "dodging and impersonation transfer on toy identities"},
      {"report", "re-emit a CSV report as CSV or JSON with a chart"}};
  for (const auto& [name, text] : help) {
    auto& a = args[name];
    CLI::App* sub = app.add_subcommand(name, text);
    sub->add_option("--config", a.config, "JSON config, or a manifest from an earlier run")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "global seed");
    sub->add_option("--out", a.out, std::string("output directory (else $") + kOutDirEnv + " or out_dir)");
    if (name == "attack" || name == "eval" || name == "sweep-alpha") {
      sub->add_option("--objective", a.objective, "untargeted_ce | targeted_ce | targeted_logit");
      sub->add_option("--optimizer", a.optimizer, "fgsm | mi_fgsm | mdi2_fgsm");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const Command command = parse_command(name);
  const Args& a = args[name];
  try {
    const Json doc = load_config_file(a.config, command);
    const Json resolved = resolve_config(command, doc, {a.seed, a.out, a.objective, a.optimizer});
    run_command(command, resolved);
    std::cout << name << ": wrote " << resolved["out_dir"].get<std::string>() << "/manifest.json\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << name << " failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dsm::cli
