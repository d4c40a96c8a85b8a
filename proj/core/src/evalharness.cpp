#include "dsm/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dsm/training.hpp"

namespace dsm::eval {

std::vector<int> VictimOracle::predict(const ImageBatch& x) const { return training::predict(*model_, x.pixels()); }

namespace {

void check_batch(const ImageBatch& x, std::size_t labels, const char* what) {
  if (static_cast<std::size_t>(x.count()) != labels)
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(x.count()) + " images but " +
                                std::to_string(labels) + " labels");
}

}  // namespace

std::vector<bool> untargeted_success(const VictimOracle& victim, const ImageBatch& x_adv, std::span<const int> labels) {
  check_batch(x_adv, labels.size(), "untargeted_success");
  const auto pred = victim.predict(x_adv);
  std::vector<bool> hits(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) hits[i] = pred[i] != labels[i];
  return hits;
}

std::vector<bool> targeted_success(const VictimOracle& victim, const ImageBatch& x_adv, std::span<const int> targets) {
  check_batch(x_adv, targets.size(), "targeted_success");
  for (int t : targets)
    if (t < 0 || t >= victim.classes())
      throw std::out_of_range("targeted_success: target class " + std::to_string(t) + " outside [0, " +
                              std::to_string(victim.classes()) + ")");
  const auto pred = victim.predict(x_adv);
  std::vector<bool> hits(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) hits[i] = pred[i] == targets[i];
  return hits;
}

double success_rate(const std::vector<bool>& hits) {
  if (hits.empty()) return 0.0;
  return static_cast<double>(std::count(hits.begin(), hits.end(), true)) / static_cast<double>(hits.size());
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "fgsm") return Optimizer::fgsm;
  if (name == "mi_fgsm") return Optimizer::mi_fgsm;
  if (name == "mdi2_fgsm") return Optimizer::mdi2_fgsm;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected fgsm, mi_fgsm or mdi2_fgsm)");
}

std::string to_string(Optimizer optimizer) {
  switch (optimizer) {
    case Optimizer::fgsm: return "fgsm";
    case Optimizer::mi_fgsm: return "mi_fgsm";
    case Optimizer::mdi2_fgsm: return "mdi2_fgsm";
  }
  return "fgsm";
}

double TransferReport::mean_transfer(const std::string& surrogate, const std::string& optimizer) const {
  double sum = 0.0;
  int count = 0;
  for (const Cell& c : cells) {
    if (c.victim == kWhiteBox) continue;
    if (!surrogate.empty() && c.surrogate != surrogate) continue;
    if (!optimizer.empty() && c.optimizer != optimizer) continue;
    sum += c.success_rate();
    ++count;
  }
  if (count == 0) throw std::invalid_argument("mean_transfer: no cells for surrogate '" + surrogate + "'");
  return sum / count;
}

namespace {

bool is_targeted(attacks::Objective o) {
  return o == attacks::Objective::targeted_ce || o == attacks::Objective::targeted_logit;
}

// argmax of the member-averaged logits
std::vector<int> fused_predict(const Surrogate& s, const ImageBatch& x) {
  Tensor sum;
  for (const Model* m : s.members) {
    const Tensor logits = m->logits(x.pixels());
    if (sum.size() == 0) {
      sum = logits;
    } else {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += logits[i];
    }
  }
  return argmax_rows(sum);
}

nlohmann::ordered_json attack_json(const AttackSpec& a) {
  nlohmann::ordered_json j;
  j["optimizer"] = to_string(a.optimizer);
  j["objective"] = attacks::to_string(a.config.objective);
  j["epsilon"] = a.config.epsilon;
  j["beta"] = a.config.beta;
  j["mu"] = a.config.mu;
  j["N"] = a.config.iterations;
  j["transform_prob"] = a.config.transform_prob;
  j["fusion"] = a.config.fusion == attacks::Fusion::logits ? "logits" : "probabilities";
  return j;
}

}  // namespace

attacks::AdvResult craft(const Surrogate& s, const ImageBatch& x, const attacks::AttackTargets& targets,
                         const AttackSpec& spec, Rng& rng) {
  const attacks::Ensemble members(s.members);
  attacks::AttackConfig cfg = spec.config;
  switch (spec.optimizer) {
    case Optimizer::fgsm:
      if (members.size() == 1 && cfg.objective == attacks::Objective::untargeted_ce)
        return attacks::fgsm(*members[0], x, targets.labels, cfg.epsilon);
      // the single-step special case of the momentum method
      cfg.mu = 0.0;
      cfg.iterations = 1;
      cfg.beta = cfg.epsilon;
      return attacks::mi_fgsm(members, x, targets, cfg);
    case Optimizer::mi_fgsm:
      return attacks::mi_fgsm(members, x, targets, cfg);
    case Optimizer::mdi2_fgsm:
      return attacks::mdi2_fgsm(members, x, targets, cfg, rng);
  }
  throw std::logic_error("unreachable optimizer");
}

std::vector<int> draw_targets(std::span<const int> labels, int classes, std::uint64_t seed) {
  Rng rng(seed, "targets");
  std::vector<int> out;
  out.reserve(labels.size());
  for (int y : labels) {
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes - 1)));
    if (t >= y) ++t;
    out.push_back(t);
  }
  return out;
}

TransferReport run_matrix(std::span<const Surrogate> surrogates, std::span<const VictimOracle> victims,
                          const Dataset& eval, std::span<const AttackSpec> attack_specs,
                          std::span<const std::uint64_t> seeds) {
  if (surrogates.empty() || victims.empty() || attack_specs.empty() || seeds.empty())
    throw std::invalid_argument("run_matrix: empty grid (need surrogates, victims, attacks and seeds)");
  const int classes = eval.classes();
  for (const Surrogate& s : surrogates) {
    if (s.members.empty()) throw std::invalid_argument("run_matrix: surrogate '" + s.id + "' has no models");
    for (const Model* m : s.members)
      if (m->class_count() != classes)
        throw std::invalid_argument("run_matrix: surrogate '" + s.id + "' predicts " + std::to_string(m->class_count()) +
                                    " classes, dataset has " + std::to_string(classes));
  }
  for (const VictimOracle& v : victims)
    if (v.classes() != classes)
      throw std::invalid_argument("run_matrix: victim '" + v.id() + "' predicts " + std::to_string(v.classes()) +
                                  " classes, dataset has " + std::to_string(classes));
  for (const AttackSpec& a : attack_specs) {
    a.config.validate();
    if (attacks::is_embedding_objective(a.config.objective))
      throw std::invalid_argument("run_matrix: embedding objectives belong to the face pipeline");
  }

  const ImageBatch& x = eval.images();
  const std::vector<int>& labels = eval.all_labels();
  TransferReport report;
  for (const VictimOracle& v : victims) {
    const auto hits = untargeted_success(v, x, labels);
    report.clean_accuracy[v.id()] = 1.0 - success_rate(hits);
  }

  for (const Surrogate& s : surrogates)
    for (const AttackSpec& a : attack_specs)
      for (std::uint64_t seed : seeds) {
        const bool targeted = is_targeted(a.config.objective);
        attacks::AttackTargets targets{targeted ? draw_targets(labels, classes, seed) : labels, std::nullopt};
        Rng rng(seed, "attack");
        const ImageBatch adv = craft(s, x, targets, a, rng).adversarial;

        auto cell = [&](const std::string& victim, const std::vector<int>& pred) {
          Cell c{s.id, victim, to_string(a.optimizer), attacks::to_string(a.config.objective), a.config.epsilon,
                 a.optimizer == Optimizer::fgsm ? 1 : a.config.iterations, seed, 0, static_cast<int>(pred.size())};
          for (std::size_t i = 0; i < pred.size(); ++i)
            c.successes += targeted ? pred[i] == targets.labels[i] : pred[i] != labels[i];
          report.cells.push_back(std::move(c));
        };
        cell(kWhiteBox, fused_predict(s, adv));
        for (const VictimOracle& v : victims) cell(v.id(), v.predict(adv));
      }

  nlohmann::ordered_json snap;
  snap["surrogates"] = nlohmann::ordered_json::array();
  for (const Surrogate& s : surrogates) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["members"] = nlohmann::ordered_json::array();
    for (const Model* m : s.members) j["members"].push_back(m->architecture_id());
    snap["surrogates"].push_back(j);
  }
  snap["victims"] = nlohmann::ordered_json::array();
  for (const VictimOracle& v : victims) snap["victims"].push_back(v.id());
  snap["attacks"] = nlohmann::ordered_json::array();
  for (const AttackSpec& a : attack_specs) snap["attacks"].push_back(attack_json(a));
  snap["seeds"] = std::vector<std::uint64_t>(seeds.begin(), seeds.end());
  snap["samples"] = eval.size();
  report.config_snapshot = snap.dump();
  return report;
}

std::vector<CurvePoint> sweep_alpha(const SweepSetup& setup, std::span<const double> alphas,
                                    std::span<const std::uint64_t> seeds) {
  if (alphas.empty()) throw std::invalid_argument("sweep_alpha: no alpha values");
  if (seeds.empty()) throw std::invalid_argument("sweep_alpha: no seeds");
  if (setup.teacher == nullptr || setup.train == nullptr || setup.eval == nullptr)
    throw std::invalid_argument("sweep_alpha: teacher, training set and evaluation set are required");
  std::vector<CurvePoint> points;
  for (double alpha : alphas)
    for (std::uint64_t seed : seeds) {
      Rng init(seed, "sweep-student");
      Model student = make_model(setup.student_architecture, setup.train->shape(), setup.train->classes(), init);
      training::TrainConfig cfg = setup.train_config;
      cfg.mix = augment::MixKind::cutmix;
      cfg.label = labeling::LabelKind::dark;
      cfg.alpha = alpha;
      cfg.seed = seed;
      training::train_dsm(student, setup.teacher, *setup.train, cfg);
      const Surrogate s{"cutmix-dsm", {&student}};
      const std::uint64_t one[] = {seed};
      const AttackSpec spec[] = {setup.attack};
      const TransferReport r = run_matrix({&s, 1}, setup.victims, *setup.eval, spec, one);
      points.push_back({alpha, seed, r.mean_transfer(s.id)});
    }
  return points;
}

// ---- reports ----

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kCsvHeader = "surrogate,victim,optimizer,objective,epsilon,N,seed,success_rate,samples";

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\"") != std::string::npos)
    throw std::invalid_argument("report field '" + s + "' contains a comma, quote or newline");
}

}  // namespace

std::string report_csv(const TransferReport& report) {
  if (report.cells.empty()) throw std::invalid_argument("report: empty grid");
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const Cell& c : report.cells) {
    for (const std::string* f : {&c.surrogate, &c.victim, &c.optimizer, &c.objective}) check_field(*f);
    os << c.surrogate << ',' << c.victim << ',' << c.optimizer << ',' << c.objective << ','
       << format_double(c.epsilon) << ',' << c.iterations << ',' << c.seed << ',' << format_double(c.success_rate())
       << ',' << c.samples << '\n';
  }
  return os.str();
}

TransferReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("report CSV: unexpected header");
  TransferReport report;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 9) throw std::invalid_argument("report CSV line " + std::to_string(line_no) + ": expected 9 fields");
    Cell c;
    try {
      c.surrogate = f[0];
      c.victim = f[1];
      c.optimizer = f[2];
      c.objective = f[3];
      c.epsilon = std::stod(f[4]);
      c.iterations = std::stoi(f[5]);
      c.seed = std::stoull(f[6]);
      const double rate = std::stod(f[7]);
      c.samples = std::stoi(f[8]);
      c.successes = static_cast<int>(std::lround(rate * c.samples));
    } catch (const std::exception&) {
      throw std::invalid_argument("report CSV line " + std::to_string(line_no) + ": malformed number");
    }
    report.cells.push_back(std::move(c));
  }
  return report;
}

std::string report_json(const TransferReport& report) {
  if (report.cells.empty()) throw std::invalid_argument("report: empty grid");
  nlohmann::ordered_json j;
  j["config"] = report.config_snapshot.empty() ? nlohmann::ordered_json::object()
                                               : nlohmann::ordered_json::parse(report.config_snapshot);
  j["clean_accuracy"] = nlohmann::ordered_json::object();
  for (const auto& [victim, acc] : report.clean_accuracy) j["clean_accuracy"][victim] = acc;
  j["cells"] = nlohmann::ordered_json::array();
  for (const Cell& c : report.cells) {
    nlohmann::ordered_json r;
    r["surrogate"] = c.surrogate;
    r["victim"] = c.victim;
    r["optimizer"] = c.optimizer;
    r["objective"] = c.objective;
    r["epsilon"] = c.epsilon;
    r["N"] = c.iterations;
    r["seed"] = c.seed;
    r["success_rate"] = c.success_rate();
    r["successes"] = c.successes;
    r["samples"] = c.samples;
    j["cells"].push_back(r);
  }
  return j.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string svg_open(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
     << "</text>\n";
  return os.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void emit_report(const TransferReport& report, const std::filesystem::path& path, ReportFormat format) {
  write_text(path, format == ReportFormat::csv ? report_csv(report) : report_json(report));
}

void emit_line_plot(const std::filesystem::path& path, std::span<const Series> series, const std::string& title,
                    const std::string& x_label, const std::string& y_label, bool log_x) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const Series& s : series)
    for (const auto& [x, y] : s.points) {
      if (log_x && !(x > 0.0)) throw std::invalid_argument("emit_line_plot: log x axis needs positive x");
      const double xv = log_x ? std::log10(x) : x;
      xmin = std::min(xmin, xv);
      xmax = std::max(xmax, xv);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) throw std::invalid_argument("emit_line_plot: empty grid");
  if (xmax == xmin) xmax = xmin + 1.0, xmin -= 1.0;
  const double pad = std::max(1e-9, 0.1 * (ymax - ymin));
  ymin -= pad;
  ymax += pad;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ((log_x ? std::log10(x) : x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream os;
  os << svg_open(title);
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = ymin + (ymax - ymin) * t / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  }
  std::vector<double> xticks;
  for (const Series& s : series)
    for (const auto& p : s.points) xticks.push_back(p.first);
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  for (double x : xticks)
    os << "<text x=\"" << px(x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
     << escape_xml(x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end());
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    for (const auto& [x, y] : pts)
      os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(i) + 8;
    os << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 30 << "\" y2=\""
       << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << kWidth - kRight + 35 << "\" y=\"" << ly + 4 << "\">" << escape_xml(series[i].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  write_text(path, os.str());
}

void emit_bar_chart(const std::filesystem::path& path, std::span<const Bar> bars, const std::string& title,
                    const std::string& y_label) {
  if (bars.empty()) throw std::invalid_argument("emit_bar_chart: empty grid");
  double ymax = 0.0;
  for (const Bar& b : bars) ymax = std::max(ymax, b.value);
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.1;
  const double pw = kWidth - kLeft - 40, ph = kHeight - kTop - kBottom;
  const double slot = pw / static_cast<double>(bars.size());
  std::ostringstream os;
  os << svg_open(title);
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n";
  os << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(y_label) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = bars[i].value / ymax * ph;
    const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    os << "<rect x=\"" << x << "\" y=\"" << kTop + ph - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
       << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n"
       << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kTop + ph - h - 4 << "\" text-anchor=\"middle\">"
       << fmt(bars[i].value) << "</text>\n"
       << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
       << escape_xml(bars[i].label) << "</text>\n";
  }
  os << "</svg>\n";
  write_text(path, os.str());
}

}  // namespace dsm::eval
