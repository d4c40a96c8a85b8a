#include "dsm/faceverify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dsm/gradient.hpp"

namespace dsm::face {

Tensor embed(const Model& model, const Tensor& x) {
  if (model.embedding_dim() <= 0) throw std::invalid_argument("embed: model has no penultimate layer");
  return model.embed(x);
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: embedding dimensions differ");
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    std::cerr << "warning: cosine similarity of a zero embedding, using 0\n";
    return 0.0;
  }
  return cosine_similarity(a, b);
}

std::vector<double> pair_similarity(const Model& model, const Tensor& a, const Tensor& b) {
  if (a.dim(0) != b.dim(0)) throw std::invalid_argument("pair_similarity: batch sizes differ");
  const Tensor ea = embed(model, a);
  const Tensor eb = embed(model, b);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(a.dim(0)));
  for (int i = 0; i < a.dim(0); ++i) out.push_back(cosine_sim(ea.row(i), eb.row(i)));
  return out;
}

// ---- protocol ----

void save_protocol(const std::filesystem::path& path, const PairProtocol& protocol, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write pair protocol " + path.string());
  const auto& ids = data.images().ids();
  auto section = [&](const char* name, const std::vector<Pair>& pairs) {
    out << "# " << name << '\n';
    for (const Pair& p : pairs)
      out << ids.at(static_cast<std::size_t>(p.first)) << ',' << ids.at(static_cast<std::size_t>(p.second)) << ','
          << (p.same ? 1 : 0) << '\n';
  };
  section("calibration", protocol.calibration);
  section("evaluation", protocol.evaluation);
}

PairProtocol load_protocol(const std::filesystem::path& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read pair protocol " + path.string());
  std::map<std::string, int> row_of;
  const auto& ids = data.images().ids();
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = static_cast<int>(i);

  PairProtocol protocol;
  std::vector<Pair>* current = nullptr;
  std::set<int> calibration_ids, evaluation_ids;
  std::set<int>* current_ids = nullptr;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line == "# calibration") {
      current = &protocol.calibration;
      current_ids = &calibration_ids;
      continue;
    }
    if (line == "# evaluation") {
      current = &protocol.evaluation;
      current_ids = &evaluation_ids;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, flag;
    if (current == nullptr || !std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, flag) ||
        (flag != "0" && flag != "1"))
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed pair line");
    const auto ia = row_of.find(a), ib = row_of.find(b);
    if (ia == row_of.end() || ib == row_of.end())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": unknown sample id");
    current->push_back({ia->second, ib->second, flag == "1"});
    current_ids->insert(data.label(static_cast<std::size_t>(ia->second)));
    current_ids->insert(data.label(static_cast<std::size_t>(ib->second)));
  }
  protocol.calibration_ids.assign(calibration_ids.begin(), calibration_ids.end());
  protocol.evaluation_ids.assign(evaluation_ids.begin(), evaluation_ids.end());
  return protocol;
}

// ---- threshold ----

Threshold calibrate_threshold(std::span<const double> similarity, const std::vector<bool>& same) {
  if (similarity.size() != same.size()) throw std::invalid_argument("calibrate_threshold: size mismatch");
  const auto n_same = static_cast<std::size_t>(std::count(same.begin(), same.end(), true));
  const std::size_t n_diff = same.size() - n_same;
  if (n_same == 0 || n_diff == 0)
    throw std::invalid_argument("calibrate_threshold: calibration split needs both same and different pairs");

  std::vector<double> values(similarity.begin(), similarity.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> candidates;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) candidates.push_back(0.5 * (values[i - 1] + values[i]));
    candidates.push_back(values[i]);
  }
  candidates.push_back(std::nextafter(values.back(), std::numeric_limits<double>::infinity()));

  Threshold best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double tau : candidates) {  // ascending, so strict < keeps the lowest tie
    std::size_t false_accept = 0, false_reject = 0;
    for (std::size_t i = 0; i < same.size(); ++i) {
      const bool accept = similarity[i] >= tau;
      if (accept && !same[i]) ++false_accept;
      if (!accept && same[i]) ++false_reject;
    }
    const double far = static_cast<double>(false_accept) / static_cast<double>(n_diff);
    const double frr = static_cast<double>(false_reject) / static_cast<double>(n_same);
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best = {tau, 0.5 * (far + frr)};
    }
  }
  return best;
}

namespace {

std::vector<double> pairs_similarity(const Model& model, const Dataset& data, std::span<const Pair> pairs) {
  std::vector<int> a, b;
  for (const Pair& p : pairs) {
    a.push_back(p.first);
    b.push_back(p.second);
  }
  const Tensor& x = data.images().pixels();
  return pair_similarity(model, x.gather(a), x.gather(b));
}

}  // namespace

Threshold calibrate_threshold(const Model& model, const Dataset& data, const PairProtocol& protocol) {
  if (protocol.calibration.empty()) throw std::invalid_argument("calibrate_threshold: empty calibration split");
  std::vector<bool> same;
  for (const Pair& p : protocol.calibration) same.push_back(p.same);
  return calibrate_threshold(pairs_similarity(model, data, protocol.calibration), same);
}

double verification_accuracy(const Model& model, const Dataset& data, std::span<const Pair> pairs, double tau) {
  if (pairs.empty()) throw std::invalid_argument("verification_accuracy: no pairs");
  const auto sim = pairs_similarity(model, data, pairs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) correct += (sim[i] >= tau) == pairs[i].same;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// ---- margin losses ----

MarginKind parse_margin_kind(const std::string& name) {
  if (name == "plain_softmax") return MarginKind::plain_softmax;
  if (name == "am_softmax") return MarginKind::am_softmax;
  if (name == "aaml") return MarginKind::aaml;
  throw std::invalid_argument("unknown margin loss '" + name + "'");
}

std::string to_string(MarginKind kind) {
  switch (kind) {
    case MarginKind::plain_softmax: return "plain_softmax";
    case MarginKind::am_softmax: return "am_softmax";
    case MarginKind::aaml: return "aaml";
  }
  return "plain_softmax";
}

void MarginLossConfig::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("margin loss: scale s must be positive");
  if (!(margin >= 0.0)) throw std::invalid_argument("margin loss: margin m must be non-negative");
  if (kind == MarginKind::aaml && margin >= std::numbers::pi)
    throw std::invalid_argument("margin loss: angular margin must be below pi");
}

MarginLossConfig MarginLossConfig::defaults(MarginKind kind) {
  switch (kind) {
    case MarginKind::am_softmax: return {kind, 30.0, 0.35};
    case MarginKind::aaml: return {kind, 30.0, 0.5};
    case MarginKind::plain_softmax: break;
  }
  return {MarginKind::plain_softmax, 30.0, 0.0};
}

double cosine_margin_loss(const Tensor& embeddings, const Tensor& weight, std::span<const int> labels,
                          const MarginLossConfig& cfg, Tensor* grad_embeddings, Tensor* grad_weight) {
  cfg.validate();
  const int n = embeddings.dim(0);
  const int d = static_cast<int>(embeddings.size()) / std::max(n, 1);
  const int classes = weight.dim(0);
  if (weight.rank() != 2 || weight.dim(1) != d) throw std::invalid_argument("margin loss: weight must be (K, d)");
  if (static_cast<int>(labels.size()) != n) throw std::invalid_argument("margin loss: one label per embedding");
  if (grad_embeddings != nullptr) *grad_embeddings = Tensor::like(embeddings);
  if (grad_weight != nullptr) *grad_weight = Tensor::like(weight);

  std::vector<double> wnorm(static_cast<std::size_t>(classes));
  for (int j = 0; j < classes; ++j) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += weight.at(j, k) * weight.at(j, k);
    wnorm[static_cast<std::size_t>(j)] = std::sqrt(s);
  }
  const double cos_m = std::cos(cfg.margin), sin_m = std::sin(cfg.margin);
  const double* e_all = embeddings.values().data();

  double total = 0.0;
  std::vector<double> cosines(static_cast<std::size_t>(classes)), z(static_cast<std::size_t>(classes));
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) throw std::out_of_range("margin loss: label outside [0, K)");
    const double* e = e_all + static_cast<std::size_t>(i) * d;
    double enorm = 0.0;
    for (int k = 0; k < d; ++k) enorm += e[k] * e[k];
    enorm = std::sqrt(enorm);
    for (int j = 0; j < classes; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += e[k] * weight.at(j, k);
      const double denom = enorm * wnorm[static_cast<std::size_t>(j)];
      cosines[static_cast<std::size_t>(j)] = denom > 0.0 ? std::clamp(dot / denom, -1.0, 1.0) : 0.0;
      z[static_cast<std::size_t>(j)] = cfg.scale * cosines[static_cast<std::size_t>(j)];
    }
    const double c = cosines[static_cast<std::size_t>(y)];
    double psi = c, dpsi = 1.0;
    if (cfg.kind == MarginKind::am_softmax) {
      psi = c - cfg.margin;
    } else if (cfg.kind == MarginKind::aaml && cfg.margin > 0.0) {
      const double theta = std::acos(c);
      if (theta + cfg.margin <= std::numbers::pi / 2.0) {
        const double sin_t = std::sqrt(std::max(1.0 - c * c, 0.0));
        psi = c * cos_m - sin_t * sin_m;
        dpsi = cos_m + sin_m * c / std::max(sin_t, 1e-7);
      } else {
        psi = c - cfg.margin * sin_m;
      }
    }
    z[static_cast<std::size_t>(y)] = cfg.scale * psi;

    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    total += zmax + std::log(sum) - z[static_cast<std::size_t>(y)];

    if (grad_embeddings == nullptr && grad_weight == nullptr) continue;
    for (int j = 0; j < classes; ++j) {
      double dz = std::exp(z[static_cast<std::size_t>(j)] - zmax) / sum - (j == y ? 1.0 : 0.0);
      dz /= n;
      const double dc = dz * cfg.scale * (j == y ? dpsi : 1.0);
      const double nw = wnorm[static_cast<std::size_t>(j)];
      if (dc == 0.0 || enorm == 0.0 || nw == 0.0) continue;
      const double cj = cosines[static_cast<std::size_t>(j)];
      for (int k = 0; k < d; ++k) {
        const double w = weight.at(j, k);
        if (grad_embeddings != nullptr)
          (*grad_embeddings)[static_cast<std::size_t>(i) * d + k] += dc * (w / (enorm * nw) - cj * e[k] / (enorm * enorm));
        if (grad_weight != nullptr) grad_weight->at(j, k) += dc * (e[k] / (enorm * nw) - cj * w / (nw * nw));
      }
    }
  }
  return total / n;
}

training::TrainLog train_face_classifier(Model& model, const Dataset& data, const MarginLossConfig& margin,
                                         const training::TrainConfig& cfg) {
  margin.validate();
  if (data.classes() < 2) throw std::invalid_argument("train_face_classifier: need at least two identities");
  if (margin.kind == MarginKind::plain_softmax) return training::train_normal(model, data, cfg);

  training::TrainConfig plain = cfg;
  plain.mix = augment::MixKind::none;
  plain.label = labeling::LabelKind::one_hot;
  const training::BatchLoss loss = [margin](const Model& m, const ForwardTrace& trace, const Tensor& targets,
                                            Gradients& grads) {
    const std::vector<int> labels = argmax_rows(targets);
    const Tensor& emb = trace.embedding();
    Tensor grad_emb, grad_w;
    const double value = cosine_margin_loss(emb, m.head().weight(), labels, margin, &grad_emb, &grad_w);
    Tensor& head_w = grads[grads.size() - 2];
    for (std::size_t i = 0; i < head_w.size(); ++i) head_w[i] += grad_w[i];
    m.backward(trace, nullptr, &grad_emb, &grads);
    return value;
  };
  return training::train_with_loss(model, nullptr, data, plain, loss);
}

// ---- attacks ----

namespace {

attacks::AdvResult embedding_attack(attacks::Ensemble surrogates, const ImageBatch& x, const ImageBatch& x_ref,
                                    attacks::AttackConfig cfg, attacks::Objective objective, Rng& rng) {
  if (x.count() != x_ref.count()) throw std::invalid_argument("face attack: one reference image per input");
  cfg.objective = objective;
  const attacks::AttackTargets targets{{}, x_ref};
  return attacks::ensemble_attack(surrogates, x, targets, cfg, rng);
}

}  // namespace

attacks::AdvResult dodging_attack(attacks::Ensemble surrogates, const ImageBatch& x, const ImageBatch& x_ref,
                                  attacks::AttackConfig cfg, Rng& rng) {
  return embedding_attack(surrogates, x, x_ref, cfg, attacks::Objective::embedding_dodge, rng);
}

attacks::AdvResult dodging_attack(const Model& surrogate, const ImageBatch& x, const ImageBatch& x_ref,
                                  attacks::AttackConfig cfg, Rng& rng) {
  const Model* members[] = {&surrogate};
  return dodging_attack(members, x, x_ref, cfg, rng);
}

attacks::AdvResult impersonate_attack(attacks::Ensemble surrogates, const ImageBatch& x, const ImageBatch& x_ref,
                                      attacks::AttackConfig cfg, Rng& rng) {
  return embedding_attack(surrogates, x, x_ref, cfg, attacks::Objective::embedding_impersonate, rng);
}

attacks::AdvResult impersonate_attack(const Model& surrogate, const ImageBatch& x, const ImageBatch& x_ref,
                                      attacks::AttackConfig cfg, Rng& rng) {
  const Model* members[] = {&surrogate};
  return impersonate_attack(members, x, x_ref, cfg, rng);
}

std::vector<bool> VerificationOracle::verify(const ImageBatch& a, const ImageBatch& b) const {
  const auto sim = pair_similarity(*model_, a.pixels(), b.pixels());
  std::vector<bool> out;
  out.reserve(sim.size());
  for (double s : sim) out.push_back(s >= tau_);
  return out;
}

std::vector<eval::Cell> run_face_matrix(std::span<const FaceSurrogate> surrogates, std::span<const FaceVictim> victims,
                                        const Dataset& data, const PairProtocol& protocol,
                                        const attacks::AttackConfig& cfg, std::span<const std::uint64_t> seeds) {
  if (surrogates.empty() || seeds.empty()) throw std::invalid_argument("face matrix: empty grid");
  for (const auto& s : surrogates)
    if (s.members.empty()) throw std::invalid_argument("face matrix: surrogate " + s.id + " has no members");

  std::vector<eval::Cell> cells;
  for (const auto& surrogate : surrogates) {
    const Model& first = *surrogate.members.front();
    const double own_tau = calibrate_threshold(first, data, protocol).tau;
    for (const bool dodge : {true, false}) {
      std::vector<int> a_rows, b_rows;
      for (const auto& p : protocol.evaluation)
        if (p.same == dodge) {
          a_rows.push_back(p.first);
          b_rows.push_back(p.second);
        }
      if (a_rows.empty()) continue;
      const ImageBatch a = data.images().gather(a_rows), b = data.images().gather(b_rows);
      const auto objective = dodge ? attacks::Objective::embedding_dodge : attacks::Objective::embedding_impersonate;
      for (const std::uint64_t seed : seeds) {
        Rng rng(seed, "face-attack");
        const ImageBatch adv =
            dodge ? dodging_attack(surrogate.members, a, b, cfg, rng).adversarial
                  : impersonate_attack(surrogate.members, a, b, cfg, rng).adversarial;
        auto score = [&](const std::string& victim_id, const Model& model, double tau) {
          const auto verdict = VerificationOracle(model, tau).verify(adv, b);
          eval::Cell c;
          c.surrogate = surrogate.id;
          c.victim = victim_id;
          c.optimizer = cfg.diversity ? "mdi2_fgsm" : "mi_fgsm";
          c.objective = attacks::to_string(objective);
          c.epsilon = cfg.epsilon;
          c.iterations = cfg.iterations;
          c.seed = seed;
          c.samples = static_cast<int>(verdict.size());
          for (bool same : verdict) c.successes += dodge ? !same : same;
          cells.push_back(c);
        };
        score(eval::kWhiteBox, first, own_tau);
        for (const auto& v : victims) score(v.id, *v.model, v.tau);
      }
    }
  }
  return cells;
}

// ---- toy identities ----

namespace {

void add_blob(Tensor& img, ImageShape s, double cy, double cx, double sigma, double amp) {
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        img[(static_cast<std::size_t>(c) * s.height + y) * s.width + x] += amp * std::exp(-d2 / (2.0 * sigma * sigma));
      }
}

// template of a face: two eyes, nose, mouth, on a brighter oval
Tensor face_template(ImageShape s) {
  Tensor t({s.channels, s.height, s.width});
  const double h = s.height, w = s.width;
  add_blob(t, s, 0.5 * h, 0.5 * w, 0.33 * w, 0.6);
  add_blob(t, s, 0.35 * h, 0.3 * w, 0.07 * w, -1.0);
  add_blob(t, s, 0.35 * h, 0.7 * w, 0.07 * w, -1.0);
  add_blob(t, s, 0.55 * h, 0.5 * w, 0.06 * w, -0.5);
  add_blob(t, s, 0.75 * h, 0.5 * w, 0.09 * w, -0.8);
  return t;
}

Tensor identity_pattern(ImageShape s, int blobs, Rng& rng) {
  Tensor p({s.channels, s.height, s.width});
  for (int b = 0; b < blobs; ++b)
    add_blob(p, s, rng.uniform(2.0, s.height - 3.0), rng.uniform(2.0, s.width - 3.0), rng.uniform(0.8, 2.0),
             rng.bernoulli(0.5) ? 1.0 : -1.0);
  double peak = 0.0;
  for (double v : p.values()) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : p.values()) v /= peak;
  return p;
}

std::vector<Pair> make_pairs(const std::vector<int>& ids, const std::vector<std::vector<int>>& rows_of, int per_kind,
                             Rng& rng) {
  std::vector<Pair> same, diff;
  for (int id : ids) {
    const auto& rows = rows_of[static_cast<std::size_t>(id)];
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b) same.push_back({rows[a], rows[b], true});
  }
  const std::vector<int> order = rng.permutation(static_cast<int>(same.size()));
  std::vector<Pair> pairs;
  for (int i = 0; i < std::min(per_kind, static_cast<int>(same.size())); ++i)
    pairs.push_back(same[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);

  if (ids.size() >= 2) {
    std::set<std::pair<int, int>> used;
    const std::size_t per_id = rows_of[static_cast<std::size_t>(ids[0])].size();
    const std::size_t possible = ids.size() * (ids.size() - 1) / 2 * per_id * per_id;
    const std::size_t want = std::min(static_cast<std::size_t>(per_kind), possible);
    while (diff.size() < want) {
      const int ia = ids[rng.below(ids.size())];
      const int ib = ids[rng.below(ids.size())];
      if (ia == ib) continue;
      const auto& ra = rows_of[static_cast<std::size_t>(ia)];
      const auto& rb = rows_of[static_cast<std::size_t>(ib)];
      const Pair p{ra[rng.below(ra.size())], rb[rng.below(rb.size())], false};
      if (!used.insert({std::min(p.first, p.second), std::max(p.first, p.second)}).second) continue;
      diff.push_back(p);
    }
  }
  pairs.insert(pairs.end(), diff.begin(), diff.end());
  return pairs;
}

}  // namespace

IdentityData build_toy_identity_dataset(int n_ids, int per_id, Rng& rng, const IdentityDataConfig& cfg) {
  if (n_ids < 2) throw std::invalid_argument("build_toy_identity_dataset: need at least two identities");
  if (per_id < 2) throw std::invalid_argument("build_toy_identity_dataset: need at least two samples per identity");
  const ImageShape s = cfg.shape;
  const Tensor base = face_template(s);
  Rng id_rng = rng.fork("identities");
  std::vector<Tensor> patterns;
  for (int k = 0; k < n_ids; ++k) patterns.push_back(identity_pattern(s, cfg.identity_blobs, id_rng));
  if (cfg.families > 0) {
    if (cfg.family_weight < 0.0 || cfg.family_weight > 1.0)
      throw std::invalid_argument("build_toy_identity_dataset: family_weight outside [0, 1]");
    Rng fam_rng = rng.fork("families");
    std::vector<Tensor> family;
    for (int f = 0; f < cfg.families; ++f) family.push_back(identity_pattern(s, cfg.identity_blobs, fam_rng));
    for (int k = 0; k < n_ids; ++k) {
      const Tensor& shared = family[static_cast<std::size_t>(k % cfg.families)];
      auto own = patterns[static_cast<std::size_t>(k)].values();
      for (std::size_t i = 0; i < own.size(); ++i)
        own[i] = cfg.family_weight * shared[i] + (1.0 - cfg.family_weight) * own[i];
    }
  }

  const int total = 2 * n_ids * per_id;
  Tensor pixels({total, s.channels, s.height, s.width});
  std::vector<int> labels;
  std::vector<Split> splits;
  std::vector<std::string> names;
  std::vector<std::vector<int>> test_rows(static_cast<std::size_t>(n_ids));
  Rng sample_rng = rng.fork("samples");
  int row = 0;
  for (int split = 0; split < 2; ++split)
    for (int k = 0; k < n_ids; ++k)
      for (int j = 0; j < per_id; ++j, ++row) {
        const int dy = sample_rng.uniform_int(-cfg.max_shift, cfg.max_shift);
        const int dx = sample_rng.uniform_int(-cfg.max_shift, cfg.max_shift);
        const double brightness = sample_rng.normal(0.0, cfg.brightness_jitter);
        auto out = pixels.row(row);
        const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
        for (int c = 0; c < s.channels; ++c)
          for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
              const int sy = std::clamp(y - dy, 0, s.height - 1);
              const int sx = std::clamp(x - dx, 0, s.width - 1);
              const std::size_t src = c * plane + static_cast<std::size_t>(sy) * s.width + sx;
              const double v = 0.4 + brightness + cfg.template_amplitude * base[src] +
                               cfg.identity_amplitude * patterns[static_cast<std::size_t>(k)][src] +
                               sample_rng.normal(0.0, cfg.noise);
              out[c * plane + static_cast<std::size_t>(y) * s.width + x] = std::clamp(v, 0.0, 1.0);
            }
        labels.push_back(k);
        splits.push_back(split == 0 ? Split::train : Split::test);
        names.push_back((split == 0 ? "train-id" : "test-id") + std::to_string(k) + "-" + std::to_string(j));
        if (split == 1) test_rows[static_cast<std::size_t>(k)].push_back(row);
      }

  IdentityData result{Dataset(ImageBatch(std::move(pixels), std::move(names)), std::move(labels), n_ids, std::move(splits)),
                      {}};
  Rng pair_rng = rng.fork("pairs");
  const std::vector<int> order = pair_rng.permutation(n_ids);
  const int half = n_ids / 2;
  auto& p = result.protocol;
  p.calibration_ids.assign(order.begin(), order.begin() + half);
  p.evaluation_ids.assign(order.begin() + half, order.end());
  std::sort(p.calibration_ids.begin(), p.calibration_ids.end());
  std::sort(p.evaluation_ids.begin(), p.evaluation_ids.end());
  p.calibration = make_pairs(p.calibration_ids, test_rows, cfg.pairs_per_kind, pair_rng);
  p.evaluation = make_pairs(p.evaluation_ids, test_rows, cfg.pairs_per_kind, pair_rng);
  return result;
}

}  // namespace dsm::face
