#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsm/attacks.hpp"
#include "dsm/dataset.hpp"
#include "dsm/evalharness.hpp"
#include "dsm/model.hpp"
#include "dsm/training.hpp"

namespace dsm::face {

/// Penultimate activations, one row per image, never normalized.
Tensor embed(const Model& model, const Tensor& x);

/// a.b / (|a| |b|); 0 (with a warning on stderr) when either vector is zero.
double cosine_sim(std::span<const double> a, std::span<const double> b);

/// Row-wise cosine similarity between embed(a) and embed(b).
std::vector<double> pair_similarity(const Model& model, const Tensor& a, const Tensor& b);

struct Pair {
  int first = 0;   ///< row in the dataset
  int second = 0;
  bool same = false;
};

struct PairProtocol {
  std::vector<Pair> calibration;
  std::vector<Pair> evaluation;
  std::vector<int> calibration_ids;
  std::vector<int> evaluation_ids;

  int identity_count() const { return static_cast<int>(calibration_ids.size() + evaluation_ids.size()); }
};

/// Writes `id1_sample,id2_sample,same_flag` lines; a `# calibration` and an
/// `# evaluation` header line separate the two splits.
void save_protocol(const std::filesystem::path& path, const PairProtocol& protocol, const Dataset& data);
PairProtocol load_protocol(const std::filesystem::path& path, const Dataset& data);

struct Threshold {
  double tau = 0.0;
  double eer = 0.0;
};

/// Pairs with similarity >= tau verify as the same identity. Picks the tau that
/// balances false accepts and false rejects, ties toward the lower tau.
Threshold calibrate_threshold(std::span<const double> similarity, const std::vector<bool>& same);
Threshold calibrate_threshold(const Model& model, const Dataset& data, const PairProtocol& protocol);

/// Fraction of pairs decided correctly at tau.
double verification_accuracy(const Model& model, const Dataset& data, std::span<const Pair> pairs, double tau);

enum class MarginKind { plain_softmax, am_softmax, aaml };

MarginKind parse_margin_kind(const std::string& name);
std::string to_string(MarginKind kind);

struct MarginLossConfig {
  MarginKind kind = MarginKind::plain_softmax;
  double scale = 30.0;
  double margin = 0.0;

  void validate() const;
  /// s = 30 with m = 0.35 (AM-Softmax) or m = 0.5 (additive angular margin).
  static MarginLossConfig defaults(MarginKind kind);
};

/// Mean margin cross-entropy over cosine logits between the embeddings (n, d)
/// and the class weight rows (K, d). Gradients are written when non-null.
/// plain_softmax here means the unmargined cosine softmax s * cos(theta).
double cosine_margin_loss(const Tensor& embeddings, const Tensor& weight, std::span<const int> labels,
                          const MarginLossConfig& cfg, Tensor* grad_embeddings = nullptr,
                          Tensor* grad_weight = nullptr);

/// Plain softmax trains on the model's linear logits; the margin kinds replace
/// them with cosine logits against the head weight rows (the bias is unused).
training::TrainLog train_face_classifier(Model& model, const Dataset& data, const MarginLossConfig& margin,
                                         const training::TrainConfig& cfg);

/// Pushes embed(x') away from embed(x_ref) on the surrogate ensemble.
attacks::AdvResult dodging_attack(attacks::Ensemble surrogates, const ImageBatch& x, const ImageBatch& x_ref,
                                  attacks::AttackConfig cfg, Rng& rng);
attacks::AdvResult dodging_attack(const Model& surrogate, const ImageBatch& x, const ImageBatch& x_ref,
                                  attacks::AttackConfig cfg, Rng& rng);
/// Pulls embed(x') towards embed(x_ref).
attacks::AdvResult impersonate_attack(attacks::Ensemble surrogates, const ImageBatch& x, const ImageBatch& x_ref,
                                      attacks::AttackConfig cfg, Rng& rng);
attacks::AdvResult impersonate_attack(const Model& surrogate, const ImageBatch& x, const ImageBatch& x_ref,
                                      attacks::AttackConfig cfg, Rng& rng);

/// A black-box verifier: answers same/different at its own threshold.
class VerificationOracle {
public:
  VerificationOracle(const Model& model, double tau) : model_(&model), tau_(tau) {}

  std::vector<bool> verify(const ImageBatch& a, const ImageBatch& b) const;
  double tau() const noexcept { return tau_; }

private:
  const Model* model_;
  double tau_;
};

struct FaceSurrogate {
  std::string id;
  std::vector<const Model*> members;
};

/// A held-out verifier scored at its own calibrated threshold.
struct FaceVictim {
  std::string id;
  const Model* model = nullptr;
  double tau = 0.0;
};

/// Dodging on the same-identity evaluation pairs and impersonation on the
/// different-identity ones, per surrogate and seed. Each attack is scored on
/// every victim and, as kWhiteBox, on the surrogate's first member at that
/// member's calibrated threshold.
std::vector<eval::Cell> run_face_matrix(std::span<const FaceSurrogate> surrogates, std::span<const FaceVictim> victims,
                                        const Dataset& data, const PairProtocol& protocol,
                                        const attacks::AttackConfig& cfg, std::span<const std::uint64_t> seeds);

struct IdentityDataConfig {
  ImageShape shape{3, 16, 16};
  double template_amplitude = 0.25;  ///< shared face layout
  double identity_amplitude = 0.1;
  int identity_blobs = 4;
  double brightness_jitter = 0.01;
  double noise = 0.005;
  int max_shift = 1;
  int pairs_per_kind = 150;  ///< same and different pairs per protocol split
  int families = 0;          ///< identities sharing a family pattern; 0 disables families
  double family_weight = 0.5;  ///< share of an identity's pattern taken from its family
};

struct IdentityData {
  Dataset data;  ///< train split for classifier training, test split feeds the pairs
  PairProtocol protocol;
};

/// per_id samples of each identity in both splits; identities are split in
/// half between calibration and evaluation pairs.
IdentityData build_toy_identity_dataset(int n_ids, int per_id, Rng& rng, const IdentityDataConfig& cfg = {});

}  // namespace dsm::face
