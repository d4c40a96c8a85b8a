#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/gradient.hpp"
#include "dsm/model.hpp"
#include "dsm/rng.hpp"

namespace dsm::attacks {

enum class Objective { untargeted_ce, targeted_ce, targeted_logit, embedding_dodge, embedding_impersonate };

Objective parse_objective(const std::string& name);
std::string to_string(Objective objective);
/// +1 when the attack ascends the objective's loss, -1 when it descends it.
int ascent_sign(Objective objective);
bool is_embedding_objective(Objective objective);

/// How an ensemble combines member outputs before the loss.
enum class Fusion { logits, probabilities };

struct AttackConfig {
  double epsilon = 16.0 / 255.0;
  double beta = 2.0 / 255.0;
  double mu = 1.0;
  int iterations = 10;
  double transform_prob = 0.7;
  Objective objective = Objective::untargeted_ce;
  bool diversity = true;
  Fusion fusion = Fusion::logits;
  double diversity_min_ratio = 0.75;

  void validate() const;
};

/// What the attack aims at: true labels (untargeted), target labels (targeted),
/// or reference images whose embeddings the similarity is measured against.
struct AttackTargets {
  std::vector<int> labels;
  std::optional<ImageBatch> reference;
};

struct AdvResult {
  ImageBatch adversarial;
  std::vector<std::vector<double>> grad_norm_trace;  ///< [sample][iteration] L1 norm of the raw gradient
  int iterations = 0;
};

using Ensemble = std::span<const Model* const>;

/// Elementwise clamp to [x - eps, x + eps] intersected with [0, 1].
Tensor clip_project(const Tensor& x_adv, const Tensor& x_orig, double epsilon);
ImageBatch clip_project(const ImageBatch& x_adv, const ImageBatch& x_orig, double epsilon);

/// Gradient of the fused objective over the ensemble members with respect to x.
InputGradient ensemble_gradient(Ensemble models, const Tensor& x, Objective objective, const AttackTargets& targets,
                                Fusion fusion = Fusion::logits);

/// One signed step of size epsilon on the untargeted cross-entropy, clamped to [0, 1].
AdvResult fgsm(const Model& model, const ImageBatch& x, std::span<const int> labels, double epsilon);

/// Momentum iterative sign method (no input transformation).
AdvResult mi_fgsm(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg);
AdvResult mi_fgsm(const Model& model, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg);

/// One random resize-and-pad draw per sample; `side` == height means identity.
struct DiversityDraw {
  bool apply = false;
  int side = 0;
  int top = 0;
  int left = 0;
};

/// Source pixel index (or -1 for padding) of every output pixel of a batch.
class DiversityMap {
public:
  DiversityMap(ImageShape shape, std::span<const DiversityDraw> draws);

  Tensor apply(const Tensor& x) const;
  /// Adjoint of apply: scatters an output gradient back onto the input pixels.
  Tensor adjoint(const Tensor& grad_out) const;
  bool identity() const noexcept { return identity_; }

private:
  ImageShape shape_;
  std::vector<std::vector<int>> source_;  // per sample, empty when untouched
  bool identity_ = true;
};

std::vector<DiversityDraw> draw_diversity(int count, ImageShape shape, double transform_prob, Rng& rng,
                                          double min_ratio = 0.75);

/// With probability p_t per sample: nearest-neighbour resize to a random side in
/// [ceil(0.75 h), h] and zero-pad back to h x w at a random offset.
ImageBatch input_diversity(const ImageBatch& x, double transform_prob, Rng& rng);

/// Momentum diverse-inputs method: mi_fgsm with each gradient taken at a
/// randomly transformed copy of the current iterate.
AdvResult mdi2_fgsm(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg, Rng& rng);
AdvResult mdi2_fgsm(const Model& model, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg,
                    Rng& rng);

/// Raw target logit per sample and its input gradient.
InputGradient targeted_logit_loss(const Model& model, const Tensor& x, std::span<const int> targets);

/// One shared perturbation against the fused ensemble loss; uses the diverse-input
/// scheme when cfg.diversity is set, plain momentum iteration otherwise.
AdvResult ensemble_attack(Ensemble models, const ImageBatch& x, const AttackTargets& targets, const AttackConfig& cfg,
                          Rng& rng);

}  // namespace dsm::attacks
