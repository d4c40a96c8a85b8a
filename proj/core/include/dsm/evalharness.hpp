#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dsm/attacks.hpp"
#include "dsm/dataset.hpp"
#include "dsm/model.hpp"
#include "dsm/training.hpp"

namespace dsm::eval {

/// Black-box victim: answers with the predicted class and nothing else.
class VictimOracle {
public:
  VictimOracle(std::string id, const Model& model) : id_(std::move(id)), model_(&model) {}

  const std::string& id() const noexcept { return id_; }
  int classes() const noexcept { return model_->class_count(); }
  std::vector<int> predict(const ImageBatch& x) const;

private:
  std::string id_;
  const Model* model_;
};

std::vector<bool> untargeted_success(const VictimOracle& victim, const ImageBatch& x_adv, std::span<const int> labels);
/// Throws std::out_of_range for a target outside [0, K).
std::vector<bool> targeted_success(const VictimOracle& victim, const ImageBatch& x_adv, std::span<const int> targets);

double success_rate(const std::vector<bool>& hits);

enum class Optimizer { fgsm, mi_fgsm, mdi2_fgsm };

Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer optimizer);

/// A named surrogate; more than one member makes it an ensemble.
struct Surrogate {
  std::string id;
  std::vector<const Model*> members;
};

struct AttackSpec {
  Optimizer optimizer = Optimizer::mdi2_fgsm;
  attacks::AttackConfig config;
};

inline constexpr const char* kWhiteBox = "white-box";

struct Cell {
  std::string surrogate;
  std::string victim;  ///< kWhiteBox for the surrogate attacked directly
  std::string optimizer;
  std::string objective;
  double epsilon = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  int successes = 0;
  int samples = 0;

  double success_rate() const { return samples > 0 ? static_cast<double>(successes) / samples : 0.0; }
  bool operator==(const Cell&) const = default;
};

struct TransferReport {
  std::vector<Cell> cells;
  std::map<std::string, double> clean_accuracy;  ///< per victim
  std::string config_snapshot;                    ///< JSON text, may be empty

  /// Mean success over all transfer cells (white-box excluded) matching the filters; empty filters match all.
  double mean_transfer(const std::string& surrogate, const std::string& optimizer = {}) const;
};

/// Adversarial examples from one surrogate under one attack. FGSM on an
/// ensemble or a targeted objective runs as the one-step momentum method.
attacks::AdvResult craft(const Surrogate& surrogate, const ImageBatch& x, const attacks::AttackTargets& targets,
                         const AttackSpec& spec, Rng& rng);

/// One uniformly drawn wrong class per label, from the seed's "targets" stream.
std::vector<int> draw_targets(std::span<const int> labels, int classes, std::uint64_t seed);

/// Crafts adversarial examples once per surrogate x attack x seed on `eval`, then
/// scores them on every victim and on the surrogate itself. Targeted objectives
/// draw one random wrong target class per sample from the seed.
TransferReport run_matrix(std::span<const Surrogate> surrogates, std::span<const VictimOracle> victims,
                          const Dataset& eval, std::span<const AttackSpec> attacks,
                          std::span<const std::uint64_t> seeds);

/// Everything needed to train and score CutMix dark surrogates at one alpha.
struct SweepSetup {
  const Model* teacher = nullptr;
  std::string student_architecture;
  const Dataset* train = nullptr;
  const Dataset* eval = nullptr;
  std::vector<VictimOracle> victims;
  training::TrainConfig train_config;  ///< mix and label are overridden
  AttackSpec attack;
};

struct CurvePoint {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double success = 0.0;  ///< mean transfer success over the victims
};

/// One CutMix dark surrogate per alpha per seed; the student's initialization and
/// training stream derive from the seed.
std::vector<CurvePoint> sweep_alpha(const SweepSetup& setup, std::span<const double> alphas,
                                    std::span<const std::uint64_t> seeds);

enum class ReportFormat { csv, json };

/// Columns: surrogate,victim,optimizer,objective,epsilon,N,seed,success_rate,samples.
std::string report_csv(const TransferReport& report);
TransferReport parse_report_csv(const std::string& text);
std::string report_json(const TransferReport& report);
void emit_report(const TransferReport& report, const std::filesystem::path& path, ReportFormat format);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Bar {
  std::string label;
  double value = 0.0;
};

/// Success-versus-parameter line chart as SVG; log_x spaces x logarithmically.
void emit_line_plot(const std::filesystem::path& path, std::span<const Series> series, const std::string& title,
                    const std::string& x_label, const std::string& y_label, bool log_x = false);
void emit_bar_chart(const std::filesystem::path& path, std::span<const Bar> bars, const std::string& title,
                    const std::string& y_label);

}  // namespace dsm::eval
