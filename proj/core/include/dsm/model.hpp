#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsm/layers.hpp"
#include "dsm/rng.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

struct ImageShape {
  int channels = 1;
  int height = 0;
  int width = 0;

  std::vector<int> dims() const { return {channels, height, width}; }
  int pixels() const noexcept { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

/// One tensor per model parameter, in `Model::parameters()` order.
using Gradients = std::vector<Tensor>;

/// Activations kept from a forward pass for the backward pass.
struct ForwardTrace {
  std::vector<Tensor> activations;  ///< [input, body outputs..., logits]

  const Tensor& input() const { return activations.front(); }
  const Tensor& embedding() const { return activations[activations.size() - 2]; }
  const Tensor& logits() const { return activations.back(); }
};

/// Differentiable classifier f(x): a feature body ending in the penultimate
/// embedding, followed by a linear head producing K logits.
class Model {
public:
  Model(std::string architecture_id, ImageShape input, int classes, std::vector<std::unique_ptr<Layer>> body);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  ~Model() = default;

  const std::string& architecture_id() const noexcept { return arch_; }
  ImageShape input_shape() const noexcept { return input_; }
  int class_count() const noexcept { return classes_; }
  int embedding_dim() const noexcept { return head_->in_features(); }

  Tensor logits(const Tensor& x) const;
  /// Penultimate activations (input of the head), unnormalized.
  Tensor embed(const Tensor& x) const;
  ForwardTrace forward(const Tensor& x) const;

  /// Back-propagates `grad_logits` (may be null) and an extra gradient arriving at
  /// the embedding (may be null). Accumulates into `grads` when non-null and
  /// returns d loss / d input.
  Tensor backward(const ForwardTrace& trace, const Tensor* grad_logits, const Tensor* grad_embedding,
                  Gradients* grads) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  Gradients zero_gradients() const;

  const Linear& head() const noexcept { return *head_; }
  std::size_t body_size() const noexcept { return body_.size(); }
  const Layer& body_layer(std::size_t i) const { return *body_.at(i); }

  /// Rounds every parameter to the nearest float32 so checkpoints are lossless.
  void round_parameters_to_float();

private:
  void check_input(const Tensor& x) const;

  std::string arch_;
  ImageShape input_;
  int classes_;
  std::vector<std::unique_ptr<Layer>> body_;
  std::unique_ptr<Linear> head_;
};

/// Builds an uninitialized (all-zero) model of a registered architecture.
using ArchitectureBuilder = std::function<std::vector<std::unique_ptr<Layer>>(ImageShape input)>;

void register_architecture(const std::string& id, ArchitectureBuilder builder);
std::vector<std::string> registered_architectures();
bool is_registered_architecture(const std::string& id);

/// Zero-weight model of `architecture_id`; throws on unknown ids.
Model make_model(const std::string& architecture_id, ImageShape input, int classes);
/// He-initialized model (biases zero), rounded to float32.
Model make_model(const std::string& architecture_id, ImageShape input, int classes, Rng& rng);

/// Euclidean distance between the flattened parameter vectors; models must share architecture.
double parameter_distance(const Model& a, const Model& b);

}  // namespace dsm
