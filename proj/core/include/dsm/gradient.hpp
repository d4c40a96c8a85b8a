#pragma once

#include <variant>
#include <vector>

#include "dsm/model.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

/// loss_i = CE(targets_i, softmax(f(x_i))); targets is (n, K).
struct CrossEntropyLoss {
  Tensor targets;
};

/// loss_i = f(x_i)[class_i], the raw logit.
struct LogitLoss {
  std::vector<int> classes;
};

/// loss_i = cos(embed(x_i), reference_i); reference is (n, d).
struct CosineLoss {
  Tensor reference;
};

using LossSpec = std::variant<CrossEntropyLoss, LogitLoss, CosineLoss>;

struct InputGradient {
  Tensor grad;                ///< d (sum_i loss_i) / d x, shape of x
  std::vector<double> loss;   ///< per-sample loss values
};

/// Upstream gradients of a loss spec at the model outputs.
struct OutputGradient {
  Tensor grad_logits;     ///< empty when the loss does not touch the logits
  Tensor grad_embedding;  ///< empty when the loss does not touch the embedding
  std::vector<double> loss;
};

OutputGradient loss_output_gradient(const ForwardTrace& trace, const LossSpec& spec);

/// Exact gradient of the summed per-sample loss with respect to the input pixels.
InputGradient input_gradient(const Model& model, const Tensor& x, const LossSpec& spec);

/// Cosine similarity of two vectors; 0 if either has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
/// d cos(a, b) / d a; zero if either vector has zero norm.
void cosine_similarity_grad(std::span<const double> a, std::span<const double> b, std::span<double> out);

}  // namespace dsm
