#include "dsm/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsm/math.hpp"

namespace dsm {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void cosine_similarity_grad(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double norm_a = std::sqrt(na), norm_b = std::sqrt(nb);
  const double cos = dot / (norm_a * norm_b);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = b[i] / (norm_a * norm_b) - cos * a[i] / na;
}

OutputGradient loss_output_gradient(const ForwardTrace& trace, const LossSpec& spec) {
  const Tensor& logits = trace.logits();
  const int n = logits.dim(0);
  const int classes = logits.dim(1);
  OutputGradient out;
  out.loss.resize(static_cast<std::size_t>(n));

  if (const auto* ce = std::get_if<CrossEntropyLoss>(&spec)) {
    if (ce->targets.rank() != 2 || ce->targets.dim(0) != n || ce->targets.dim(1) != classes)
      throw std::invalid_argument("cross-entropy loss: targets must be (n, K)");
    const Tensor probs = softmax_rows(logits);
    out.grad_logits = Tensor::like(logits);
    for (int r = 0; r < n; ++r) {
      out.loss[static_cast<std::size_t>(r)] = cross_entropy(ce->targets.row(r), probs.row(r));
      double mass = 0.0;
      for (double t : ce->targets.row(r)) mass += t;
      for (int k = 0; k < classes; ++k) out.grad_logits.at(r, k) = mass * probs.at(r, k) - ce->targets.at(r, k);
    }
  } else if (const auto* lg = std::get_if<LogitLoss>(&spec)) {
    if (static_cast<int>(lg->classes.size()) != n) throw std::invalid_argument("logit loss: one class per sample");
    out.grad_logits = Tensor::like(logits);
    for (int r = 0; r < n; ++r) {
      const int t = lg->classes[static_cast<std::size_t>(r)];
      if (t < 0 || t >= classes) throw std::out_of_range("logit loss: class out of range");
      out.loss[static_cast<std::size_t>(r)] = logits.at(r, t);
      out.grad_logits.at(r, t) = 1.0;
    }
  } else if (const auto* cs = std::get_if<CosineLoss>(&spec)) {
    const Tensor& emb = trace.embedding();
    const int dim = static_cast<int>(emb.stride0());
    if (cs->reference.rank() != 2 || cs->reference.dim(0) != n || cs->reference.dim(1) != dim)
      throw std::invalid_argument("cosine loss: reference must be (n, d) matching the embedding");
    out.grad_embedding = Tensor({n, dim});
    for (int r = 0; r < n; ++r) {
      out.loss[static_cast<std::size_t>(r)] = cosine_similarity(emb.row(r), cs->reference.row(r));
      cosine_similarity_grad(emb.row(r), cs->reference.row(r), out.grad_embedding.row(r));
    }
  } else {
    throw std::invalid_argument("unsupported loss spec");
  }
  return out;
}

InputGradient input_gradient(const Model& model, const Tensor& x, const LossSpec& spec) {
  const ForwardTrace trace = model.forward(x);
  OutputGradient up = loss_output_gradient(trace, spec);
  InputGradient result;
  result.grad = model.backward(trace, up.grad_logits.empty() ? nullptr : &up.grad_logits,
                               up.grad_embedding.empty() ? nullptr : &up.grad_embedding, nullptr);
  result.loss = std::move(up.loss);
  return result;
}

}  // namespace dsm
