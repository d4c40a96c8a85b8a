#include "dsm/model.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <stdexcept>

namespace dsm {

namespace {

// pixels live in [0, 1]; centre them before the first layer
constexpr double kPixelShift = 0.5;
constexpr double kPixelScale = 0.25;

std::vector<int> trace_dims(const std::vector<std::unique_ptr<Layer>>& layers, std::vector<int> dims) {
  for (const auto& layer : layers) dims = layer->output_dims(dims);
  return dims;
}

std::vector<std::unique_ptr<Layer>> conv_a(ImageShape in) {
  std::vector<std::unique_ptr<Layer>> l;
  l.push_back(std::make_unique<Standardize>(kPixelShift, kPixelScale));
  l.push_back(std::make_unique<Conv2d>("conv1", in.channels, 8, 3));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<MaxPool2>());
  l.push_back(std::make_unique<Conv2d>("conv2", 8, 16, 3));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<MaxPool2>());
  const auto dims = trace_dims(l, in.dims());
  l.push_back(std::make_unique<Linear>("fc1", static_cast<int>(element_count(dims)), 64));
  l.push_back(std::make_unique<Relu>());
  return l;
}

// deeper and narrower than conv_a, two convolutions before the first pooling
std::vector<std::unique_ptr<Layer>> conv_b(ImageShape in) {
  std::vector<std::unique_ptr<Layer>> l;
  l.push_back(std::make_unique<Standardize>(kPixelShift, kPixelScale));
  l.push_back(std::make_unique<Conv2d>("conv1", in.channels, 6, 3));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<Conv2d>("conv2", 6, 12, 3));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<MaxPool2>());
  l.push_back(std::make_unique<Conv2d>("conv3", 12, 24, 3));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<MaxPool2>());
  const auto dims = trace_dims(l, in.dims());
  l.push_back(std::make_unique<Linear>("fc1", static_cast<int>(element_count(dims)), 48));
  l.push_back(std::make_unique<Relu>());
  return l;
}

// shallow with a wide 5x5 receptive field
std::vector<std::unique_ptr<Layer>> conv_c(ImageShape in) {
  std::vector<std::unique_ptr<Layer>> l;
  l.push_back(std::make_unique<Standardize>(kPixelShift, kPixelScale));
  l.push_back(std::make_unique<Conv2d>("conv1", in.channels, 12, 5));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<MaxPool2>());
  l.push_back(std::make_unique<MaxPool2>());
  const auto dims = trace_dims(l, in.dims());
  l.push_back(std::make_unique<Linear>("fc1", static_cast<int>(element_count(dims)), 48));
  l.push_back(std::make_unique<Relu>());
  return l;
}

std::vector<std::unique_ptr<Layer>> mlp(ImageShape in) {
  std::vector<std::unique_ptr<Layer>> l;
  l.push_back(std::make_unique<Standardize>(kPixelShift, kPixelScale));
  l.push_back(std::make_unique<Linear>("fc1", in.pixels(), 128));
  l.push_back(std::make_unique<Relu>());
  l.push_back(std::make_unique<Linear>("fc2", 128, 64));
  l.push_back(std::make_unique<Relu>());
  return l;
}

// Face embedders: same bodies, but the embedding is the linear fc output (no
// trailing ReLU), so cosine similarity uses the whole sphere.
template <auto Body>
std::vector<std::unique_ptr<Layer>> linear_embedding(ImageShape in) {
  auto l = Body(in);
  l.pop_back();
  return l;
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, ArchitectureBuilder> builders{
      {"conv_a", conv_a},
      {"conv_b", conv_b},
      {"conv_c", conv_c},
      {"mlp", mlp},
      {"face_a", linear_embedding<conv_a>},
      {"face_b", linear_embedding<conv_b>},
      {"face_c", linear_embedding<conv_c>},
      {"face_mlp", linear_embedding<mlp>}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

Model::Model(std::string architecture_id, ImageShape input, int classes, std::vector<std::unique_ptr<Layer>> body)
    : arch_(std::move(architecture_id)), input_(input), classes_(classes), body_(std::move(body)) {
  if (classes_ < 1) throw std::invalid_argument("Model: class count must be positive");
  const auto dims = trace_dims(body_, input_.dims());
  head_ = std::make_unique<Linear>("head", static_cast<int>(element_count(dims)), classes_);
}

Model::Model(const Model& other)
    : arch_(other.arch_), input_(other.input_), classes_(other.classes_),
      head_(std::make_unique<Linear>(*other.head_)) {
  body_.reserve(other.body_.size());
  for (const auto& layer : other.body_) body_.push_back(layer->clone());
}

Model& Model::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

void Model::check_input(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != input_.channels || x.dim(2) != input_.height || x.dim(3) != input_.width)
    throw std::invalid_argument("model " + arch_ + " expects (n, " + std::to_string(input_.channels) + ", " +
                                std::to_string(input_.height) + ", " + std::to_string(input_.width) +
                                ") input, got " + x.shape_string());
}

ForwardTrace Model::forward(const Tensor& x) const {
  check_input(x);
  ForwardTrace trace;
  trace.activations.reserve(body_.size() + 2);
  trace.activations.push_back(x);
  for (const auto& layer : body_) trace.activations.push_back(layer->forward(trace.activations.back()));
  trace.activations.push_back(head_->forward(trace.activations.back()));
  return trace;
}

Tensor Model::logits(const Tensor& x) const {
  check_input(x);
  Tensor a = x;
  for (const auto& layer : body_) a = layer->forward(a);
  return head_->forward(a);
}

Tensor Model::embed(const Tensor& x) const {
  check_input(x);
  Tensor a = x;
  for (const auto& layer : body_) a = layer->forward(a);
  return a.reshaped({x.dim(0), embedding_dim()});
}

Tensor Model::backward(const ForwardTrace& trace, const Tensor* grad_logits, const Tensor* grad_embedding,
                       Gradients* grads) const {
  const auto& acts = trace.activations;
  // parameter tensors are laid out body layers first, head last
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& layer : body_) {
    offsets.push_back(offset);
    offset += layer->parameters().size();
  }
  const std::size_t head_offset = offset;

  const Tensor& emb = acts[acts.size() - 2];
  Tensor grad = Tensor::like(emb);
  if (grad_logits != nullptr) {
    std::span<Tensor> head_grads;
    if (grads != nullptr) head_grads = std::span<Tensor>(*grads).subspan(head_offset, 2);
    grad = head_->backward(emb, acts.back(), *grad_logits, head_grads);
  }
  if (grad_embedding != nullptr) {
    if (grad_embedding->size() != grad.size()) throw std::invalid_argument("embedding gradient has wrong size");
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += (*grad_embedding)[i];
  }
  for (std::size_t i = body_.size(); i-- > 0;) {
    std::span<Tensor> layer_grads;
    if (grads != nullptr) layer_grads = std::span<Tensor>(*grads).subspan(offsets[i], body_[i]->parameters().size());
    grad = body_[i]->backward(acts[i], acts[i + 1], grad, layer_grads);
  }
  return grad;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : body_)
    for (auto& p : layer->parameters()) out.push_back(&p);
  for (auto& p : head_->parameters()) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& layer : body_)
    for (const auto& p : std::as_const(*layer).parameters()) out.push_back(&p);
  for (const auto& p : std::as_const(*head_).parameters()) out.push_back(&p);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

Gradients Model::zero_gradients() const {
  Gradients g;
  for (const auto* p : parameters()) g.push_back(Tensor::like(p->value));
  return g;
}

void Model::round_parameters_to_float() {
  for (auto* p : parameters())
    for (double& v : p->value.values()) v = static_cast<double>(static_cast<float>(v));
}

void register_architecture(const std::string& id, ArchitectureBuilder builder) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.builders[id] = std::move(builder);
}

std::vector<std::string> registered_architectures() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> ids;
  for (const auto& [id, _] : r.builders) ids.push_back(id);
  return ids;
}

bool is_registered_architecture(const std::string& id) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  return r.builders.contains(id);
}

Model make_model(const std::string& architecture_id, ImageShape input, int classes) {
  ArchitectureBuilder builder;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.builders.find(architecture_id);
    if (it == r.builders.end()) throw std::invalid_argument("unknown architecture_id '" + architecture_id + "'");
    builder = it->second;
  }
  return Model(architecture_id, input, classes, builder(input));
}

Model make_model(const std::string& architecture_id, ImageShape input, int classes, Rng& rng) {
  Model model = make_model(architecture_id, input, classes);
  for (auto* p : model.parameters()) {
    if (p->value.rank() < 2) continue;  // biases stay zero
    const double fan_in = static_cast<double>(p->value.stride0());
    const double stddev = std::sqrt(2.0 / fan_in);
    for (double& v : p->value.values()) v = rng.normal(0.0, stddev);
  }
  model.round_parameters_to_float();
  return model;
}

double parameter_distance(const Model& a, const Model& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) throw std::invalid_argument("parameter_distance: architecture mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    require_same_shape(pa[i]->value, pb[i]->value, "parameter_distance");
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      const double d = pa[i]->value[j] - pb[i]->value[j];
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace dsm
