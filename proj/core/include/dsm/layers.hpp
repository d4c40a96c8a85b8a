#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

struct Parameter {
  std::string name;
  Tensor value;
};

/// A differentiable batch operation. Inputs carry the batch on axis 0.
class Layer {
public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  /// Per-sample output dims for per-sample input dims.
  virtual std::vector<int> output_dims(const std::vector<int>& input_dims) const = 0;
  virtual Tensor forward(const Tensor& input) const = 0;
  /// Returns d loss / d input and accumulates parameter gradients into `param_grads`
  /// (one tensor per parameter, may be empty to skip them).
  virtual Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                          std::span<Tensor> param_grads) const = 0;

  virtual std::span<Parameter> parameters() { return {}; }
  virtual std::span<const Parameter> parameters() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Square-kernel convolution, stride 1, zero "same" padding.
class Conv2d final : public Layer {
public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel);

  std::string kind() const override { return "conv2d"; }
  std::vector<int> output_dims(const std::vector<int>& input_dims) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                  std::span<Tensor> param_grads) const override;
  std::span<Parameter> parameters() override { return params_; }
  std::span<const Parameter> parameters() const override { return params_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int kernel() const noexcept { return kernel_; }

private:
  int in_;
  int out_;
  int kernel_;
  std::vector<Parameter> params_;  // weight (out, in, k, k), bias (out)
};

/// Fully connected layer over the flattened per-sample input.
class Linear final : public Layer {
public:
  Linear(std::string name, int in_features, int out_features);

  std::string kind() const override { return "linear"; }
  std::vector<int> output_dims(const std::vector<int>& input_dims) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                  std::span<Tensor> param_grads) const override;
  std::span<Parameter> parameters() override { return params_; }
  std::span<const Parameter> parameters() const override { return params_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }
  const Tensor& weight() const noexcept { return params_[0].value; }
  const Tensor& bias() const noexcept { return params_[1].value; }

private:
  int in_;
  int out_;
  std::vector<Parameter> params_;  // weight (out, in), bias (out)
};

class Relu final : public Layer {
public:
  std::string kind() const override { return "relu"; }
  std::vector<int> output_dims(const std::vector<int>& input_dims) const override { return input_dims; }
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                  std::span<Tensor> param_grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

/// Fixed affine map (x - shift) / scale; no parameters.
class Standardize final : public Layer {
public:
  Standardize(double shift, double scale);

  std::string kind() const override { return "standardize"; }
  std::vector<int> output_dims(const std::vector<int>& input_dims) const override { return input_dims; }
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                  std::span<Tensor> param_grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Standardize>(*this); }

private:
  double shift_;
  double scale_;
};

/// 2x2 max pooling with stride 2; spatial dims must be even.
class MaxPool2 final : public Layer {
public:
  std::string kind() const override { return "maxpool2"; }
  std::vector<int> output_dims(const std::vector<int>& input_dims) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                  std::span<Tensor> param_grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
};

}  // namespace dsm
