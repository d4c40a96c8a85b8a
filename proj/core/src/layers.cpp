#include "dsm/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>

namespace dsm {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Builds the (C*k*k, H*W) patch matrix of one CHW image.
void im2col(const double* image, int channels, int height, int width, int kernel, double* cols) {
  const int pad = kernel / 2;
  const int plane = height * width;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        double* dst = cols + ((c * kernel + ky) * kernel + kx) * plane;
        const double* src = image + c * plane;
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height) {
            for (int x = 0; x < width; ++x) dst[y * width + x] = 0.0;
            continue;
          }
          for (int x = 0; x < width; ++x) {
            const int sx = x + kx - pad;
            dst[y * width + x] = (sx < 0 || sx >= width) ? 0.0 : src[sy * width + sx];
          }
        }
      }
}

void col2im_add(const double* cols, int channels, int height, int width, int kernel, double* image) {
  const int pad = kernel / 2;
  const int plane = height * width;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        const double* src = cols + ((c * kernel + ky) * kernel + kx) * plane;
        double* dst = image + c * plane;
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          for (int x = 0; x < width; ++x) {
            const int sx = x + kx - pad;
            if (sx >= 0 && sx < width) dst[sy * width + sx] += src[y * width + x];
          }
        }
      }
}

}  // namespace

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel)
    : in_(in_channels), out_(out_channels), kernel_(kernel) {
  if (kernel % 2 == 0) throw std::invalid_argument("Conv2d: kernel must be odd");
  params_.push_back({name + ".weight", Tensor({out_, in_, kernel_, kernel_})});
  params_.push_back({name + ".bias", Tensor({out_})});
}

std::vector<int> Conv2d::output_dims(const std::vector<int>& input_dims) const {
  if (input_dims.size() != 3 || input_dims[0] != in_) throw std::invalid_argument("Conv2d: bad input dims");
  return {out_, input_dims[1], input_dims[2]};
}

Tensor Conv2d::forward(const Tensor& input) const {
  const int n = input.dim(0), h = input.dim(2), w = input.dim(3);
  const int patch = in_ * kernel_ * kernel_;
  const int plane = h * w;
  Tensor out({n, out_, h, w});
  std::vector<double> cols(static_cast<std::size_t>(patch) * plane);
  ConstMatrixMap weight(params_[0].value.data(), out_, patch);
  Eigen::Map<const Eigen::VectorXd> bias(params_[1].value.data(), out_);
  for (int s = 0; s < n; ++s) {
    im2col(input.row(s).data(), in_, h, w, kernel_, cols.data());
    MatrixMap dst(out.row(s).data(), out_, plane);
    dst.noalias() = weight * ConstMatrixMap(cols.data(), patch, plane);
    dst.colwise() += bias;
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& input, const Tensor& /*output*/, const Tensor& grad_output,
                        std::span<Tensor> param_grads) const {
  const int n = input.dim(0), h = input.dim(2), w = input.dim(3);
  const int patch = in_ * kernel_ * kernel_;
  const int plane = h * w;
  Tensor grad_input = Tensor::like(input);
  std::vector<double> cols(static_cast<std::size_t>(patch) * plane);
  std::vector<double> grad_cols(cols.size());
  ConstMatrixMap weight(params_[0].value.data(), out_, patch);
  const bool want_params = !param_grads.empty();
  for (int s = 0; s < n; ++s) {
    ConstMatrixMap gout(grad_output.row(s).data(), out_, plane);
    if (want_params) {
      im2col(input.row(s).data(), in_, h, w, kernel_, cols.data());
      MatrixMap(param_grads[0].data(), out_, patch).noalias() +=
          gout * ConstMatrixMap(cols.data(), patch, plane).transpose();
      Eigen::Map<Eigen::VectorXd>(param_grads[1].data(), out_) += gout.rowwise().sum();
    }
    MatrixMap(grad_cols.data(), patch, plane).noalias() = weight.transpose() * gout;
    col2im_add(grad_cols.data(), in_, h, w, kernel_, grad_input.row(s).data());
  }
  return grad_input;
}

Linear::Linear(std::string name, int in_features, int out_features) : in_(in_features), out_(out_features) {
  params_.push_back({name + ".weight", Tensor({out_, in_})});
  params_.push_back({name + ".bias", Tensor({out_})});
}

std::vector<int> Linear::output_dims(const std::vector<int>& input_dims) const {
  if (static_cast<int>(element_count(input_dims)) != in_) throw std::invalid_argument("Linear: bad input size");
  return {out_};
}

Tensor Linear::forward(const Tensor& input) const {
  const int n = input.dim(0);
  if (static_cast<int>(input.stride0()) != in_) throw std::invalid_argument("Linear: input has wrong feature count");
  Tensor out({n, out_});
  MatrixMap dst(out.data(), n, out_);
  dst.noalias() = ConstMatrixMap(input.data(), n, in_) * ConstMatrixMap(params_[0].value.data(), out_, in_).transpose();
  dst.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params_[1].value.data(), out_);
  return out;
}

Tensor Linear::backward(const Tensor& input, const Tensor& /*output*/, const Tensor& grad_output,
                        std::span<Tensor> param_grads) const {
  const int n = input.dim(0);
  ConstMatrixMap gout(grad_output.data(), n, out_);
  if (!param_grads.empty()) {
    MatrixMap(param_grads[0].data(), out_, in_).noalias() += gout.transpose() * ConstMatrixMap(input.data(), n, in_);
    Eigen::Map<Eigen::RowVectorXd>(param_grads[1].data(), out_) += gout.colwise().sum();
  }
  Tensor grad_input = Tensor::like(input);
  MatrixMap(grad_input.data(), n, in_).noalias() = gout * ConstMatrixMap(params_[0].value.data(), out_, in_);
  return grad_input;
}

Standardize::Standardize(double shift, double scale) : shift_(shift), scale_(scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("standardize: scale must be positive");
}

Tensor Standardize::forward(const Tensor& input) const {
  Tensor out = Tensor::like(input);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = (input[i] - shift_) / scale_;
  return out;
}

Tensor Standardize::backward(const Tensor& /*input*/, const Tensor& /*output*/, const Tensor& grad_output,
                             std::span<Tensor> /*param_grads*/) const {
  Tensor grad = Tensor::like(grad_output);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad_output[i] / scale_;
  return grad;
}

Tensor Relu::forward(const Tensor& input) const {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor Relu::backward(const Tensor& /*input*/, const Tensor& output, const Tensor& grad_output,
                      std::span<Tensor> /*param_grads*/) const {
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(output[i] > 0.0)) grad[i] = 0.0;
  return grad;
}

std::vector<int> MaxPool2::output_dims(const std::vector<int>& input_dims) const {
  if (input_dims.size() != 3 || input_dims[1] % 2 || input_dims[2] % 2)
    throw std::invalid_argument("MaxPool2: spatial dims must be even");
  return {input_dims[0], input_dims[1] / 2, input_dims[2] / 2};
}

Tensor MaxPool2::forward(const Tensor& input) const {
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out({n, c, h / 2, w / 2});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
          double best = input.at(s, ch, 2 * y, 2 * x);
          best = std::max(best, input.at(s, ch, 2 * y, 2 * x + 1));
          best = std::max(best, input.at(s, ch, 2 * y + 1, 2 * x));
          best = std::max(best, input.at(s, ch, 2 * y + 1, 2 * x + 1));
          out.at(s, ch, y, x) = best;
        }
  return out;
}

Tensor MaxPool2::backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                          std::span<Tensor> /*param_grads*/) const {
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor grad = Tensor::like(input);
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
          const double best = output.at(s, ch, y, x);
          // route to the first maximal position in scan order
          for (int k = 0; k < 4; ++k) {
            const int yy = 2 * y + k / 2, xx = 2 * x + k % 2;
            if (input.at(s, ch, yy, xx) == best) {
              grad.at(s, ch, yy, xx) += grad_output.at(s, ch, y, x);
              break;
            }
          }
        }
  return grad;
}

}  // namespace dsm
