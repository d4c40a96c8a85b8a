#include "dsm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dsm {

std::size_t element_count(const std::vector<int>& dims) {
  std::size_t count = 1;
  for (int d : dims) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    count *= static_cast<std::size_t>(d);
  }
  return dims.empty() ? 0 : count;
}

Tensor::Tensor(std::vector<int> dims, double fill)
    : dims_(std::move(dims)), data_(element_count(dims_), fill) {}

Tensor::Tensor(std::vector<int> dims, std::vector<double> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  if (data_.size() != element_count(dims_))
    throw std::invalid_argument("tensor value count " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string());
}

std::size_t Tensor::stride0() const {
  if (dims_.empty() || dims_[0] == 0) return 0;
  return data_.size() / static_cast<std::size_t>(dims_[0]);
}

double& Tensor::at(int n, int c, int h, int w) {
  return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
}

double Tensor::at(int n, int c, int h, int w) const {
  return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
}

double& Tensor::at(int r, int c) { return data_[static_cast<std::size_t>(r) * dims_[1] + c]; }

double Tensor::at(int r, int c) const { return data_[static_cast<std::size_t>(r) * dims_[1] + c]; }

std::span<double> Tensor::row(int n) {
  const std::size_t s = stride0();
  return {data_.data() + static_cast<std::size_t>(n) * s, s};
}

std::span<const double> Tensor::row(int n) const {
  const std::size_t s = stride0();
  return {data_.data() + static_cast<std::size_t>(n) * s, s};
}

Tensor Tensor::reshaped(std::vector<int> dims) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(dims));
}

Tensor Tensor::reshaped(std::vector<int> dims) && {
  if (element_count(dims) != data_.size())
    throw std::invalid_argument("cannot reshape " + shape_string());
  Tensor out;
  out.dims_ = std::move(dims);
  out.data_ = std::move(data_);
  return out;
}

Tensor Tensor::gather(std::span<const int> rows) const {
  std::vector<int> dims = dims_;
  dims[0] = static_cast<int>(rows.size());
  Tensor out(dims);
  const std::size_t s = stride0();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= dims_[0]) throw std::out_of_range("gather row out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * s), s,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * s));
  }
  return out;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i];
  os << ')';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
}

std::vector<int> argmax_rows(const Tensor& matrix) {
  const int rows = matrix.dim(0);
  const std::size_t cols = matrix.stride0();
  std::vector<int> out(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    auto row = matrix.row(r);
    out[static_cast<std::size_t>(r)] =
        static_cast<int>(std::max_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(cols)) -
                         row.begin());
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace dsm
