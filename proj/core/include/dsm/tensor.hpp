#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsm {

/// Dense row-major tensor of doubles. Images use NCHW layout.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);
  Tensor(std::vector<int> dims, std::vector<double> values);

  static Tensor like(const Tensor& other, double fill = 0.0) { return Tensor(other.dims_, fill); }

  const std::vector<int>& dims() const noexcept { return dims_; }
  int dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Elements per leading-axis entry (one sample of a batch).
  std::size_t stride0() const;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(int n, int c, int h, int w);
  double at(int n, int c, int h, int w) const;
  double& at(int r, int c);
  double at(int r, int c) const;

  std::span<double> row(int n);
  std::span<const double> row(int n) const;

  /// Reinterpret with new dims; element count must match.
  Tensor reshaped(std::vector<int> dims) const&;
  Tensor reshaped(std::vector<int> dims) &&;

  /// Copies of the selected leading-axis rows.
  Tensor gather(std::span<const int> rows) const;

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }
  bool operator==(const Tensor& other) const = default;

  std::string shape_string() const;

private:
  std::vector<int> dims_;
  std::vector<double> data_;
};

std::size_t element_count(const std::vector<int>& dims);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Index of the largest entry in each row of a rank-2 tensor (first wins on ties).
std::vector<int> argmax_rows(const Tensor& matrix);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dsm
