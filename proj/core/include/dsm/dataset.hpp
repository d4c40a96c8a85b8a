#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsm/model.hpp"
#include "dsm/tensor.hpp"

namespace dsm {

/// (n, c, h, w) images with every pixel in [0, 1], plus per-sample ids.
class ImageBatch {
public:
  ImageBatch() = default;
  /// Throws if the tensor is not rank 4, is empty, or has a pixel outside [0, 1].
  explicit ImageBatch(Tensor pixels, std::vector<std::string> ids = {});

  const Tensor& pixels() const noexcept { return pixels_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  int count() const { return pixels_.dim(0); }
  ImageShape shape() const { return {pixels_.dim(1), pixels_.dim(2), pixels_.dim(3)}; }

  ImageBatch gather(std::span<const int> rows) const;

private:
  Tensor pixels_;
  std::vector<std::string> ids_;
};

enum class Split { train, test };

/// Labelled images. Label reads are counted so callers can prove that a
/// training routine never looked at ground truth.
class Dataset {
public:
  Dataset() = default;
  Dataset(ImageBatch images, std::vector<int> labels, int classes, std::vector<Split> splits = {});

  const ImageBatch& images() const noexcept { return images_; }
  int classes() const noexcept { return classes_; }
  int size() const noexcept { return static_cast<int>(labels_.size()); }
  ImageShape shape() const { return images_.shape(); }

  int label(std::size_t i) const;
  std::vector<int> labels(std::span<const int> rows) const;
  const std::vector<int>& all_labels() const;
  Split split_of(std::size_t i) const { return splits_.at(i); }

  std::size_t label_reads() const noexcept { return label_reads_; }
  void reset_label_reads() const noexcept { label_reads_ = 0; }

  Dataset subset(std::span<const int> rows) const;
  Dataset split(Split which) const;
  /// Concatenation of `train` (tagged train) and `test` (tagged test).
  static Dataset with_splits(const Dataset& train, const Dataset& test);

private:
  ImageBatch images_;
  std::vector<int> labels_;
  std::vector<Split> splits_;
  int classes_ = 0;
  mutable std::size_t label_reads_ = 0;
};

enum class DataFormat { idx, csv };

struct DataSource {
  DataFormat format = DataFormat::idx;
  std::filesystem::path images;  ///< IDX image file, or the CSV file
  std::filesystem::path labels;  ///< IDX label file (unused for CSV)
  int classes = 10;
  /// Required for CSV; IDX takes it from the header.
  std::optional<ImageShape> shape;
};

/// Loads images scaled by 1/255 and validates labels against `classes`.
Dataset load_dataset(const DataSource& source);

/// IDX ubyte images (magic 0x00000803 for one channel, 0x00000804 for (n, c, h, w)),
/// pixels rounded from [0, 1] to 0..255.
void save_idx_images(const std::filesystem::path& path, const ImageBatch& images);
/// IDX float32 images (data type 0x0D), lossless up to float precision.
void save_idx_images_float(const std::filesystem::path& path, const ImageBatch& images);
void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels);
/// Reads either ubyte or float32 IDX images.
ImageBatch load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);

void save_csv_dataset(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace dsm
