#include "dsm/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace dsm {

ImageBatch::ImageBatch(Tensor pixels, std::vector<std::string> ids) : pixels_(std::move(pixels)), ids_(std::move(ids)) {
  if (pixels_.rank() != 4 || pixels_.dim(0) < 1)
    throw std::invalid_argument("ImageBatch: expected a non-empty (n, c, h, w) tensor, got " + pixels_.shape_string());
  for (double v : pixels_.values())
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("ImageBatch: pixel outside [0, 1]");
  if (ids_.empty()) {
    ids_.reserve(static_cast<std::size_t>(pixels_.dim(0)));
    for (int i = 0; i < pixels_.dim(0); ++i) ids_.push_back(std::to_string(i));
  }
  if (ids_.size() != static_cast<std::size_t>(pixels_.dim(0)))
    throw std::invalid_argument("ImageBatch: id count does not match batch size");
}

ImageBatch ImageBatch::gather(std::span<const int> rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (int r : rows) ids.push_back(ids_.at(static_cast<std::size_t>(r)));
  return ImageBatch(pixels_.gather(rows), std::move(ids));
}

Dataset::Dataset(ImageBatch images, std::vector<int> labels, int classes, std::vector<Split> splits)
    : images_(std::move(images)), labels_(std::move(labels)), splits_(std::move(splits)), classes_(classes) {
  if (classes_ < 1) throw std::invalid_argument("Dataset: class count must be positive");
  if (static_cast<int>(labels_.size()) != images_.count())
    throw std::invalid_argument("Dataset: label count does not match image count");
  for (int y : labels_)
    if (y < 0 || y >= classes_)
      throw std::out_of_range("label out of range: " + std::to_string(y) + " not in [0, " + std::to_string(classes_) + ")");
  if (splits_.empty()) splits_.assign(labels_.size(), Split::train);
  if (splits_.size() != labels_.size()) throw std::invalid_argument("Dataset: split tag count mismatch");
}

int Dataset::label(std::size_t i) const {
  ++label_reads_;
  return labels_.at(i);
}

std::vector<int> Dataset::labels(std::span<const int> rows) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(label(static_cast<std::size_t>(r)));
  return out;
}

const std::vector<int>& Dataset::all_labels() const {
  label_reads_ += labels_.size();
  return labels_;
}

Dataset Dataset::subset(std::span<const int> rows) const {
  std::vector<int> labels;
  std::vector<Split> splits;
  for (int r : rows) {
    labels.push_back(labels_.at(static_cast<std::size_t>(r)));
    splits.push_back(splits_.at(static_cast<std::size_t>(r)));
  }
  return Dataset(images_.gather(rows), std::move(labels), classes_, std::move(splits));
}

Dataset Dataset::split(Split which) const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < splits_.size(); ++i)
    if (splits_[i] == which) rows.push_back(static_cast<int>(i));
  if (rows.empty()) throw std::invalid_argument("Dataset::split: no samples carry the requested tag");
  return subset(rows);
}

Dataset Dataset::with_splits(const Dataset& train, const Dataset& test) {
  if (train.classes_ != test.classes_ || !(train.shape() == test.shape()))
    throw std::invalid_argument("Dataset::with_splits: incompatible datasets");
  const Tensor& a = train.images_.pixels();
  const Tensor& b = test.images_.pixels();
  std::vector<int> dims = a.dims();
  dims[0] += b.dim(0);
  std::vector<double> values(a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  std::vector<std::string> ids = train.images_.ids();
  ids.insert(ids.end(), test.images_.ids().begin(), test.images_.ids().end());
  std::vector<int> labels = train.labels_;
  labels.insert(labels.end(), test.labels_.begin(), test.labels_.end());
  std::vector<Split> splits(train.labels_.size(), Split::train);
  splits.resize(labels.size(), Split::test);
  return Dataset(ImageBatch(Tensor(dims, std::move(values)), std::move(ids)), std::move(labels), train.classes_,
                 std::move(splits));
}

namespace {

constexpr std::uint8_t kTypeUbyte = 0x08;
constexpr std::uint8_t kTypeFloat = 0x0D;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

struct IdxHeader {
  std::uint8_t type = 0;
  std::vector<std::uint32_t> dims;
  std::size_t payload_offset = 0;
};

IdxHeader parse_idx_header(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0)
    throw std::runtime_error("magic-number mismatch in " + path.string());
  IdxHeader h;
  h.type = bytes[2];
  const std::size_t rank = bytes[3];
  if (rank == 0 || bytes.size() < 4 + 4 * rank) throw std::runtime_error("truncated IDX header in " + path.string());
  for (std::size_t i = 0; i < rank; ++i) h.dims.push_back(read_be32(bytes.data() + 4 + 4 * i));
  h.payload_offset = 4 + 4 * rank;
  return h;
}

}  // namespace

ImageBatch load_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const IdxHeader h = parse_idx_header(bytes, path);
  if ((h.type != kTypeUbyte && h.type != kTypeFloat) || (h.dims.size() != 3 && h.dims.size() != 4))
    throw std::runtime_error("magic-number mismatch in " + path.string() + ": not an IDX image file");
  std::vector<int> dims;
  for (auto d : h.dims) dims.push_back(static_cast<int>(d));
  if (dims.size() == 3) dims.insert(dims.begin() + 1, 1);
  const std::size_t count = element_count(dims);
  const std::size_t width = h.type == kTypeUbyte ? 1 : 4;
  if (bytes.size() - h.payload_offset < count * width)
    throw std::runtime_error("payload shorter than header shape in " + path.string());
  std::vector<double> values(count);
  const unsigned char* payload = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < count; ++i) {
    if (h.type == kTypeUbyte) {
      values[i] = payload[i] / 255.0;
    } else {
      const float f = std::bit_cast<float>(read_be32(payload + 4 * i));
      values[i] = static_cast<double>(f);
    }
  }
  return ImageBatch(Tensor(dims, std::move(values)));
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const IdxHeader h = parse_idx_header(bytes, path);
  if (h.type != kTypeUbyte || h.dims.size() != 1)
    throw std::runtime_error("magic-number mismatch in " + path.string() + ": not an IDX label file");
  if (bytes.size() - h.payload_offset < h.dims[0])
    throw std::runtime_error("payload shorter than header shape in " + path.string());
  return {bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset),
          bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset + h.dims[0])};
}

namespace {

void write_idx_image_header(std::ofstream& out, const ImageBatch& images, std::uint8_t type) {
  const Tensor& px = images.pixels();
  const bool single = px.dim(1) == 1;
  const char magic[4] = {0, 0, static_cast<char>(type), static_cast<char>(single ? 3 : 4)};
  out.write(magic, 4);
  write_be32(out, static_cast<std::uint32_t>(px.dim(0)));
  if (!single) write_be32(out, static_cast<std::uint32_t>(px.dim(1)));
  write_be32(out, static_cast<std::uint32_t>(px.dim(2)));
  write_be32(out, static_cast<std::uint32_t>(px.dim(3)));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void save_idx_images(const std::filesystem::path& path, const ImageBatch& images) {
  auto out = open_out(path);
  write_idx_image_header(out, images, kTypeUbyte);
  std::vector<char> payload;
  payload.reserve(images.pixels().size());
  for (double v : images.pixels().values()) payload.push_back(static_cast<char>(std::lround(v * 255.0)));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

void save_idx_images_float(const std::filesystem::path& path, const ImageBatch& images) {
  auto out = open_out(path);
  write_idx_image_header(out, images, kTypeFloat);
  for (double v : images.pixels().values()) write_be32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels) {
  auto out = open_out(path);
  const char magic[4] = {0, 0, static_cast<char>(kTypeUbyte), 1};
  out.write(magic, 4);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw std::out_of_range("IDX labels must fit in one byte");
    out.put(static_cast<char>(y));
  }
}

void save_csv_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  const Tensor& px = dataset.images().pixels();
  const auto& labels = dataset.all_labels();
  for (int i = 0; i < dataset.size(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (double v : px.row(i)) out << ',' << std::lround(v * 255.0);
    out << '\n';
  }
}

namespace {

Dataset load_csv(const DataSource& source) {
  if (!source.shape) throw std::invalid_argument("CSV ingestion requires an image shape");
  const ImageShape shape = *source.shape;
  std::ifstream in(source.images);
  if (!in) throw std::runtime_error("cannot open " + source.images.string());
  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<long> cells;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stol(cell, &used));
        if (cell.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ": not an integer: '" + cell + "'");
      }
    }
    if (static_cast<int>(cells.size()) != shape.pixels() + 1)
      throw std::runtime_error("shape mismatch on CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(shape.pixels()) + " pixels, got " + std::to_string(cells.size() - 1));
    labels.push_back(static_cast<int>(cells[0]));
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i] < 0 || cells[i] > 255)
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ": pixel outside 0..255");
      values.push_back(static_cast<double>(cells[i]) / 255.0);
    }
  }
  if (labels.empty()) throw std::runtime_error("CSV file has no rows: " + source.images.string());
  Tensor pixels({static_cast<int>(labels.size()), shape.channels, shape.height, shape.width}, std::move(values));
  return Dataset(ImageBatch(std::move(pixels)), std::move(labels), source.classes);
}

}  // namespace

Dataset load_dataset(const DataSource& source) {
  if (source.format == DataFormat::csv) return load_csv(source);
  ImageBatch images = load_idx_images(source.images);
  std::vector<int> labels = load_idx_labels(source.labels);
  if (static_cast<int>(labels.size()) != images.count())
    throw std::runtime_error("shape mismatch: " + std::to_string(images.count()) + " images but " +
                             std::to_string(labels.size()) + " labels");
  if (source.shape && !(*source.shape == images.shape()))
    throw std::runtime_error("shape mismatch: IDX images do not have the declared shape");
  return Dataset(std::move(images), std::move(labels), source.classes);
}

}  // namespace dsm
