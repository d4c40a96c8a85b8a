#include "dsm/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsm {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'M', 'C'};

class Writer {
public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

private:
  std::ofstream out_;
};

class Reader {
public:
  explicit Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("truncated checkpoint " + path_.string());
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool magic_matches() {
    if (bytes_.size() < 4) return false;
    for (int i = 0; i < 4; ++i)
      if (bytes_[static_cast<std::size_t>(i)] != static_cast<unsigned char>(kMagic[i])) return false;
    pos_ = 4;
    return true;
  }

private:
  std::filesystem::path path_;
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  Writer w(path);
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(model.architecture_id());
  const ImageShape s = model.input_shape();
  w.u32(static_cast<std::uint32_t>(model.class_count()));
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (int d : p->value.dims()) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const auto* p : params)
    for (double v : p->value.values()) w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

Model load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_classes) {
  Reader r(path);
  if (!r.magic_matches()) throw std::runtime_error("checkpoint version error: bad magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version error: file has version " + std::to_string(version) + ", expected " +
                             std::to_string(kCheckpointVersion));
  const std::string arch = r.str();
  if (!is_registered_architecture(arch)) throw std::runtime_error("unknown architecture_id '" + arch + "' in checkpoint");
  const int classes = static_cast<int>(r.u32());
  ImageShape shape;
  shape.channels = static_cast<int>(r.u32());
  shape.height = static_cast<int>(r.u32());
  shape.width = static_cast<int>(r.u32());
  if (expected_classes && *expected_classes != classes)
    throw std::runtime_error("checkpoint shape error: stored class count " + std::to_string(classes) +
                             " differs from expected " + std::to_string(*expected_classes));

  Model model = make_model(arch, shape, classes);
  auto params = model.parameters();
  const std::uint32_t count = r.u32();
  if (count != params.size()) throw std::runtime_error("checkpoint shape error: tensor count mismatch");
  for (auto* p : params) {
    const std::string name = r.str();
    if (name != p->name) throw std::runtime_error("checkpoint shape error: expected tensor " + p->name + ", got " + name);
    const std::uint32_t rank = r.u32();
    std::vector<int> dims;
    for (std::uint32_t i = 0; i < rank; ++i) dims.push_back(static_cast<int>(r.u32()));
    if (dims != p->value.dims()) throw std::runtime_error("checkpoint shape error: tensor " + name + " has wrong dims");
  }
  for (auto* p : params)
    for (double& v : p->value.values()) v = static_cast<double>(std::bit_cast<float>(r.u32()));
  return model;
}

}  // namespace dsm
