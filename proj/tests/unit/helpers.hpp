#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dsm/dataset.hpp"
#include "dsm/model.hpp"
#include "dsm/rng.hpp"

namespace test {

inline dsm::Model linear_model(dsm::ImageShape shape, int classes, const std::vector<double>& weight,
                               const std::vector<double>& bias = {}) {
  dsm::Model m("linear", shape, classes, {});
  auto params = m.parameters();
  std::copy(weight.begin(), weight.end(), params[0]->value.values().begin());
  if (!bias.empty()) std::copy(bias.begin(), bias.end(), params[1]->value.values().begin());
  return m;
}

inline dsm::Model random_model(const std::string& arch, dsm::ImageShape shape, int classes, std::uint64_t seed) {
  dsm::Rng rng(seed, "test-model");
  return dsm::make_model(arch, shape, classes, rng);
}

/// Pixels uniform in [lo, hi].
inline dsm::ImageBatch random_batch(int n, dsm::ImageShape shape, std::uint64_t seed, double lo = 0.05,
                                    double hi = 0.95) {
  dsm::Rng rng(seed, "test-batch");
  dsm::Tensor t({n, shape.channels, shape.height, shape.width});
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return dsm::ImageBatch(std::move(t));
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Scratch directory under the build tree, emptied on creation.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dsm-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
