#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "dsm/model.hpp"

namespace dsm {

/// Checkpoint layout, all integers little-endian:
///
///   "DSMC"                       4-byte magic
///   u32 version                  currently 1
///   u32 len, bytes               architecture id
///   u32 classes, channels, height, width
///   u32 tensor_count
///   per tensor: u32 len, name bytes, u32 rank, u32 dims[rank]
///   payload: every tensor's values as float32, in directory order
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Rebuilds the registered architecture and fills its parameters. When
/// `expected_classes` is given, a different stored class count is a shape error.
Model load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_classes = std::nullopt);

}  // namespace dsm
