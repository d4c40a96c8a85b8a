#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace dsm::cli {

/// Executes a resolved config. Artifacts and manifest.json land in out_dir;
/// the returned paths are the artifacts the manifest fingerprints.
std::vector<std::filesystem::path> run_command(Command command, const Json& resolved);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Full command-line entry point; returns the process exit code.
int cli_main(int argc, char** argv);

}  // namespace dsm::cli
