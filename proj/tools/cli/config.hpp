#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace dsm::cli {

using Json = nlohmann::ordered_json;

/// Schema violation; `path()` names the offending field, e.g. "train.learning_rate".
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

enum class Command { train, distill, attack, eval, sweep_alpha, face_train, face_attack, report };

Command parse_command(const std::string& name);
std::string to_string(Command command);

/// Command-line and environment values that win over the config document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> objective;
  std::optional<std::string> optimizer;
};

/// Reads a config document. A manifest written by a previous run is accepted
/// too: its resolved config is returned, after checking it was written by `command`.
Json load_config_file(const std::filesystem::path& path, Command command);

/// Rejects unknown keys and wrongly typed values, fills every default the
/// command uses, converts *_255 keys to the [0, 1] scale and applies overrides.
/// The result is what the manifest records and what the command executes.
Json resolve_config(Command command, const Json& document, const Overrides& overrides = {});

/// Name of the environment variable that overrides `out_dir`.
inline constexpr const char* kOutDirEnv = "DSM_OUT_DIR";

}  // namespace dsm::cli
