#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ddcbf/sim.hpp"

namespace ddcbf {

/// Parsed scenario config file: the scenario itself, the output directory
/// and the optional study section. Parsing is strict, unknown keys are
/// rejected.
struct AppConfig {
  Scenario scenario;
  std::string out_dir = "out";
  std::optional<StudyConfig> study;
  std::string config_hash;  ///< fingerprint of the raw file contents
};

AppConfig load_config(const std::filesystem::path& file);

/// Serialize back to the canonical JSON layout (used by round-trip tests).
std::string dump_config(const AppConfig& cfg);

}  // namespace ddcbf
