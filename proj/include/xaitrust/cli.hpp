#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "xaitrust/study.hpp"

namespace xtrust::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kDataError = 1;
inline constexpr int kUsageError = 2;

// Environment variable naming the default event-log directory for `serve`.
inline constexpr const char* kLogDirEnv = "XAITRUST_LOG_DIR";
inline constexpr const char* kImageDirEnv = "XAITRUST_IMAGE_DIR";

// args excludes the program name. Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads a study config JSON file. Items may name a "saliency_file" (grid
// format, relative to the config's directory) instead of inline "saliency".
StudyConfig load_study_config_file(const std::filesystem::path& path);

}  // namespace xtrust::cli
