#pragma once

#include <map>
#include <string>

#include "qshed/simnet.hpp"

namespace qshed {

inline constexpr const char* kVersionString = "qshed 1.0.0";

// Flat key = value files: '#' starts a comment, blank lines are skipped,
// unknown or duplicate keys are errors.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

RunConfig run_config_from(const std::map<std::string, std::string>& kv);

// Canonical resolved form, same key order every time.
std::map<std::string, std::string> render_config(const RunConfig& cfg);

}  // namespace qshed
