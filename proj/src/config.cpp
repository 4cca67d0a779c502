#include "qshed/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "qshed/errors.hpp"

namespace qshed {

namespace {

const std::set<std::string> kKnownKeys = {
    "mode",        "channel",       "objective",     "devices",       "dim",
    "samples_per_device", "max_rounds", "renewal_period", "budget_mean", "tolerance",
    "l2",          "condition",     "noise",         "feature_shift", "label_skew",
    "jitter",      "seed",          "threads",       "csv_paths",
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw InvalidInput("config: " + key + " must be an integer, got '" + value + "'");
  return static_cast<int>(v);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw InvalidInput("config: " + key + " must be a number, got '" + value + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw InvalidInput("config: " + key + " must be an unsigned integer, got '" + value + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidInput("config line " + std::to_string(line_no) + ": empty key");
    if (!kKnownKeys.count(key))
      throw InvalidInput("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (kv.count(key))
      throw InvalidInput("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

RunConfig run_config_from(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "mode") cfg.mode = mode_from_string(value);
    else if (key == "channel") cfg.channel = channel_from_string(value);
    else if (key == "objective") cfg.objective = objective_from_string(value);
    else if (key == "devices") cfg.devices = parse_int(key, value);
    else if (key == "dim") cfg.dim = parse_int(key, value);
    else if (key == "samples_per_device") cfg.samples_per_device = parse_int(key, value);
    else if (key == "max_rounds") cfg.max_rounds = parse_int(key, value);
    else if (key == "renewal_period") cfg.renewal_period = parse_int(key, value);
    else if (key == "budget_mean") cfg.budget_mean = parse_double(key, value);
    else if (key == "tolerance") cfg.tolerance = parse_double(key, value);
    else if (key == "l2") cfg.l2 = parse_double(key, value);
    else if (key == "condition") cfg.condition = parse_double(key, value);
    else if (key == "noise") cfg.noise = parse_double(key, value);
    else if (key == "feature_shift") cfg.feature_shift = parse_double(key, value);
    else if (key == "label_skew") cfg.label_skew = parse_double(key, value);
    else if (key == "jitter") cfg.jitter = parse_double(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "threads") cfg.threads = parse_int(key, value);
    else if (key == "csv_paths") {
      cfg.csv_paths.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ';')) {
        part = trim(part);
        if (!part.empty()) cfg.csv_paths.push_back(part);
      }
    }
  }
  return cfg;
}

std::map<std::string, std::string> render_config(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["mode"] = to_string(cfg.mode);
  kv["channel"] = to_string(cfg.channel);
  kv["objective"] = to_string(cfg.objective);
  kv["devices"] = std::to_string(cfg.devices);
  kv["dim"] = std::to_string(cfg.dim);
  kv["samples_per_device"] = std::to_string(cfg.samples_per_device);
  kv["max_rounds"] = std::to_string(cfg.max_rounds);
  kv["renewal_period"] = std::to_string(cfg.renewal_period);
  kv["budget_mean"] = format_double(cfg.budget_mean);
  kv["tolerance"] = format_double(cfg.tolerance);
  kv["l2"] = format_double(cfg.l2);
  kv["condition"] = format_double(cfg.condition);
  kv["noise"] = format_double(cfg.noise);
  kv["feature_shift"] = format_double(cfg.feature_shift);
  kv["label_skew"] = format_double(cfg.label_skew);
  kv["jitter"] = format_double(cfg.jitter);
  kv["seed"] = std::to_string(cfg.seed);
  kv["threads"] = std::to_string(cfg.threads);
  std::string joined;
  for (const std::string& p : cfg.csv_paths) {
    if (!joined.empty()) joined += ";";
    joined += p;
  }
  kv["csv_paths"] = joined;
  return kv;
}

}  // namespace qshed
