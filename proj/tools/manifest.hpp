#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace energyate::cli {

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// One per run: command, config echo, seed, hashed inputs, outputs, timing.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  nlohmann::json& summary() { return summary_; }

  /// Writes manifest.json into `dir` and returns its path.
  std::filesystem::path write(const std::filesystem::path& dir, const std::string& status) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::string> outputs_;
  nlohmann::json summary_ = nlohmann::json::object();
  std::chrono::steady_clock::time_point start_;
};

}  // namespace energyate::cli
