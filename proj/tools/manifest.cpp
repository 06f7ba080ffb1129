#include "manifest.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "energyate/error.hpp"

namespace energyate::cli {

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::uint64_t h = 14695981039346656037ULL;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunManifest::RunManifest(std::string command, std::uint64_t seed)
    : command_(std::move(command)), seed_(seed), start_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()}, {"fnv1a64", file_hash(path)}});
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

std::filesystem::path RunManifest::write(const std::filesystem::path& dir, const std::string& status) const {
  nlohmann::json j;
  j["command"] = command_;
  j["status"] = status;
  j["seed"] = seed_;
  j["config"] = config_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["summary"] = summary_;
  j["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  std::filesystem::create_directories(dir);
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  return path;
}

}  // namespace energyate::cli
