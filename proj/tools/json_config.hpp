#pragma once

// Lets `--config file.json` supply any flag. Top-level keys name options of
// the root app or of the selected subcommand; an object keyed by a
// subcommand name scopes its entries to that subcommand. Flags given on the
// command line win because CLI11 only fills options that are still empty.

#include <istream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace energyate::cli {

class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j;
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& r = opt->results();
        j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
               std::vector<CLI::ConfigItem>& items) const {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto scoped = parents;
        scoped.push_back(key);
        collect(value, scoped, items);
        continue;
      }
      CLI::ConfigItem item;
      item.name = key;
      item.parents = parents.empty() ? route(key) : parents;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  // Flat keys belong to the root unless only the selected subcommand knows them.
  std::vector<std::string> route(const std::string& key) const {
    if (root_->get_option_no_throw("--" + key) != nullptr) return {};
    for (const CLI::App* sub : root_->get_subcommands()) {
      if (sub->get_option_no_throw("--" + key) != nullptr) return {sub->get_name()};
    }
    return {};
  }

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  const CLI::App* root_;
};

}  // namespace energyate::cli
