#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cltsls/dgp.hpp"

namespace cltsls {

struct NamedScenario {
  std::string name;
  ScenarioConfig config;
  std::optional<int> replicates;
  std::optional<std::uint64_t> seed;
};

/// Flat `key = value` scenario file. `[name]` starts a new block; lines
/// before the first header form a block named "scenario". `#` starts a
/// comment. `effects = small|large` applies the preset effect levels before
/// explicit keys; pi and size_mean default from adherence and clusters.
std::vector<NamedScenario> parse_scenarios(std::istream& in);
std::vector<NamedScenario> load_scenarios(const std::string& path);

/// Canonical key = value echo of a config (every field, fixed order).
std::string scenario_text(const ScenarioConfig& config);

}  // namespace cltsls
