#include "cltsls/scenario.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "cltsls/csv_io.hpp"
#include "cltsls/error.hpp"

namespace cltsls {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct RawBlock {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<int> lines;
};

double to_double(const std::string& v, const std::string& key, int line) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorCode::InvalidConfig, "line " + std::to_string(line) + ": '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

long long to_integer(const std::string& v, const std::string& key, int line) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorCode::InvalidConfig, "line " + std::to_string(line) + ": '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

NamedScenario build(const RawBlock& block) {
  NamedScenario out;
  out.name = block.name;
  ScenarioConfig& c = out.config;

  std::map<std::string, std::pair<std::string, int>> kv;
  for (std::size_t i = 0; i < block.entries.size(); ++i) {
    const auto& [k, v] = block.entries[i];
    if (!kv.emplace(k, std::pair{v, block.lines[i]}).second) {
      fail(ErrorCode::InvalidConfig, "line " + std::to_string(block.lines[i]) + ": duplicate key '" + k + "'");
    }
  }
  auto take = [&](const std::string& key) -> std::optional<std::pair<std::string, int>> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto val = it->second;
    kv.erase(it);
    return val;
  };

  if (auto v = take("adherence")) {
    if (v->first == "cluster") c.adherence = Adherence::Cluster;
    else if (v->first == "individual") c.adherence = Adherence::Individual;
    else fail(ErrorCode::InvalidConfig, "line " + std::to_string(v->second) + ": adherence must be cluster|individual");
  }
  if (auto v = take("clusters")) c.n_clusters = static_cast<int>(to_integer(v->first, "clusters", v->second));
  c.pi = c.adherence == Adherence::Cluster ? 0.60 : 0.85;
  c.size_mean = 1000.0 / c.n_clusters;
  if (auto v = take("effects")) {
    if (v->first != "small" && v->first != "large") {
      fail(ErrorCode::InvalidConfig, "line " + std::to_string(v->second) + ": effects must be small|large");
    }
    const ScenarioConfig preset =
        make_scenario(c.adherence, c.n_clusters, v->first == "large" ? EffectLevel::Large : EffectLevel::Small, c.rho_y, c.beta_cz);
    c.lambda_w = preset.lambda_w;
    c.lambda_x = preset.lambda_x;
    c.beta_w = preset.beta_w;
    c.beta_x = preset.beta_x;
  }
  if (auto v = take("size_dist")) {
    if (v->first == "poisson") c.size_dist = SizeDistribution::Poisson;
    else if (v->first == "pareto") c.size_dist = SizeDistribution::Pareto;
    else fail(ErrorCode::InvalidConfig, "line " + std::to_string(v->second) + ": size_dist must be poisson|pareto");
  }
  if (auto v = take("pareto_min")) c.pareto_min = static_cast<int>(to_integer(v->first, "pareto_min", v->second));
  if (auto v = take("replicates")) out.replicates = static_cast<int>(to_integer(v->first, "replicates", v->second));
  if (auto v = take("seed")) out.seed = static_cast<std::uint64_t>(to_integer(v->first, "seed", v->second));

  const std::map<std::string, double ScenarioConfig::*> reals = {
      {"size_mean", &ScenarioConfig::size_mean}, {"pareto_shape", &ScenarioConfig::pareto_shape},
      {"pareto_scale", &ScenarioConfig::pareto_scale}, {"rho_y", &ScenarioConfig::rho_y},
      {"rho_x", &ScenarioConfig::rho_x}, {"rho_c", &ScenarioConfig::rho_c}, {"pi", &ScenarioConfig::pi},
      {"lambda_w", &ScenarioConfig::lambda_w}, {"lambda_x", &ScenarioConfig::lambda_x},
      {"beta_0", &ScenarioConfig::beta_0}, {"beta_c", &ScenarioConfig::beta_c}, {"beta_cz", &ScenarioConfig::beta_cz},
      {"beta_w", &ScenarioConfig::beta_w}, {"beta_x", &ScenarioConfig::beta_x},
      {"sigma2_w", &ScenarioConfig::sigma2_w}, {"sigma2_x", &ScenarioConfig::sigma2_x}};
  for (const auto& [key, member] : reals) {
    if (auto v = take(key)) c.*member = to_double(v->first, key, v->second);
  }
  if (!kv.empty()) {
    const auto& [key, val] = *kv.begin();
    fail(ErrorCode::InvalidConfig, "line " + std::to_string(val.second) + ": unknown key '" + key + "'");
  }
  c.check();
  return out;
}

}  // namespace

std::vector<NamedScenario> parse_scenarios(std::istream& in) {
  std::vector<RawBlock> blocks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": malformed block header");
      }
      blocks.push_back({trim(line.substr(1, line.size() - 2)), {}, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    if (blocks.empty()) blocks.push_back({"scenario", {}, {}});
    blocks.back().entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    blocks.back().lines.push_back(line_no);
  }
  if (blocks.empty()) fail(ErrorCode::InvalidConfig, "scenario file defines no scenario");
  std::vector<NamedScenario> out;
  for (const auto& b : blocks) {
    for (const auto& prev : out) {
      if (prev.name == b.name) fail(ErrorCode::InvalidConfig, "duplicate scenario name '" + b.name + "'");
    }
    out.push_back(build(b));
  }
  return out;
}

std::vector<NamedScenario> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open scenario file '" + path + "'");
  return parse_scenarios(in);
}

std::string scenario_text(const ScenarioConfig& c) {
  std::ostringstream o;
  o << "adherence = " << to_string(c.adherence) << '\n'
    << "clusters = " << c.n_clusters << '\n'
    << "size_dist = " << to_string(c.size_dist) << '\n'
    << "size_mean = " << format_exact(c.size_mean) << '\n'
    << "pareto_shape = " << format_exact(c.pareto_shape) << '\n'
    << "pareto_scale = " << format_exact(c.pareto_scale) << '\n'
    << "pareto_min = " << c.pareto_min << '\n'
    << "rho_y = " << format_exact(c.rho_y) << '\n'
    << "rho_x = " << format_exact(c.rho_x) << '\n'
    << "rho_c = " << format_exact(c.rho_c) << '\n'
    << "pi = " << format_exact(c.pi) << '\n'
    << "lambda_w = " << format_exact(c.lambda_w) << '\n'
    << "lambda_x = " << format_exact(c.lambda_x) << '\n'
    << "beta_0 = " << format_exact(c.beta_0) << '\n'
    << "beta_c = " << format_exact(c.beta_c) << '\n'
    << "beta_cz = " << format_exact(c.beta_cz) << '\n'
    << "beta_w = " << format_exact(c.beta_w) << '\n'
    << "beta_x = " << format_exact(c.beta_x) << '\n'
    << "sigma2_w = " << format_exact(c.sigma2_w) << '\n'
    << "sigma2_x = " << format_exact(c.sigma2_x) << '\n';
  return o.str();
}

}  // namespace cltsls
