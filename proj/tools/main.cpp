#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cltsls/analyze.hpp"
#include "cltsls/csv_io.hpp"
#include "cltsls/dgp.hpp"
#include "cltsls/error.hpp"
#include "cltsls/mc.hpp"
#include "cltsls/scenario.hpp"

namespace fs = std::filesystem;
using namespace cltsls;

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

void report_error(std::string_view code, std::string_view message) {
  std::cerr << "error code=" << code << " message=\"" << escape(message) << "\"\n";
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << contents;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

template <class T>
std::vector<T> parse_choices(const std::vector<std::string>& given, const std::vector<std::pair<std::string, T>>& table,
                             const char* flag) {
  std::vector<T> out;
  if (given.empty() || (given.size() == 1 && given[0] == "all")) {
    for (const auto& [_, v] : table) out.push_back(v);
    return out;
  }
  for (const auto& g : given) {
    bool found = false;
    for (const auto& [name, v] : table) {
      if (name == g) {
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
        found = true;
      }
    }
    if (!found) fail(ErrorCode::InvalidOptions, std::string("unknown value '") + g + "' for " + flag);
  }
  return out;
}

std::vector<std::string> with_prefix(const std::vector<std::string>& cols, const char* prefix) {
  std::vector<std::string> out;
  for (const auto& c : cols) out.push_back(c.rfind(prefix, 0) == 0 ? c : prefix + c);
  return out;
}

struct AnalyzeArgs {
  std::string input;
  std::string output_dir;
  std::string outcome_type;
  std::vector<std::string> weights, se, df, adjust_w, adjust_x;
  std::string icc = "auto";
  bool itt = false;
  double level = 0.95;
};

int run_analyze(const AnalyzeArgs& a) {
  OutcomeKind kind;
  if (a.outcome_type == "continuous") kind = OutcomeKind::Continuous;
  else if (a.outcome_type == "binary") kind = OutcomeKind::Binary;
  else fail(ErrorCode::InvalidOptions, "--outcome-type must be continuous or binary");

  AnalyzeRequest req;
  req.weights = parse_choices<Weighting>(
      a.weights, {{"none", Weighting::None}, {"cs", Weighting::ClusterSize}, {"mv", Weighting::MinVariance}}, "--weights");
  req.se_modes = parse_choices<SeMode>(a.se, {{"model", SeMode::ModelBased}, {"hw", SeMode::HuberWhite}}, "--se");
  req.df_modes = parse_choices<DfMode>(a.df, {{"normal", DfMode::NormalApprox}, {"ssdf", DfMode::SmallSample}}, "--df");
  req.w_columns = with_prefix(a.adjust_w, "w_");
  req.x_columns = with_prefix(a.adjust_x, "x_");
  req.include_itt = a.itt;
  req.level = a.level;
  if (!(a.level > 0.0 && a.level < 1.0)) fail(ErrorCode::InvalidOptions, "--level must lie in (0, 1)");
  if (a.icc != "auto") {
    double rho = 0.0;
    auto [p, ec] = std::from_chars(a.icc.data(), a.icc.data() + a.icc.size(), rho);
    if (ec != std::errc{} || p != a.icc.data() + a.icc.size() || !(rho >= 0.0 && rho <= 1.0)) {
      fail(ErrorCode::InvalidOptions, "--icc must be 'auto' or a number in [0, 1]");
    }
    req.icc = IccSource::fixed(rho);
  }

  const TrialDataset ds = ingest_csv(a.input, kind);
  const auto rows = analyze(ds, req);

  std::ostringstream csv, table;
  write_results_csv(csv, rows);
  write_results_table(table, rows);
  if (a.output_dir.empty()) {
    std::cout << table.str();
  } else {
    const fs::path dir = prepare_dir(a.output_dir);
    write_file(dir / "results.csv", csv.str());
    write_file(dir / "results.txt", table.str());
  }
  return 0;
}

struct SimulateArgs {
  std::string scenario;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  int threads = 1;
};

int run_simulate(const SimulateArgs& a) {
  if (a.threads < 1) fail(ErrorCode::InvalidOptions, "--threads must be at least 1");
  const auto scenarios = load_scenarios(a.scenario);
  const fs::path root = prepare_dir(a.output_dir);
  for (const auto& sc : scenarios) {
    const int L = a.replicates.value_or(sc.replicates.value_or(500));
    const std::uint64_t seed = a.seed.value_or(sc.seed.value_or(20240101));
    if (L < 1) fail(ErrorCode::InvalidOptions, "replicates must be at least 1");

    const fs::path dir = scenarios.size() == 1 ? root : prepare_dir((root / sc.name).string());
    StudyOptions opts;
    opts.threads = a.threads;
    const McReport report = run_study(sc.config, L, all_variants(), seed, opts);

    std::ostringstream csv, json;
    write_report_csv(csv, report);
    write_report_json(json, report);
    write_file(dir / "report.csv", csv.str());
    write_file(dir / "report.json", json.str());
    write_file(dir / "scenario.txt", "[" + sc.name + "]\n" + scenario_text(sc.config) + "replicates = " +
                                         std::to_string(L) + "\nseed = " + std::to_string(seed) + "\n");
    write_file(dir / "seed", std::to_string(seed) + "\n");
    std::cerr << sc.name << ": " << report.replicates << " retained of " << report.attempts << " attempts\n";
  }
  return 0;
}

struct GenerateArgs {
  std::string scenario;
  std::string output_dir;
  std::uint64_t seed = 1;
};

int run_generate(const GenerateArgs& a) {
  const auto scenarios = load_scenarios(a.scenario);
  const fs::path root = prepare_dir(a.output_dir);
  for (const auto& sc : scenarios) {
    const fs::path dir = scenarios.size() == 1 ? root : prepare_dir((root / sc.name).string());
    const std::uint64_t seed = sc.seed.value_or(a.seed);
    const DgpPlan plan = prepare(sc.config);
    const GeneratedTrial trial = generate(plan, seed);

    std::ostringstream data, clusters, individuals;
    write_trial_csv(data, trial.dataset);
    write_cluster_truth_csv(clusters, trial);
    write_individual_truth_csv(individuals, trial);
    write_file(dir / "trial.csv", data.str());
    write_file(dir / "truth_clusters.csv", clusters.str());
    write_file(dir / "truth_individuals.csv", individuals.str());

    nlohmann::ordered_json j;
    j["scenario"] = scenario_text(sc.config);
    j["seed"] = seed;
    j["lambda0"] = plan.lambda0;
    j["sigma2_cluster"] = plan.variance.sigma2_cluster;
    j["sigma2_error"] = plan.variance.sigma2_error;
    j["true_population_late"] = trial.true_population_late;
    j["true_cl_late"] = trial.true_cl_late;
    j["weak_instrument_screen_passed"] = screen_weak_instrument(trial);
    write_file(dir / "truth.json", j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-level two-stage least squares for cluster randomised trials"};
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Estimate LATE (and optionally ITT) from a trial CSV");
  analyze_cmd->add_option("--input", an.input, "Trial CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--output-dir", an.output_dir, "Write results.csv and results.txt here (default: stdout table)");
  analyze_cmd->add_option("--outcome-type", an.outcome_type, "continuous|binary")->required();
  analyze_cmd->add_option("--weights", an.weights, "none,cs,mv (default all)")->delimiter(',');
  analyze_cmd->add_option("--se", an.se, "model,hw (default all)")->delimiter(',');
  analyze_cmd->add_option("--df", an.df, "normal,ssdf (default all)")->delimiter(',');
  analyze_cmd->add_option("--adjust-w", an.adjust_w, "Cluster-level covariate columns")->delimiter(',');
  analyze_cmd->add_option("--adjust-x", an.adjust_x, "Individual-level covariate columns")->delimiter(',');
  analyze_cmd->add_option("--icc", an.icc, "auto or a fixed value for MV weights");
  analyze_cmd->add_flag("--itt", an.itt, "Also report the ITT rows");
  analyze_cmd->add_option("--level", an.level, "Confidence level");

  SimulateArgs si;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a Monte Carlo study over all 48 estimator variants");
  simulate_cmd->add_option("--scenario", si.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--output-dir", si.output_dir, "Output directory")->required();
  simulate_cmd->add_option("--seed", si.seed, "Master seed (overrides the scenario file)");
  simulate_cmd->add_option("--replicates", si.replicates, "Retained datasets per scenario");
  simulate_cmd->add_option("--threads", si.threads, "Worker threads");

  GenerateArgs ge;
  auto* generate_cmd = app.add_subcommand("generate", "Draw one trial and its truth sidecar");
  generate_cmd->add_option("--scenario", ge.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  generate_cmd->add_option("--output-dir", ge.output_dir, "Output directory")->required();
  generate_cmd->add_option("--seed", ge.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("InvalidOptions", e.what());
    return 2;
  }

  try {
    if (*analyze_cmd) return run_analyze(an);
    if (*simulate_cmd) return run_simulate(si);
    return run_generate(ge);
  } catch (const Error& e) {
    report_error(to_string(e.code()), e.what());
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    report_error("Internal", e.what());
    return 3;
  }
}
