#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cltsls/dgp.hpp"
#include "cltsls/model.hpp"

namespace cltsls {

/// Reads a trial CSV: header row with cluster_id, z, d, y and optional
/// w_* (cluster-level, constant within cluster) and x_* (individual-level)
/// columns. Comma separated, '.' decimal. Returns a validated dataset.
TrialDataset read_trial_csv(std::istream& in, OutcomeKind kind);
TrialDataset ingest_csv(const std::filesystem::path& path, OutcomeKind kind);

void write_trial_csv(std::ostream& out, const TrialDataset& dataset);
/// cluster_id, n, z, compliers, psi, psi_cl
void write_cluster_truth_csv(std::ostream& out, const GeneratedTrial& trial);
/// row, cluster_id, compliance
void write_individual_truth_csv(std::ostream& out, const GeneratedTrial& trial);

/// 17 significant digits; parses back to the identical double.
std::string format_exact(double v);
/// Fixed 3 decimals for human-readable tables.
std::string format_pretty(double v);

}  // namespace cltsls
