#include "cltsls/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>
#include <vector>

#include "cltsls/error.hpp"

namespace cltsls {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ": column '" + std::string(column) +
                                    "' has non-numeric value '" + std::string(field) + "'");
  }
  return value;
}

int parse_binary(std::string_view field, std::size_t line_no, std::string_view column) {
  const double v = parse_number(field, line_no, column);
  if (v != 0.0 && v != 1.0) {
    fail(ErrorCode::NonBinaryTreatment,
         "row " + std::to_string(line_no) + ": column '" + std::string(column) + "' must be 0 or 1");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string format_exact(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_pretty(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

TrialDataset read_trial_csv(std::istream& in, OutcomeKind kind) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(ErrorCode::SchemaMismatch, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const std::vector<std::string_view> header = split(line);
  int col_id = -1, col_z = -1, col_d = -1, col_y = -1;
  std::vector<int> w_cols, x_cols;
  TrialDataset ds;
  ds.outcome_kind = kind;
  std::set<std::string, std::less<>> seen;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string_view name = header[static_cast<std::size_t>(c)];
    if (!seen.insert(std::string(name)).second) fail(ErrorCode::SchemaMismatch, "duplicate column '" + std::string(name) + "'");
    if (name == "cluster_id") col_id = c;
    else if (name == "z") col_z = c;
    else if (name == "d") col_d = c;
    else if (name == "y") col_y = c;
    else if (name.starts_with("w_") && name.size() > 2) {
      w_cols.push_back(c);
      ds.w_names.emplace_back(name);
    } else if (name.starts_with("x_") && name.size() > 2) {
      x_cols.push_back(c);
      ds.x_names.emplace_back(name);
    } else {
      fail(ErrorCode::SchemaMismatch, "unexpected column '" + std::string(name) + "'");
    }
  }
  for (auto [col, name] : {std::pair{col_id, "cluster_id"}, {col_z, "z"}, {col_d, "d"}, {col_y, "y"}}) {
    if (col < 0) fail(ErrorCode::SchemaMismatch, std::string("required column '") + name + "' missing");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string_view> fields = split(line);
    if (fields.size() != header.size()) {
      fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                      " fields, found " + std::to_string(fields.size()));
    }
    IndividualRecord r;
    r.cluster_id = std::string(fields[static_cast<std::size_t>(col_id)]);
    if (r.cluster_id.empty()) fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ": empty cluster_id");
    r.z = parse_binary(fields[static_cast<std::size_t>(col_z)], line_no, "z");
    r.d = parse_binary(fields[static_cast<std::size_t>(col_d)], line_no, "d");
    r.y = parse_number(fields[static_cast<std::size_t>(col_y)], line_no, "y");
    if (kind == OutcomeKind::Binary && r.y != 0.0 && r.y != 1.0) {
      fail(ErrorCode::NonBinaryOutcomeForBinaryKind, "row " + std::to_string(line_no) + ": binary outcome must be 0 or 1");
    }
    r.x.reserve(x_cols.size());
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      r.x.push_back(parse_number(fields[static_cast<std::size_t>(x_cols[k])], line_no, ds.x_names[k]));
    }
    if (!w_cols.empty()) {
      std::vector<double> w;
      w.reserve(w_cols.size());
      for (std::size_t k = 0; k < w_cols.size(); ++k) {
        w.push_back(parse_number(fields[static_cast<std::size_t>(w_cols[k])], line_no, ds.w_names[k]));
      }
      auto [it, inserted] = ds.cluster_covariates.emplace(r.cluster_id, w);
      if (!inserted && it->second != w) {
        fail(ErrorCode::NonConstantClusterCovariate,
             "row " + std::to_string(line_no) + ": cluster-level covariate varies within cluster '" + r.cluster_id + "'");
      }
    }
    ds.records.push_back(std::move(r));
  }
  return validate(std::move(ds));
}

TrialDataset ingest_csv(const std::filesystem::path& path, OutcomeKind kind) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return read_trial_csv(in, kind);
}

void write_trial_csv(std::ostream& out, const TrialDataset& ds) {
  out << "cluster_id,z,d,y";
  for (const auto& w : ds.w_names) out << ',' << w;
  for (const auto& x : ds.x_names) out << ',' << x;
  out << '\n';
  for (const auto& r : ds.records) {
    out << r.cluster_id << ',' << r.z << ',' << r.d << ',' << format_exact(r.y);
    if (!ds.w_names.empty()) {
      for (double w : ds.cluster_covariates.at(r.cluster_id)) out << ',' << format_exact(w);
    }
    for (double x : r.x) out << ',' << format_exact(x);
    out << '\n';
  }
}

void write_cluster_truth_csv(std::ostream& out, const GeneratedTrial& trial) {
  out << "cluster_id,n,z,compliers,psi,psi_cl\n";
  // Truth vectors follow label order, which is also lexicographic order.
  std::vector<std::string> ids;
  std::vector<int> n, z;
  for (const auto& r : trial.dataset.records) {
    if (ids.empty() || ids.back() != r.cluster_id) {
      ids.push_back(r.cluster_id);
      n.push_back(0);
      z.push_back(r.z);
    }
    ++n.back();
  }
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out << ids[j] << ',' << n[j] << ',' << z[j] << ',' << trial.compliers[j] << ',' << format_exact(trial.psi[j]) << ','
        << format_exact(trial.psi_cl[j]) << '\n';
  }
}

void write_individual_truth_csv(std::ostream& out, const GeneratedTrial& trial) {
  out << "row,cluster_id,compliance\n";
  for (std::size_t i = 0; i < trial.dataset.records.size(); ++i) {
    out << i + 1 << ',' << trial.dataset.records[i].cluster_id << ',' << to_string(trial.compliance[i]) << '\n';
  }
}

}  // namespace cltsls
