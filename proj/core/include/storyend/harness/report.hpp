#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyend/harness/run.hpp"

namespace storyend::harness {

/// Per-backend means over scored records.
struct MetricReport {
  std::string backend_id;
  std::size_t count = 0;
  std::string subset_digest;  // identifies the set of story ids scored
  double bert_f1 = 0.0;
  double meteor = 0.0;
  double bleu = 0.0;
  double rouge1_f = 0.0;
  double perplexity = 0.0;
  std::optional<double> human_score;
  std::size_t failures = 0;

  bool operator==(const MetricReport&) const = default;
};

struct Report {
  std::vector<MetricReport> rows;  // backends in first-seen order
  std::vector<std::string> notes;

  bool operator==(const Report&) const = default;
};

/// Arithmetic means per backend. `expected_backends`, when given, fixes the
/// column order and every listed backend must have at least one record.
/// Human scores are attached where present and left absent otherwise.
Report aggregate_report(std::span<const ScoredRecord> scored, const std::map<std::string, double>& human_scores = {},
                        std::span<const GenerationFailure> failures = {},
                        std::span<const std::string> expected_backends = {});

enum class ReportFormat { kTable, kDelimited, kJson };

ReportFormat parse_report_format(std::string_view text);

/// Three decimals, e.g. 140.0536 -> "140.054".
std::string format_score(double value);

/// Rows BERT, METEOR, BLEU, ROUGE, Perplexity, Human Score, then record counts.
std::string render_report(const Report& report, ReportFormat format);
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& destination);

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

}  // namespace storyend::harness
