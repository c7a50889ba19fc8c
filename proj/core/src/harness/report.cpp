#include "storyend/harness/report.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "storyend/common/digest.hpp"
#include "storyend/common/jsonl.hpp"
#include "storyend/corpus/csv.hpp"

namespace storyend::harness {

namespace {

constexpr std::string_view kReportFormat = "storyend-report v1";

struct Accumulator {
  std::size_t count = 0;
  double bert_f1 = 0, meteor = 0, bleu = 0, rouge1_f = 0, perplexity = 0;
  std::set<std::string> stories;
};

struct Row {
  std::string_view label;
  std::string_view key;
};

constexpr Row kRows[] = {
    {"BERT", "bert_f1"}, {"METEOR", "meteor"},         {"BLEU", "bleu"},
    {"ROUGE", "rouge1_f"}, {"Perplexity", "perplexity"}, {"Human Score", "human_score"},
};

std::optional<double> cell(const MetricReport& r, std::string_view key) {
  if (key == "bert_f1") return r.bert_f1;
  if (key == "meteor") return r.meteor;
  if (key == "bleu") return r.bleu;
  if (key == "rouge1_f") return r.rouge1_f;
  if (key == "perplexity") return r.perplexity;
  return r.human_score;
}

nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

Report aggregate_report(std::span<const ScoredRecord> scored, const std::map<std::string, double>& human_scores,
                        std::span<const GenerationFailure> failures, std::span<const std::string> expected_backends) {
  std::vector<std::string> order(expected_backends.begin(), expected_backends.end());
  std::map<std::string, Accumulator> acc;
  for (const auto& r : scored) {
    if (expected_backends.empty() && !acc.contains(r.backend_id)) order.push_back(r.backend_id);
    auto& a = acc[r.backend_id];
    ++a.count;
    a.bert_f1 += r.scores.bert_f1;
    a.meteor += r.scores.meteor;
    a.bleu += r.scores.bleu;
    a.rouge1_f += r.scores.rouge1_f;
    a.perplexity += r.scores.perplexity;
    a.stories.insert(r.story_id);
  }
  if (order.empty()) throw Error("cannot build a report from zero scored records");

  std::map<std::string, std::size_t> failure_counts;
  for (const auto& f : failures) ++failure_counts[f.backend_id];

  Report report;
  for (const auto& id : order) {
    const auto it = acc.find(id);
    if (it == acc.end() || it->second.count == 0) {
      throw Error(fmt::format("backend '{}' has no scored records", id));
    }
    const auto& a = it->second;
    const double n = static_cast<double>(a.count);
    std::string joined;
    for (const auto& s : a.stories) {
      joined += s;
      joined += '\n';
    }
    MetricReport m;
    m.backend_id = id;
    m.count = a.count;
    m.subset_digest = sha256_hex(joined).substr(0, 16);
    m.bert_f1 = a.bert_f1 / n;
    m.meteor = a.meteor / n;
    m.bleu = a.bleu / n;
    m.rouge1_f = a.rouge1_f / n;
    m.perplexity = a.perplexity / n;
    if (const auto h = human_scores.find(id); h != human_scores.end()) m.human_score = h->second;
    if (const auto f = failure_counts.find(id); f != failure_counts.end()) m.failures = f->second;
    report.rows.push_back(std::move(m));
  }

  report.notes.push_back("BERT is BERTScore F1; ROUGE is ROUGE-1 F1.");
  if (std::any_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.human_score.has_value(); })) {
    report.notes.push_back(
        "Human Score is the mean of coherence, narrative satisfaction, creativity, emotional impact and "
        "grammatical correctness, each rated 1-5; '-' marks a backend without ratings.");
  }
  std::set<std::string> digests;
  for (const auto& r : report.rows) digests.insert(r.subset_digest);
  if (digests.size() > 1) {
    std::string detail;
    for (const auto& r : report.rows) {
      if (!detail.empty()) detail += ", ";
      detail += fmt::format("{} n={} subset {}", r.backend_id, r.count, r.subset_digest);
    }
    report.notes.push_back(fmt::format("Backends were scored on different story subsets ({}); columns are not "
                                       "directly comparable.",
                                       detail));
  }
  for (const auto& r : report.rows) {
    if (r.failures > 0) {
      report.notes.push_back(fmt::format("{}: {} generation failure(s) excluded, see failures.jsonl.", r.backend_id,
                                         r.failures));
    }
  }
  return report;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::kTable;
  if (text == "delimited" || text == "csv") return ReportFormat::kDelimited;
  if (text == "json") return ReportFormat::kJson;
  throw ConfigError(fmt::format("unknown report format '{}' (expected table, delimited or json)", text));
}

std::string format_score(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  auto s = fmt::format("{:.3f}", value);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string render_report(const Report& report, ReportFormat format) {
  if (report.rows.empty()) throw Error("cannot render an empty report");
  if (format == ReportFormat::kJson) return to_json(report).dump(2) + "\n";

  const auto value_text = [](const std::optional<double>& v, std::string_view absent) {
    return v ? format_score(*v) : std::string(absent);
  };

  if (format == ReportFormat::kDelimited) {
    std::vector<std::string> header{"metric"};
    for (const auto& r : report.rows) header.push_back(r.backend_id);
    std::string out = corpus::csv_line(header);
    for (const auto& row : kRows) {
      std::vector<std::string> fields{std::string(row.label)};
      for (const auto& r : report.rows) fields.push_back(value_text(cell(r, row.key), ""));
      out += corpus::csv_line(fields);
    }
    std::vector<std::string> counts{"Records"};
    for (const auto& r : report.rows) counts.push_back(std::to_string(r.count));
    out += corpus::csv_line(counts);
    return out;
  }

  std::size_t label_width = std::string_view("Human Score").size();
  std::vector<std::size_t> widths;
  for (const auto& r : report.rows) {
    std::size_t w = std::max<std::size_t>(r.backend_id.size(), 8);
    for (const auto& row : kRows) w = std::max(w, value_text(cell(r, row.key), "-").size());
    widths.push_back(w);
  }
  std::string out = fmt::format("{:<{}}", "Metric", label_width);
  for (std::size_t c = 0; c < report.rows.size(); ++c) out += fmt::format("  {:>{}}", report.rows[c].backend_id, widths[c]);
  out += '\n';
  std::size_t rule = label_width;
  for (auto w : widths) rule += 2 + w;
  out += std::string(rule, '-') + '\n';
  for (const auto& row : kRows) {
    out += fmt::format("{:<{}}", row.label, label_width);
    for (std::size_t c = 0; c < report.rows.size(); ++c) {
      out += fmt::format("  {:>{}}", value_text(cell(report.rows[c], row.key), "-"), widths[c]);
    }
    out += '\n';
  }
  out += fmt::format("{:<{}}", "Records", label_width);
  for (std::size_t c = 0; c < report.rows.size(); ++c) out += fmt::format("  {:>{}}", report.rows[c].count, widths[c]);
  out += '\n';
  if (!report.notes.empty()) {
    out += '\n';
    for (const auto& n : report.notes) out += "Note: " + n + '\n';
  }
  return out;
}

void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& destination) {
  write_file_atomic(destination, render_report(report, format));
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({
        {"backend_id", r.backend_id},
        {"count", r.count},
        {"subset_digest", r.subset_digest},
        {"bert_f1", number(r.bert_f1)},
        {"meteor", number(r.meteor)},
        {"bleu", number(r.bleu)},
        {"rouge1_f", number(r.rouge1_f)},
        {"perplexity", number(r.perplexity)},
        {"human_score", r.human_score ? nlohmann::json(*r.human_score) : nlohmann::json()},
        {"failures", r.failures},
    });
  }
  return nlohmann::json{{"format", kReportFormat}, {"rows", rows}, {"notes", report.notes}};
}

Report report_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kReportFormat) throw Error("not a storyend report (format tag mismatch)");
  Report report;
  for (const auto& r : j.at("rows")) {
    MetricReport m;
    m.backend_id = r.at("backend_id").get<std::string>();
    m.count = r.at("count").get<std::size_t>();
    m.subset_digest = r.at("subset_digest").get<std::string>();
    m.bert_f1 = number_from(r.at("bert_f1"));
    m.meteor = number_from(r.at("meteor"));
    m.bleu = number_from(r.at("bleu"));
    m.rouge1_f = number_from(r.at("rouge1_f"));
    m.perplexity = number_from(r.at("perplexity"));
    if (!r.at("human_score").is_null()) m.human_score = r["human_score"].get<double>();
    m.failures = r.at("failures").get<std::size_t>();
    report.rows.push_back(std::move(m));
  }
  report.notes = j.at("notes").get<std::vector<std::string>>();
  return report;
}

}  // namespace storyend::harness
