#include <limits>

#include <fmt/format.h>

#include "storyend/common/jsonl.hpp"
#include "storyend/harness/run.hpp"

namespace storyend::harness {

namespace {

std::uint32_t flags_from_names(const nlohmann::json& names) {
  std::uint32_t flags = metrics::kNoFlags;
  for (const auto& n : names) {
    const auto s = n.get<std::string>();
    for (std::uint32_t bit = 1; bit != 0 && bit <= metrics::kReferenceShorterThanN; bit <<= 1) {
      const auto known = metrics::flag_names(bit);
      if (!known.empty() && known.front() == s) flags |= bit;
    }
  }
  return flags;
}

}  // namespace

nlohmann::json to_json(const ScoredRecord& r) {
  const auto& s = r.scores;
  nlohmann::json rouge_n = nlohmann::json::object();
  for (const auto& [n, f] : s.rouge_n_f) rouge_n[std::to_string(n)] = f;
  return nlohmann::json{
      {"story_id", r.story_id},
      {"backend_id", r.backend_id},
      {"bert_p", s.bert_p},
      {"bert_r", s.bert_r},
      {"bert_f1", s.bert_f1},
      {"meteor", s.meteor},
      {"bleu", s.bleu},
      {"rouge1_f", s.rouge1_f},
      {"rouge2_f", s.rouge2_f},
      {"rougeL_f", s.rougeL_f},
      {"rouge_n_f", rouge_n},
      {"perplexity", s.perplexity},
      {"flags", metrics::flag_names(s.flags)},
  };
}

ScoredRecord scored_record_from_json(const nlohmann::json& j) {
  ScoredRecord r;
  r.story_id = j.at("story_id").get<std::string>();
  r.backend_id = j.at("backend_id").get<std::string>();
  auto& s = r.scores;
  s.bert_p = j.at("bert_p").get<double>();
  s.bert_r = j.at("bert_r").get<double>();
  s.bert_f1 = j.at("bert_f1").get<double>();
  s.meteor = j.at("meteor").get<double>();
  s.bleu = j.at("bleu").get<double>();
  s.rouge1_f = j.at("rouge1_f").get<double>();
  s.rouge2_f = j.at("rouge2_f").get<double>();
  s.rougeL_f = j.at("rougeL_f").get<double>();
  for (const auto& [k, v] : j.at("rouge_n_f").items()) s.rouge_n_f[std::stoi(k)] = v.get<double>();
  // JSON has no infinity; an unbounded perplexity is written as null
  const auto& ppl = j.at("perplexity");
  s.perplexity = ppl.is_null() ? std::numeric_limits<double>::infinity() : ppl.get<double>();
  s.flags = flags_from_names(j.at("flags"));
  return r;
}

nlohmann::json to_json(const GenerationFailure& f) {
  return nlohmann::json{{"story_id", f.story_id},
                        {"backend_id", f.backend_id},
                        {"error", f.error},
                        {"attempts", f.attempts},
                        {"at", f.at}};
}

GenerationFailure generation_failure_from_json(const nlohmann::json& j) {
  return GenerationFailure{j.at("story_id").get<std::string>(), j.at("backend_id").get<std::string>(),
                           j.at("error").get<std::string>(), j.at("attempts").get<int>(),
                           j.at("at").get<std::string>()};
}

RecordFile read_generation_records(const std::filesystem::path& path, bool repair) {
  auto raw = read_jsonl(path, repair);
  RecordFile out;
  out.had_partial_tail = raw.had_partial_tail;
  out.records.reserve(raw.records.size());
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    try {
      out.records.push_back(backends::generation_record_from_json(raw.records[i]));
    } catch (const nlohmann::json::exception& e) {
      throw Error(fmt::format("{}: record {}: {}", path.string(), i + 1, e.what()));
    }
  }
  return out;
}

std::vector<ScoredRecord> read_scored_records(const std::filesystem::path& path) {
  std::vector<ScoredRecord> out;
  const auto raw = read_jsonl(path);
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    try {
      out.push_back(scored_record_from_json(raw.records[i]));
    } catch (const nlohmann::json::exception& e) {
      throw Error(fmt::format("{}: record {}: {}", path.string(), i + 1, e.what()));
    }
  }
  return out;
}

std::vector<GenerationFailure> read_failures(const std::filesystem::path& path) {
  std::vector<GenerationFailure> out;
  for (const auto& j : read_jsonl(path).records) out.push_back(generation_failure_from_json(j));
  return out;
}

}  // namespace storyend::harness
