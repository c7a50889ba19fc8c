#pragma once

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <vector>

#include <nlohmann/json.hpp>

namespace storyend {

/// Append-only line-delimited JSON file. Each record is written with a single
/// write call followed by a flush, so a reader sees either the whole line or,
/// after a crash, a trailing fragment without a newline.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path);
  ~JsonlAppender();
  JsonlAppender(const JsonlAppender&) = delete;
  JsonlAppender& operator=(const JsonlAppender&) = delete;

  void append(const nlohmann::json& record);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::mutex mutex_;
};

struct JsonlReadResult {
  std::vector<nlohmann::json> records;
  bool had_partial_tail = false;  // last line lacked a newline and was dropped
};

/// Reads every complete line. A missing file reads as empty. When `repair` is
/// set, an unterminated trailing fragment is truncated away on disk.
JsonlReadResult read_jsonl(const std::filesystem::path& path, bool repair = false);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace storyend
