#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "storyend/corpus/corpus.hpp"

namespace storyend::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

corpus::Story make_story(const std::string& id, const std::array<std::string, 5>& sentences,
                         const std::string& title = "Title");

/// Synthetic corpus saved as canonical CSV; returns the file path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, std::size_t stories,
                                             std::uint64_t seed = 0);

/// INI text for a run over `corpus_path` with a fixed clock; `backends` holds
/// the [backend:ID] sections.
std::string run_config_text(const std::filesystem::path& corpus_path, const std::string& backends,
                            std::uint64_t seed = 7, std::size_t test_limit = 0);

}  // namespace storyend::testing
