#include "fixtures.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "storyend/corpus/synthetic.hpp"

namespace storyend::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = fs::temp_directory_path() / fmt::format("storyend-test-{:016x}", (std::uint64_t{rd()} << 32) | rd());
    if (fs::create_directory(candidate)) {
      path_ = std::move(candidate);
      return;
    }
  }
  throw std::runtime_error("could not create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

corpus::Story make_story(const std::string& id, const std::array<std::string, 5>& sentences,
                         const std::string& title) {
  corpus::Story s;
  s.id = id;
  s.title = title;
  s.sentences = sentences;
  return s;
}

fs::path write_synthetic_corpus(const fs::path& dir, std::size_t stories, std::uint64_t seed) {
  const auto path = dir / fmt::format("synthetic-{}-{}.csv", stories, seed);
  corpus::save_corpus(corpus::synthesize_corpus({stories, seed}), path);
  return path;
}

std::string run_config_text(const fs::path& corpus_path, const std::string& backends, std::uint64_t seed,
                            std::size_t test_limit) {
  return fmt::format(
      "[run]\nid = test\nseed = {}\nclock = fixed\nfixed_time = 2024-01-01T00:00:00.000Z\n\n"
      "[corpus]\npaths = {}\n\n[split]\ntrain_fraction = 4/5\ntest_limit = {}\n\n{}",
      seed, corpus_path.string(), test_limit, backends);
}

}  // namespace storyend::testing
