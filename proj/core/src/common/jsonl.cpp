#include "storyend/common/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "storyend/common/error.hpp"

namespace storyend {

namespace fs = std::filesystem;

JsonlAppender::JsonlAppender(const fs::path& path) : path_(path) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  file_ = std::fopen(path_.c_str(), "ab");
  if (file_ == nullptr) throw IoError("cannot open '" + path_.string() + "' for appending");
}

JsonlAppender::~JsonlAppender() {
  if (file_ != nullptr) std::fclose(file_);
}

void JsonlAppender::append(const nlohmann::json& record) {
  std::string line = record.dump();
  line.push_back('\n');
  std::lock_guard lock(mutex_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw IoError("write to '" + path_.string() + "' failed");
  }
}

JsonlReadResult read_jsonl(const fs::path& path, bool repair) {
  JsonlReadResult result;
  if (!fs::exists(path)) return result;
  const std::string content = read_file(path);
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) {
      result.had_partial_tail = true;
      if (repair) fs::resize_file(path, start);
      break;
    }
    ++line_no;
    std::string_view line(content.data() + start, nl - start);
    if (!line.empty()) {
      try {
        result.records.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
      }
    }
    start = nl + 1;
  }
  return result;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace '" + path.string() + "': " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace storyend
