#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

// Line-delimited JSON helpers plus the file read/write plumbing shared by
// the corpus and experiment code. Writers always emit "\n" line endings and
// ordered_json so output bytes are stable.

namespace tmkit::jsonl {

using ordered_json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

// Splits on '\n', tolerating a trailing newline and CRLF input. Blank lines
// are dropped so concatenated shards behave.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    if (end == content.size()) break;
    start = end + 1;
  }
  return lines;
}

// Parses each non-blank line as a JSON object. The 1-based line number is
// included in parse errors; malformed lines are contract violations, not
// skippable records.
inline void for_each_record(const std::filesystem::path& path,
                            const std::function<void(const ordered_json&, size_t)>& fn) {
  std::string content = read_file(path);
  size_t start = 0;
  size_t lineno = 0;
  while (start <= content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++lineno;
    if (!line.empty()) {
      ordered_json obj = ordered_json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": not a JSON object");
      }
      fn(obj, lineno);
    }
    if (end == content.size()) break;
    start = end + 1;
  }
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path, bool append = false) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
  }

  void write(const ordered_json& obj) {
    out_ << obj.dump() << '\n';
    if (!out_) throw std::runtime_error("write failed");
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

}  // namespace tmkit::jsonl
