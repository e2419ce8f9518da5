#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

namespace guesslab {

/// Calls `fn` for every non-blank line of a JSON Lines file, with its 1-based line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn);

/// Append-only JSON Lines writer. Every append is flushed before returning.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool truncate = false);

  void append(const nlohmann::ordered_json& record);
  void append_line(const std::string& line);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::string dump_line(const nlohmann::ordered_json& record);

std::string read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

}  // namespace guesslab
