#include "guesslab/jsonl.hpp"

#include <array>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "guesslab/error.hpp"

namespace guesslab {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::invalid_input,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fn(j, lineno);
  }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool truncate)
    : path_(path), out_(path, truncate ? std::ios::trunc : std::ios::app) {
  if (!out_) throw Error(ErrorCode::storage_unavailable, "cannot open " + path.string() + " for writing");
}

void JsonlWriter::append(const nlohmann::ordered_json& record) { append_line(dump_line(record)); }

void JsonlWriter::append_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::storage_unavailable, "write failed on " + path_.string());
}

std::string dump_line(const nlohmann::ordered_json& record) {
  return record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0F]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace guesslab
