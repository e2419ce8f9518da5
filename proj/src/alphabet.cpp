#include "guesslab/alphabet.hpp"

#include <cmath>
#include <fstream>

#include "guesslab/error.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab {

Alphabet::Alphabet(std::string name, std::u32string letters, std::u32string lowercase,
                   char32_t whitespace)
    : name_(std::move(name)),
      letters_(std::move(letters)),
      lowercase_(std::move(lowercase)),
      whitespace_(whitespace) {
  if (letters_.empty()) throw Error(ErrorCode::invalid_input, "alphabet has no letters");
  if (!utf8::is_space(whitespace_)) {
    throw Error(ErrorCode::invalid_input, "alphabet whitespace symbol is not whitespace");
  }
  if (!lowercase_.empty() && lowercase_.size() != letters_.size()) {
    throw Error(ErrorCode::invalid_input, "alphabet lowercase companion must pair every letter");
  }
  symbols_ = letters_;
  symbols_.push_back(whitespace_);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const char32_t cp = symbols_[i];
    if (i + 1 < symbols_.size() && utf8::is_space(cp)) {
      throw Error(ErrorCode::invalid_input, "alphabet letters may not contain whitespace");
    }
    if (!index_.emplace(cp, i).second) {
      throw Error(ErrorCode::invalid_input, "duplicate alphabet symbol " + utf8::encode(cp));
    }
  }
  for (std::size_t i = 0; i < lowercase_.size(); ++i) {
    if (lowercase_[i] != letters_[i]) fold_.emplace(lowercase_[i], letters_[i]);
  }
}

Alphabet Alphabet::ukrainian() {
  return Alphabet("uk", U"АБВГҐДЕЄЖЗИІЇЙКЛМНОПРСТУФХЦЧШЩЬЮЯ",
                  U"абвгґдеєжзиіїйклмнопрстуфхцчшщьюя");
}

Alphabet Alphabet::english() {
  return Alphabet("en", U"ABCDEFGHIJKLMNOPQRSTUVWXYZ", U"abcdefghijklmnopqrstuvwxyz");
}

Alphabet Alphabet::from_json(const nlohmann::json& j) {
  try {
    const auto ws = utf8::decode(j.value("whitespace", std::string(" ")));
    if (ws.size() != 1) throw Error(ErrorCode::invalid_input, "alphabet whitespace must be one symbol");
    return Alphabet(j.value("name", std::string("custom")),
                    utf8::decode(j.at("letters").get<std::string>()),
                    utf8::decode(j.value("lowercase", std::string())), ws.front());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_input, std::string("bad alphabet definition: ") + e.what());
  }
}

Alphabet Alphabet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open alphabet file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, "alphabet file " + path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json Alphabet::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name_;
  j["letters"] = utf8::encode(letters_);
  j["lowercase"] = utf8::encode(lowercase_);
  j["whitespace"] = utf8::encode(whitespace_);
  j["size"] = size();
  return j;
}

std::optional<std::size_t> Alphabet::index_of(char32_t cp) const {
  if (auto it = index_.find(cp); it != index_.end()) return it->second;
  return std::nullopt;
}

char32_t Alphabet::fold(char32_t cp) const noexcept {
  if (auto it = fold_.find(cp); it != fold_.end()) return it->second;
  return cp;
}

double Alphabet::max_entropy() const noexcept { return std::log2(static_cast<double>(size())); }

}  // namespace guesslab
