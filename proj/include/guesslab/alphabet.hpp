#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

namespace guesslab {

/// Ordered set of guessable symbols: the letters of a language in one case
/// plus a single whitespace symbol. K = size() drives the entropy ceiling.
///
/// The optional lowercase companion maps each letter's other case onto the
/// canonical symbol, so text can be folded before masking.
class Alphabet {
 public:
  Alphabet(std::string name, std::u32string letters, std::u32string lowercase,
           char32_t whitespace = U' ');

  /// 33 Ukrainian letters (upper case) + space, K = 34.
  static Alphabet ukrainian();
  /// 26 Latin letters (upper case) + space, K = 27.
  static Alphabet english();

  /// {"name": ..., "letters": ..., "lowercase": ..., "whitespace": " "}
  static Alphabet from_json(const nlohmann::json& j);
  static Alphabet load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  const std::string& name() const noexcept { return name_; }
  const std::u32string& symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  char32_t whitespace() const noexcept { return whitespace_; }

  bool contains(char32_t cp) const noexcept { return index_.contains(cp); }
  bool is_letter(char32_t cp) const noexcept { return cp != whitespace_ && contains(cp); }
  std::optional<std::size_t> index_of(char32_t cp) const;

  /// Maps a companion-case letter onto its canonical symbol; identity otherwise.
  char32_t fold(char32_t cp) const noexcept;

  /// log2(K)
  double max_entropy() const noexcept;

 private:
  std::string name_;
  std::u32string letters_;
  std::u32string lowercase_;
  char32_t whitespace_;
  std::u32string symbols_;
  std::unordered_map<char32_t, std::size_t> index_;
  std::unordered_map<char32_t, char32_t> fold_;
};

}  // namespace guesslab
