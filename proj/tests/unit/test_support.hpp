#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "guesslab/corpus.hpp"
#include "guesslab/observation.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab::test {

inline std::filesystem::path fixture_dir() { return GUESSLAB_FIXTURE_DIR; }
inline std::filesystem::path surrogate_dir() { return fixture_dir() / "surrogate"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("guesslab-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A normalized sentence of exactly `length` characters over the Ukrainian alphabet.
inline SentenceRecord make_sentence(std::string id, std::size_t length, std::uint64_t seed = 1) {
  static const std::u32string letters = U"АБВГҐДЕЄЖЗИІЇЙКЛМНОПРСТУФХЦЧШЩЬЮЯ";
  std::mt19937_64 rng(seed);
  std::u32string text;
  for (std::size_t i = 0; i < length; ++i) {
    // no leading/trailing/double spaces
    const bool space = i > 0 && i + 1 < length && text.back() != U' ' && rng() % 6 == 0;
    text.push_back(space ? U' ' : letters[rng() % letters.size()]);
  }
  SentenceRecord s;
  s.id = std::move(id);
  const std::string bytes = utf8::encode(text);
  s.normalized_text = bytes;
  s.raw_text = bytes;
  s.length = length;
  s.source_article = "a1";
  return s;
}

inline Observation obs(std::string session, int position, int attempts) {
  Observation o;
  o.session_id = std::move(session);
  o.participant_id = "p";
  o.sentence_id = "x";
  o.position = position;
  o.attempts = attempts;
  return o;
}

}  // namespace guesslab::test
