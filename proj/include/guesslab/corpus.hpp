#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "guesslab/alphabet.hpp"

namespace guesslab {

using Date = std::chrono::year_month_day;

/// Strict ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);
std::string format_date(const Date& date);

struct RawArticle {
  std::string id;
  std::string text;
  Date published_date;
};

struct SentenceRecord {
  std::string id;
  std::string normalized_text;
  std::string raw_text;
  std::size_t length = 0;  // code points of normalized_text
  std::string source_article;

  bool operator==(const SentenceRecord&) const = default;
};

struct LengthRange {
  std::size_t min_len = 120;
  std::size_t max_len = 200;
};

// Each of '.', '!', '?' closes a sentence. Pieces are trimmed and empty ones
// dropped; trailing text without a terminator is kept as the last sentence.
std::vector<std::string> split_sentences(std::string_view text);

// true = keep. Rejects any ASCII Latin letter or decimal digit.
bool reject_foreign(std::string_view sentence);

// Case-folds onto the alphabet, masks every other character to whitespace,
// collapses whitespace runs and trims. Idempotent.
std::string normalize(std::string_view sentence, const Alphabet& alphabet);

// split -> reject -> normalize -> length filter, in article then sentence order.
// Record ids are "<article>-s<NNN>" with NNN the sentence's index within the
// article's split output. Throws EmptyPool if nothing survives.
std::vector<SentenceRecord> build_pool(std::span<const RawArticle> articles,
                                       const Alphabet& alphabet, LengthRange range = {});

struct ManifestEntry {
  std::string id;
  Date published_date;
};

/// filename -> {id, published_date}
std::map<std::string, ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Loads every regular file in `dir` (sorted by filename) that the manifest names.
/// Files without a manifest entry are an error; the manifest itself is skipped.
std::vector<RawArticle> load_articles(const std::filesystem::path& dir,
                                      const std::filesystem::path& manifest);

nlohmann::ordered_json to_json(const SentenceRecord& record);
SentenceRecord sentence_from_json(const nlohmann::json& j);

void write_pool(std::ostream& out, std::span<const SentenceRecord> pool);
void write_pool(const std::filesystem::path& path, std::span<const SentenceRecord> pool);
std::vector<SentenceRecord> read_pool(const std::filesystem::path& path);

}  // namespace guesslab
