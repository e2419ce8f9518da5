#include "guesslab/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab {

namespace fs = std::filesystem;

Date parse_date(std::string_view text) {
  auto bad = [&] { return Error(ErrorCode::invalid_input, "not an ISO-8601 date: '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc() || ptr != text.data() + pos + len) throw bad();
    return v;
  };
  const Date d{std::chrono::year{num(0, 4)}, std::chrono::month{static_cast<unsigned>(num(5, 2))},
               std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!d.ok()) throw bad();
  return d;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const std::u32string cps = utf8::decode(text);
  std::size_t begin = 0;
  auto flush = [&](std::size_t end) {
    const auto piece = utf8::trim(std::u32string_view(cps).substr(begin, end - begin));
    if (!piece.empty()) out.push_back(utf8::encode(piece));
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == U'.' || cps[i] == U'!' || cps[i] == U'?') {
      flush(i);
      begin = i + 1;
    }
  }
  flush(cps.size());
  return out;
}

bool reject_foreign(std::string_view sentence) {
  return std::none_of(sentence.begin(), sentence.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
  });
}

std::string normalize(std::string_view sentence, const Alphabet& alphabet) {
  const char32_t ws = alphabet.whitespace();
  std::u32string out;
  bool pending_space = false;
  for (char32_t cp : utf8::decode(sentence)) {
    const char32_t folded = alphabet.fold(cp);
    if (alphabet.is_letter(folded)) {
      if (pending_space && !out.empty()) out.push_back(ws);
      pending_space = false;
      out.push_back(folded);
    } else {
      pending_space = true;
    }
  }
  return utf8::encode(out);
}

std::vector<SentenceRecord> build_pool(std::span<const RawArticle> articles,
                                       const Alphabet& alphabet, LengthRange range) {
  if (range.min_len > range.max_len) {
    throw Error(ErrorCode::invalid_input, "min_len exceeds max_len");
  }
  std::vector<SentenceRecord> pool;
  for (const auto& article : articles) {
    const auto sentences = split_sentences(article.text);
    for (std::size_t idx = 0; idx < sentences.size(); ++idx) {
      const auto& raw = sentences[idx];
      if (!reject_foreign(raw)) continue;
      std::string norm = normalize(raw, alphabet);
      const std::size_t len = utf8::length(norm);
      if (len < range.min_len || len > range.max_len) continue;
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "-s%03zu", idx);
      pool.push_back({article.id + suffix, std::move(norm), raw, len, article.id});
    }
  }
  if (pool.empty()) {
    throw Error(ErrorCode::empty_pool,
                "no sentence survived filtering (" + std::to_string(articles.size()) + " articles, length " +
                    std::to_string(range.min_len) + ".." + std::to_string(range.max_len) + ")");
  }
  return pool;
}

std::map<std::string, ManifestEntry> read_manifest(const fs::path& path) {
  std::map<std::string, ManifestEntry> out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, "manifest " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::invalid_input, "manifest must be a JSON object");
  for (const auto& [file, entry] : j.items()) {
    if (!entry.contains("published_date") || entry["published_date"].is_null()) {
      throw Error(ErrorCode::missing_date, "manifest entry '" + file + "' has no published_date");
    }
    out.emplace(file, ManifestEntry{entry.value("id", fs::path(file).stem().string()),
                                    parse_date(entry["published_date"].get<std::string>())});
  }
  return out;
}

std::vector<RawArticle> load_articles(const fs::path& dir, const fs::path& manifest_path) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::invalid_input, dir.string() + " is not a directory");
  const auto manifest = read_manifest(manifest_path);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (fs::exists(manifest_path) && fs::equivalent(entry.path(), manifest_path)) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RawArticle> articles;
  for (const auto& file : files) {
    const auto name = file.filename().string();
    auto it = manifest.find(name);
    if (it == manifest.end()) {
      throw Error(ErrorCode::missing_date, "article " + name + " is not listed in the manifest");
    }
    std::string text = read_file(file);
    if (text.empty()) throw Error(ErrorCode::invalid_input, "article " + name + " is empty");
    articles.push_back({it->second.id, std::move(text), it->second.published_date});
  }
  return articles;
}

nlohmann::ordered_json to_json(const SentenceRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["normalized_text"] = r.normalized_text;
  j["raw_text"] = r.raw_text;
  j["length"] = r.length;
  j["source_article"] = r.source_article;
  return j;
}

SentenceRecord sentence_from_json(const nlohmann::json& j) {
  SentenceRecord r;
  r.id = j.at("id").get<std::string>();
  r.normalized_text = j.at("normalized_text").get<std::string>();
  r.raw_text = j.value("raw_text", std::string());
  r.length = j.at("length").get<std::size_t>();
  r.source_article = j.value("source_article", std::string());
  if (utf8::length(r.normalized_text) != r.length) {
    throw Error(ErrorCode::invalid_input, "sentence " + r.id + ": length does not match text");
  }
  return r;
}

void write_pool(std::ostream& out, std::span<const SentenceRecord> pool) {
  for (const auto& r : pool) out << dump_line(to_json(r)) << '\n';
}

void write_pool(const fs::path& path, std::span<const SentenceRecord> pool) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::invalid_input, "cannot write " + path.string());
  write_pool(out, pool);
}

std::vector<SentenceRecord> read_pool(const fs::path& path) {
  std::vector<SentenceRecord> pool;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t lineno) {
    try {
      pool.push_back(sentence_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_input,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return pool;
}

}  // namespace guesslab
