#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "guesslab/corpus.hpp"
#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/utf8.hpp"
#include "test_support.hpp"

using namespace guesslab;
using guesslab::test::TempDir;

namespace {

const Alphabet& uk() {
  static const Alphabet a = Alphabet::ukrainian();
  return a;
}

RawArticle article(std::string id, std::string text) { return {std::move(id), std::move(text), parse_date("2025-09-01")}; }

std::string letters(std::size_t n) {
  // "АБ АБ..." style filler of exact normalized length n
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i % 5 == 4 && i + 1 < n) ? " " : "Д";
  return s;
}

void expect_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(SplitSentences, SplitsOnTerminators) {
  EXPECT_EQ(split_sentences("Все добре. Дощ іде!"), (std::vector<std::string>{"Все добре", "Дощ іде"}));
}

TEST(SplitSentences, EmptyInputGivesNothing) { EXPECT_TRUE(split_sentences("").empty()); }

TEST(SplitSentences, KeepsTrailingTextWithoutTerminator) {
  EXPECT_EQ(split_sentences("Без терміналу"), (std::vector<std::string>{"Без терміналу"}));
}

TEST(SplitSentences, DropsEmptyPiecesBetweenRepeatedTerminators) {
  EXPECT_EQ(split_sentences("Що?! Так... Ні"), (std::vector<std::string>{"Що", "Так", "Ні"}));
}

TEST(RejectForeign, KeepsPureCyrillic) { EXPECT_TRUE(reject_foreign("Мова без цифр")); }
TEST(RejectForeign, RejectsDigits) { EXPECT_FALSE(reject_foreign("Версія 2 вийшла")); }
TEST(RejectForeign, RejectsLatin) { EXPECT_FALSE(reject_foreign("Слово test тут")); }
TEST(RejectForeign, FullwidthDigitsAreNotAscii) { EXPECT_TRUE(reject_foreign("Число ２")); }

TEST(Normalize, UppercasesAndMasksPunctuation) {
  EXPECT_EQ(normalize("він сказав, що йде", uk()), "ВІН СКАЗАВ ЩО ЙДЕ");
}

TEST(Normalize, ApostropheBecomesWhitespace) { EXPECT_EQ(normalize("м’яч", uk()), "М ЯЧ"); }

TEST(Normalize, WhitespaceOnlyCollapsesToEmpty) { EXPECT_EQ(normalize("   ", uk()), ""); }

TEST(Normalize, OtherWhitespaceKindsCollapse) {
  EXPECT_EQ(normalize("\tдім  і  сад\n", uk()), "ДІМ І САД");
}

TEST(Normalize, RussianOnlyLettersAreMasked) { EXPECT_EQ(normalize("ыэъё", uk()), ""); }

TEST(BuildPool, LengthBoundsAreInclusive) {
  for (std::size_t n : {119u, 120u, 200u, 201u}) {
    const std::vector<RawArticle> arts = {article("a", letters(n) + ".")};
    if (n == 120 || n == 200) {
      const auto pool = build_pool(arts, uk());
      ASSERT_EQ(pool.size(), 1u);
      EXPECT_EQ(pool[0].length, n);
    } else {
      expect_error(ErrorCode::empty_pool, [&] { build_pool(arts, uk()); });
    }
  }
}

TEST(BuildPool, RecordsKeepRawTextAndSourceOrder) {
  const std::vector<RawArticle> arts = {
      article("b", "Коротко. " + letters(130) + ", так! Test " + letters(130) + "? " + letters(140)),
      article("a", letters(150) + "."),
  };
  const auto pool = build_pool(arts, uk());
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool[0].id, "b-s001");
  EXPECT_EQ(pool[0].raw_text, letters(130) + ", так");
  EXPECT_EQ(pool[0].normalized_text, letters(130) + " ТАК");
  EXPECT_EQ(pool[1].id, "b-s003");  // s002 dropped for Latin text
  EXPECT_EQ(pool[2].id, "a-s000");
  EXPECT_EQ(pool[2].source_article, "a");
}

TEST(BuildPool, RejectsInvertedRange) {
  const std::vector<RawArticle> arts = {article("a", letters(150))};
  expect_error(ErrorCode::invalid_input, [&] { build_pool(arts, uk(), LengthRange{200, 120}); });
}

TEST(BuildPool, OnlySentenceOfLength119IsEmptyPool) {
  const std::vector<RawArticle> arts = {article("a", letters(119) + ".")};
  expect_error(ErrorCode::empty_pool, [&] { build_pool(arts, uk()); });
}

TEST(Manifest, MissingDateIsReported) {
  TempDir dir;
  std::ofstream(dir / "manifest.json") << R"({"a.txt": {"id": "a"}})";
  expect_error(ErrorCode::missing_date, [&] { read_manifest(dir / "manifest.json"); });
}

TEST(Manifest, UnlistedArticleIsAnError) {
  TempDir dir;
  std::ofstream(dir / "manifest.json") << R"({"a.txt": {"id": "a", "published_date": "2025-09-01"}})";
  std::ofstream(dir / "a.txt") << letters(150);
  std::ofstream(dir / "b.txt") << letters(150);
  EXPECT_THROW(load_articles(dir.path(), dir / "manifest.json"), Error);
}

TEST(Pool, JsonlRoundTripIsByteStable) {
  TempDir dir;
  const std::vector<RawArticle> arts = {article("a", letters(150) + ". «" + letters(160) + "»!")};
  const auto pool = build_pool(arts, uk());
  write_pool(dir / "p1.jsonl", pool);
  const auto back = read_pool(dir / "p1.jsonl");
  EXPECT_EQ(back, pool);
  write_pool(dir / "p2.jsonl", back);
  EXPECT_EQ(sha256_file(dir / "p1.jsonl"), sha256_file(dir / "p2.jsonl"));
}

TEST(Pool, SurrogateArticlesReproduceReferencePoolBytes) {
  const auto dir = test::surrogate_dir();
  const auto articles = load_articles(dir / "articles", dir / "manifest.json");
  const auto pool = build_pool(articles, uk());
  std::ostringstream out;
  write_pool(out, pool);
  EXPECT_EQ(out.str(), read_file(dir / "pool.jsonl"));
}

TEST(Dates, ParseAndFormat) {
  EXPECT_EQ(format_date(parse_date("2025-06-01")), "2025-06-01");
  EXPECT_THROW(parse_date("2025-13-01"), Error);
  EXPECT_THROW(parse_date("01.06.2025"), Error);
}

namespace {

std::u32string random_unicode(std::mt19937_64& rng) {
  static const std::u32string interesting = U"абвгґдеєжзиіїйклмнопрстуфхцчшщьюяАБВГҐДЕЄЖЗИІЇЙКЛМНОПРСТУФХЦЧШЩЬЮЯ"
                                           U"ыэъёЫЭЪЁ'’ʼ-–—.,!?«»\"  \t\n  　́­​";
  std::uniform_int_distribution<int> len(0, 60);
  std::u32string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    const auto pick = rng() % 4;
    char32_t c;
    if (pick < 2) {
      c = interesting[rng() % interesting.size()];
    } else if (pick == 2) {
      c = static_cast<char32_t>(rng() % 0x500);  // Latin, Greek, Cyrillic blocks
    } else {
      c = static_cast<char32_t>(rng() % 0x10FFFF);
    }
    if ((c >= 0xD800 && c <= 0xDFFF) || c == 0) c = U'?';
    s.push_back(c);
  }
  return s;
}

}  // namespace

TEST(NormalizeProperty, IdempotentAndClosedOver10000RandomStrings) {
  std::mt19937_64 rng(7);
  const auto& a = uk();
  for (int i = 0; i < 10000; ++i) {
    const std::string input = utf8::encode(random_unicode(rng));
    const std::string once = normalize(input, a);
    ASSERT_EQ(normalize(once, a), once) << input;
    const auto cps = utf8::decode(once);
    for (std::size_t k = 0; k < cps.size(); ++k) {
      ASSERT_TRUE(a.contains(cps[k])) << input;
      if (cps[k] == a.whitespace()) {
        ASSERT_TRUE(k > 0 && k + 1 < cps.size()) << "edge whitespace for " << input;
        ASSERT_NE(cps[k - 1], a.whitespace()) << "double whitespace for " << input;
      }
    }
  }
}
