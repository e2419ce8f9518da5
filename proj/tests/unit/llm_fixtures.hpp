#pragma once

// Hand-built provider responses with known bit totals.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "guesslab/llm_eval.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab::test {

struct LlmFixture {
  std::string text;
  std::vector<TokenLogprob> tokens;
  double bits;           // over tokens starting at 70 or later
  std::size_t counted;   // characters of those tokens
};

inline std::u32string fixture_text(std::size_t length) {
  static const std::u32string letters = U"ЛАСКАВО ПРОСИМО ДО ГРИ";
  std::u32string t;
  for (std::size_t i = 0; i < length; ++i) t.push_back(letters[i % letters.size()]);
  return t;
}

/// Cuts `text` at the given code-point offsets and assigns each piece a logprob.
inline std::vector<TokenLogprob> cut(const std::u32string& text, const std::vector<std::size_t>& starts,
                                     const std::vector<double>& logprobs, LogBase base) {
  std::vector<TokenLogprob> out;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::size_t end = i + 1 < starts.size() ? starts[i + 1] : text.size();
    out.push_back({utf8::encode(text.substr(starts[i], end - starts[i])), starts[i], logprobs[i], base});
  }
  return out;
}

inline std::vector<LlmFixture> llm_fixtures() {
  std::vector<LlmFixture> out;
  {
    // one masked 70-char token, then five 2-char tokens at p = 1/2
    const auto t = fixture_text(80);
    out.push_back({utf8::encode(t), cut(t, {0, 70, 72, 74, 76, 78}, {-5, -1, -1, -1, -1, -1}, LogBase::two), 5.0, 10});
  }
  {
    // natural-log response: 70 masked singles, then p = 1/8 over 3 chars and p = 1/2 over 2
    const auto t = fixture_text(75);
    std::vector<std::size_t> starts;
    std::vector<double> lp;
    for (std::size_t i = 0; i < 70; ++i) {
      starts.push_back(i);
      lp.push_back(-1.0);
    }
    starts.insert(starts.end(), {70, 73});
    lp.insert(lp.end(), {-std::log(8.0), -std::numbers::ln2});
    out.push_back({utf8::encode(t), cut(t, starts, lp, LogBase::natural), 4.0, 5});
  }
  {
    // a token straddling the boundary (start 68) stays masked
    const auto t = fixture_text(76);
    out.push_back({utf8::encode(t), cut(t, {0, 68, 72}, {-3, -7, -2}, LogBase::two), 2.0, 4});
  }
  return out;
}

/// 11 bits over 19 counted characters.
inline constexpr double kFixtureCorpusBpc = 11.0 / 19.0;

/// {"models": {"*": {text: {"tokens": [...]}}}}
inline nlohmann::json mock_document(const std::vector<LlmFixture>& fixtures, const std::string& model = "*") {
  nlohmann::json texts = nlohmann::json::object();
  for (const auto& f : fixtures) {
    nlohmann::json tokens = nlohmann::json::array();
    for (const auto& t : f.tokens) tokens.push_back(nlohmann::json::parse(to_json(t).dump()));
    texts[f.text] = {{"tokens", tokens}};
  }
  return {{"models", {{model, texts}}}};
}

}  // namespace guesslab::test
