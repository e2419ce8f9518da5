#pragma once

#include <string>
#include <string_view>

namespace guesslab::utf8 {

// Invalid or truncated sequences decode to U+FFFD, one per offending byte.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

// Number of code points; invalid bytes count as one each.
std::size_t length(std::string_view bytes);

// The whitespace set of Python's str.isspace(), which the corpus rules and the
// reference tooling both rely on.
bool is_space(char32_t cp) noexcept;

std::u32string_view trim(std::u32string_view text) noexcept;

}  // namespace guesslab::utf8
