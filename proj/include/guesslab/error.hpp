#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <string_view>

namespace guesslab {

enum class ErrorCode {
  invalid_input,
  empty_pool,
  sentence_too_short,
  rate_limited,
  repeat_guess,
  invalid_symbol,
  session_not_active,
  corrupt_log,
  no_data,
  degenerate_accuracy,
  insufficient_data,
  tokenization_gap,
  no_counted_tokens,
  provider_unavailable,
  malformed_response,
  context_too_long,
  missing_date,
  unknown_participant,
  unknown_session,
  pool_exhausted,
  storage_unavailable,
};

/// Stable CamelCase name used in CLI diagnostics and HTTP error bodies.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class RateLimitedError : public Error {
 public:
  RateLimitedError(std::chrono::milliseconds retry_after, const std::string& message)
      : Error(ErrorCode::rate_limited, message), retry_after_(retry_after) {}

  std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

}  // namespace guesslab
