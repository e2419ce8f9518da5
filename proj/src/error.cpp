#include "guesslab/error.hpp"

namespace guesslab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "InvalidInput";
    case ErrorCode::empty_pool: return "EmptyPool";
    case ErrorCode::sentence_too_short: return "SentenceTooShort";
    case ErrorCode::rate_limited: return "RateLimited";
    case ErrorCode::repeat_guess: return "RepeatGuess";
    case ErrorCode::invalid_symbol: return "InvalidSymbol";
    case ErrorCode::session_not_active: return "SessionNotActive";
    case ErrorCode::corrupt_log: return "CorruptLog";
    case ErrorCode::no_data: return "NoData";
    case ErrorCode::degenerate_accuracy: return "DegenerateAccuracy";
    case ErrorCode::insufficient_data: return "InsufficientData";
    case ErrorCode::tokenization_gap: return "TokenizationGap";
    case ErrorCode::no_counted_tokens: return "NoCountedTokens";
    case ErrorCode::provider_unavailable: return "ProviderUnavailable";
    case ErrorCode::malformed_response: return "MalformedResponse";
    case ErrorCode::context_too_long: return "ContextTooLong";
    case ErrorCode::missing_date: return "MissingDate";
    case ErrorCode::unknown_participant: return "UnknownParticipant";
    case ErrorCode::unknown_session: return "UnknownSession";
    case ErrorCode::pool_exhausted: return "PoolExhausted";
    case ErrorCode::storage_unavailable: return "StorageUnavailable";
  }
  return "Unknown";
}

}  // namespace guesslab
