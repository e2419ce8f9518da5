#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "guesslab/corpus.hpp"

namespace httplib {
class Server;
}

namespace guesslab {

enum class LogBase { natural, two };

std::string_view to_string(LogBase base);
/// Accepts "e" / "ln" / "natural" and "2" / "log2".
LogBase log_base_from_string(std::string_view text);

struct TokenLogprob {
  std::string text;
  std::size_t start_char = 0;  // code-point offset within the sentence
  double logprob = 0.0;        // <= 0 in `base`
  LogBase base = LogBase::natural;

  double log2_prob() const noexcept;
  bool operator==(const TokenLogprob&) const = default;
};

nlohmann::ordered_json to_json(const TokenLogprob& t);
TokenLogprob token_from_json(const nlohmann::json& j);

/// Throws TokenizationGap unless the tokens cover [0, len(sentence)) back to back
/// and their texts concatenate to the sentence.
void validate_tiling(std::span<const TokenLogprob> tokens, std::string_view sentence);

struct SentenceScore {
  double bits = 0.0;
  std::size_t counted_chars = 0;
  std::size_t counted_tokens = 0;
  std::size_t total_chars = 0;
  std::size_t total_tokens = 0;
};

/// Sums -log2 P over tokens with start_char >= mask_from. Offsets must tile
/// from 0 without gaps or overlaps (TokenizationGap otherwise).
SentenceScore score_sentence(std::span<const TokenLogprob> tokens, std::size_t mask_from = 70);

struct LlmEvalResult {
  std::string model_id;
  std::string params_label;
  double bpc = 0.0;
  double fertility = 0.0;  // chars per token, masked tokens included
  std::size_t counted_chars = 0;
  std::size_t counted_tokens = 0;
  std::size_t sentences = 0;
};

nlohmann::ordered_json to_json(const LlmEvalResult& r);

/// bpc = sum bits / sum counted chars; fertility = sum chars / sum tokens.
/// Throws NoCountedTokens when no sentence has a counted character.
LlmEvalResult corpus_bpc(std::string model_id, std::span<const SentenceScore> scores,
                         std::string params_label = {});

struct ProviderConfig {
  std::string endpoint;  // http(s)://host[:port]/path or file:///path/to/mock.json
  std::string model_id;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::optional<std::string> auth_token;
  std::size_t max_context_chars = 0;  // 0 = no client-side limit
  std::chrono::milliseconds retry_backoff{200};
};

/// Source of per-token log-probabilities for one sentence, conditioned only
/// on preceding tokens of the same sentence.
class LogprobProvider {
 public:
  virtual ~LogprobProvider() = default;
  virtual std::vector<TokenLogprob> fetch(std::string_view text) = 0;
};

/// POST {"model", "text"} -> {"tokens": [{"text", "start", "logprob", "base"}]}.
/// 413 maps to ContextTooLong; connection failures, 429 and 5xx are retried
/// max_retries times before ProviderUnavailable.
class HttpLogprobProvider final : public LogprobProvider {
 public:
  explicit HttpLogprobProvider(ProviderConfig config);
  std::vector<TokenLogprob> fetch(std::string_view text) override;

 private:
  ProviderConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Canned responses:
/// {"models": {"<model>" | "*": {"<sentence text>": {"tokens": [...]}}}}
class MockResponses {
 public:
  static MockResponses load(const std::filesystem::path& path);
  static MockResponses from_json(const nlohmann::json& j);

  /// nullopt when neither the model nor "*" has an entry for the text.
  std::optional<nlohmann::json> lookup(std::string_view model, std::string_view text) const;

 private:
  nlohmann::json models_;
};

class FileLogprobProvider final : public LogprobProvider {
 public:
  FileLogprobProvider(MockResponses responses, std::string model_id);
  std::vector<TokenLogprob> fetch(std::string_view text) override;

 private:
  MockResponses responses_;
  std::string model_id_;
};

std::unique_ptr<LogprobProvider> make_provider(const ProviderConfig& config);

/// One-shot fetch + tiling validation.
std::vector<TokenLogprob> fetch_logprobs(std::string_view sentence, const ProviderConfig& config);

/// Parses a provider response body; throws MalformedResponse.
std::vector<TokenLogprob> parse_provider_response(const nlohmann::json& body);

/// true iff the sentence's source article was published strictly after `cutoff`.
/// Throws MissingDate when the article has no known publication date.
bool contamination_check(const SentenceRecord& sentence, const std::map<std::string, Date>& published,
                         const Date& cutoff);

struct EvalOptions {
  std::size_t mask_from = 70;
  unsigned concurrency = 4;  // max requests in flight
  std::string params_label;
};

/// Scores every sentence's raw text with one model.
LlmEvalResult evaluate_model(std::span<const SentenceRecord> sentences, const ProviderConfig& config,
                             const EvalOptions& options);

/// HTTP front for MockResponses speaking the provider wire format. Serves on a
/// background thread until destroyed. Used by tests and for offline demos.
class MockProviderServer {
 public:
  explicit MockProviderServer(MockResponses responses, std::string host = "127.0.0.1", int port = 0);
  ~MockProviderServer();
  MockProviderServer(const MockProviderServer&) = delete;
  MockProviderServer& operator=(const MockProviderServer&) = delete;

  int port() const noexcept { return port_; }
  std::string endpoint() const;
  std::size_t requests_served() const noexcept;
  /// Responses with this status for the next `count` requests (e.g. 503 to exercise retries).
  void fail_next(int status, int count);

 private:
  struct State;
  std::unique_ptr<State> state_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace guesslab
