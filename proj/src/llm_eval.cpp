#include <httplib.h>

#include "guesslab/llm_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>

#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab {

std::string_view to_string(LogBase base) { return base == LogBase::two ? "2" : "e"; }

LogBase log_base_from_string(std::string_view text) {
  if (text == "e" || text == "ln" || text == "natural") return LogBase::natural;
  if (text == "2" || text == "log2") return LogBase::two;
  throw Error(ErrorCode::malformed_response, "unknown log base '" + std::string(text) + "'");
}

double TokenLogprob::log2_prob() const noexcept {
  return base == LogBase::two ? logprob : logprob / std::numbers::ln2;
}

nlohmann::ordered_json to_json(const TokenLogprob& t) {
  nlohmann::ordered_json j;
  j["text"] = t.text;
  j["start"] = t.start_char;
  j["logprob"] = t.logprob;
  j["base"] = to_string(t.base);
  return j;
}

TokenLogprob token_from_json(const nlohmann::json& j) {
  try {
    TokenLogprob t;
    t.text = j.at("text").get<std::string>();
    t.start_char = j.at("start").get<std::size_t>();
    t.logprob = j.at("logprob").get<double>();
    if (!j.contains("base")) throw Error(ErrorCode::malformed_response, "token without a log base");
    const auto& base = j["base"];
    t.base = log_base_from_string(base.is_number() ? std::to_string(base.get<int>()) : base.get<std::string>());
    if (!(t.logprob <= 0.0)) {
      throw Error(ErrorCode::malformed_response, "positive logprob for token '" + t.text + "'");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_response, std::string("bad token entry: ") + e.what());
  }
}

namespace {

// Checks contiguity from offset 0; returns total code points covered.
std::size_t check_contiguous(std::span<const TokenLogprob> tokens) {
  std::size_t expected = 0;
  for (const auto& t : tokens) {
    if (t.start_char != expected) {
      throw Error(ErrorCode::tokenization_gap, "token '" + t.text + "' starts at " +
                                                   std::to_string(t.start_char) + ", expected " +
                                                   std::to_string(expected));
    }
    const std::size_t len = utf8::length(t.text);
    if (len == 0) throw Error(ErrorCode::tokenization_gap, "empty token at " + std::to_string(expected));
    expected += len;
  }
  return expected;
}

}  // namespace

void validate_tiling(std::span<const TokenLogprob> tokens, std::string_view sentence) {
  const std::size_t covered = check_contiguous(tokens);
  std::string joined;
  for (const auto& t : tokens) joined += t.text;
  if (covered != utf8::length(sentence) || joined != sentence) {
    throw Error(ErrorCode::tokenization_gap, "tokens do not reconstruct the sentence");
  }
}

SentenceScore score_sentence(std::span<const TokenLogprob> tokens, std::size_t mask_from) {
  SentenceScore s;
  s.total_chars = check_contiguous(tokens);
  s.total_tokens = tokens.size();
  for (const auto& t : tokens) {
    if (t.start_char < mask_from) continue;
    s.bits -= t.log2_prob();
    s.counted_chars += utf8::length(t.text);
    ++s.counted_tokens;
  }
  // -0.0 from a certainty model reads oddly in reports
  if (s.bits == 0.0) s.bits = 0.0;
  return s;
}

nlohmann::ordered_json to_json(const LlmEvalResult& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model_id;
  j["params"] = r.params_label;
  j["fertility"] = r.fertility;
  j["bpc"] = r.bpc;
  j["counted_chars"] = r.counted_chars;
  j["counted_tokens"] = r.counted_tokens;
  j["sentences"] = r.sentences;
  return j;
}

LlmEvalResult corpus_bpc(std::string model_id, std::span<const SentenceScore> scores,
                         std::string params_label) {
  LlmEvalResult r;
  r.model_id = std::move(model_id);
  r.params_label = std::move(params_label);
  double bits = 0.0;
  std::size_t chars = 0;
  std::size_t tokens = 0;
  for (const auto& s : scores) {
    bits += s.bits;
    r.counted_chars += s.counted_chars;
    r.counted_tokens += s.counted_tokens;
    chars += s.total_chars;
    tokens += s.total_tokens;
  }
  r.sentences = scores.size();
  if (r.counted_chars == 0) throw Error(ErrorCode::no_counted_tokens, "no token starts past the mask boundary");
  r.bpc = bits / static_cast<double>(r.counted_chars);
  r.fertility = static_cast<double>(chars) / static_cast<double>(tokens);
  return r;
}

std::vector<TokenLogprob> parse_provider_response(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("tokens") || !body["tokens"].is_array()) {
    throw Error(ErrorCode::malformed_response, "response has no tokens array");
  }
  std::vector<TokenLogprob> out;
  out.reserve(body["tokens"].size());
  for (const auto& t : body["tokens"]) out.push_back(token_from_json(t));
  return out;
}

HttpLogprobProvider::HttpLogprobProvider(ProviderConfig config) : config_(std::move(config)) {
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::invalid_input, "provider endpoint '" + url + "' is not a URL");
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::invalid_input, "unsupported provider scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (scheme_host_port_.size() <= scheme_end + 3) {
    throw Error(ErrorCode::invalid_input, "provider endpoint '" + url + "' has no host");
  }
}

std::vector<TokenLogprob> HttpLogprobProvider::fetch(std::string_view text) {
  if (config_.max_context_chars > 0 && utf8::length(text) > config_.max_context_chars) {
    throw Error(ErrorCode::context_too_long, "sentence exceeds " + std::to_string(config_.max_context_chars) +
                                                 " characters");
  }
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (config_.auth_token) headers.emplace("Authorization", "Bearer " + *config_.auth_token);
  const nlohmann::json request{{"model", config_.model_id}, {"text", std::string(text)}};
  const std::string payload = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry_backoff * (1 << std::min(attempt - 1, 6)));
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 413) throw Error(ErrorCode::context_too_long, "provider rejected the context length");
    if (res->status == 429 || res->status >= 500) {
      last_error = "provider answered HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::malformed_response, "provider answered HTTP " + std::to_string(res->status));
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::malformed_response, std::string("response is not JSON: ") + e.what());
    }
    if (body.contains("error") && body["error"] == "context_too_long") {
      throw Error(ErrorCode::context_too_long, "provider rejected the context length");
    }
    return parse_provider_response(body);
  }
  throw Error(ErrorCode::provider_unavailable, config_.endpoint + " unavailable after " +
                                                   std::to_string(config_.max_retries + 1) +
                                                   " attempts (" + last_error + ")");
}

MockResponses MockResponses::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, "mock provider file " + path.string() + ": " + e.what());
  }
}

MockResponses MockResponses::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("models") || !j["models"].is_object()) {
    throw Error(ErrorCode::invalid_input, "mock provider file needs a \"models\" object");
  }
  MockResponses m;
  m.models_ = j["models"];
  return m;
}

std::optional<nlohmann::json> MockResponses::lookup(std::string_view model, std::string_view text) const {
  for (const std::string& key : {std::string(model), std::string("*")}) {
    auto it = models_.find(key);
    if (it == models_.end()) continue;
    auto hit = it->find(std::string(text));
    if (hit != it->end()) return *hit;
  }
  return std::nullopt;
}

FileLogprobProvider::FileLogprobProvider(MockResponses responses, std::string model_id)
    : responses_(std::move(responses)), model_id_(std::move(model_id)) {}

std::vector<TokenLogprob> FileLogprobProvider::fetch(std::string_view text) {
  auto hit = responses_.lookup(model_id_, text);
  if (!hit) throw Error(ErrorCode::malformed_response, "mock has no response for model " + model_id_);
  return parse_provider_response(*hit);
}

std::unique_ptr<LogprobProvider> make_provider(const ProviderConfig& config) {
  constexpr std::string_view file_scheme = "file://";
  if (config.endpoint.starts_with(file_scheme)) {
    return std::make_unique<FileLogprobProvider>(
        MockResponses::load(config.endpoint.substr(file_scheme.size())), config.model_id);
  }
  return std::make_unique<HttpLogprobProvider>(config);
}

std::vector<TokenLogprob> fetch_logprobs(std::string_view sentence, const ProviderConfig& config) {
  auto tokens = make_provider(config)->fetch(sentence);
  validate_tiling(tokens, sentence);
  return tokens;
}

bool contamination_check(const SentenceRecord& sentence, const std::map<std::string, Date>& published,
                         const Date& cutoff) {
  auto it = published.find(sentence.source_article);
  if (it == published.end()) {
    throw Error(ErrorCode::missing_date, "no publication date for article '" + sentence.source_article + "'");
  }
  return std::chrono::sys_days(it->second) > std::chrono::sys_days(cutoff);
}

LlmEvalResult evaluate_model(std::span<const SentenceRecord> sentences, const ProviderConfig& config,
                             const EvalOptions& options) {
  std::vector<SentenceScore> scores(sentences.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    try {
      auto provider = make_provider(config);
      for (std::size_t i = next++; i < sentences.size(); i = next++) {
        {
          std::lock_guard lock(error_mutex);
          if (error) return;
        }
        const auto& raw = sentences[i].raw_text;
        auto tokens = provider->fetch(raw);
        validate_tiling(tokens, raw);
        scores[i] = score_sentence(tokens, options.mask_from);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(options.concurrency,
                                                     static_cast<unsigned>(std::max<std::size_t>(1, sentences.size()))));
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < n; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return corpus_bpc(config.model_id, scores, options.params_label);
}

struct MockProviderServer::State {
  MockResponses responses;
  std::atomic<std::size_t> served{0};
  std::mutex mutex;
  int fail_status = 0;
  int fail_count = 0;
};

MockProviderServer::MockProviderServer(MockResponses responses, std::string host, int port)
    : state_(std::make_unique<State>()),
      server_(std::make_unique<httplib::Server>()),
      host_(std::move(host)) {
  State* st = state_.get();
  st->responses = std::move(responses);
  auto handler = [st](const httplib::Request& req, httplib::Response& res) {
    ++st->served;
    {
      std::lock_guard lock(st->mutex);
      if (st->fail_count > 0) {
        --st->fail_count;
        res.status = st->fail_status;
        res.set_content(R"({"error":"injected"})", "application/json");
        return;
      }
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      res.status = 400;
      res.set_content(R"({"error":"bad_json"})", "application/json");
      return;
    }
    auto hit = st->responses.lookup(body.value("model", std::string()), body.value("text", std::string()));
    if (!hit) {
      res.status = 404;
      res.set_content(R"({"error":"unknown_text"})", "application/json");
      return;
    }
    res.set_content(hit->dump(), "application/json");
  };
  server_->Post(".*", handler);
  port_ = port == 0 ? server_->bind_to_any_port(host_) : (server_->bind_to_port(host_, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::invalid_input, "mock provider cannot bind " + host_);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockProviderServer::~MockProviderServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockProviderServer::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_) + "/v1/logprobs";
}

std::size_t MockProviderServer::requests_served() const noexcept { return state_->served.load(); }

void MockProviderServer::fail_next(int status, int count) {
  std::lock_guard lock(state_->mutex);
  state_->fail_status = status;
  state_->fail_count = count;
}

}  // namespace guesslab
