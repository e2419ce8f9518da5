#include "guesslab/session.hpp"

#include <algorithm>
#include <unordered_map>

#include "guesslab/error.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab {

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::active: return "active";
    case SessionStatus::completed: return "completed";
    case SessionStatus::abandoned: return "abandoned";
  }
  return "active";
}

SessionStatus session_status_from_string(std::string_view text) {
  if (text == "active") return SessionStatus::active;
  if (text == "completed") return SessionStatus::completed;
  if (text == "abandoned") return SessionStatus::abandoned;
  throw Error(ErrorCode::invalid_input, "unknown session status '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const GuessEvent& e) {
  nlohmann::ordered_json j;
  j["type"] = "guess";
  j["seq"] = e.seq;
  j["session_id"] = e.session_id;
  j["participant_id"] = e.participant_id;
  j["sentence_id"] = e.sentence_id;
  j["position"] = e.position;
  j["symbol"] = utf8::encode(e.symbol);
  j["correct"] = e.correct;
  j["ts"] = to_millis(e.timestamp);
  return j;
}

GuessEvent guess_event_from_json(const nlohmann::json& j) {
  GuessEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.session_id = j.at("session_id").get<std::string>();
  e.participant_id = j.value("participant_id", std::string());
  e.sentence_id = j.value("sentence_id", std::string());
  e.position = j.at("position").get<int>();
  const auto sym = utf8::decode(j.at("symbol").get<std::string>());
  if (sym.size() != 1) throw Error(ErrorCode::corrupt_log, "guess symbol must be one character");
  e.symbol = sym.front();
  e.correct = j.at("correct").get<bool>();
  e.timestamp = from_millis(j.at("ts").get<std::int64_t>());
  return e;
}

Session Session::start(std::string id, std::string participant_id, const SentenceRecord& sentence,
                       const SessionConfig& config, Timestamp now) {
  if (config.prefix_len < 0) throw Error(ErrorCode::invalid_input, "prefix_len must be >= 0");
  if (config.min_attempt_interval.count() < 0) {
    throw Error(ErrorCode::invalid_input, "min_attempt_interval must be >= 0");
  }
  Session s;
  s.sentence_ = utf8::decode(sentence.normalized_text);
  const int len = static_cast<int>(s.sentence_.size());
  if (len <= config.prefix_len) {
    throw Error(ErrorCode::sentence_too_short,
                "sentence " + sentence.id + " has " + std::to_string(len) +
                    " characters, prefix is " + std::to_string(config.prefix_len));
  }
  for (char32_t cp : s.sentence_) {
    if (!config.alphabet->contains(cp)) {
      throw Error(ErrorCode::invalid_input, "sentence " + sentence.id + " contains a non-alphabet symbol");
    }
  }
  s.id_ = std::move(id);
  s.participant_id_ = std::move(participant_id);
  s.sentence_id_ = sentence.id;
  s.config_ = config;
  s.prefix_len_ = config.prefix_len;
  s.cursor_ = config.prefix_len;
  s.initial_budget_ = len - config.prefix_len;
  s.budget_remaining_ = s.initial_budget_;
  s.started_at_ = now;
  s.last_event_at_ = now;
  return s;
}

GuessOutcome Session::submit_guess(char32_t symbol, Timestamp now) {
  if (status_ != SessionStatus::active) {
    throw Error(ErrorCode::session_not_active,
                "session " + id_ + " is " + std::string(to_string(status_)));
  }
  if (!config_.alphabet->contains(symbol)) {
    throw Error(ErrorCode::invalid_symbol, "'" + utf8::encode(symbol) + "' is not in the alphabet");
  }
  const auto elapsed = now - last_event_at_;
  if (elapsed < config_.min_attempt_interval) {
    const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(
        config_.min_attempt_interval - elapsed);
    throw RateLimitedError(wait, "guess submitted " + std::to_string(elapsed.count()) +
                                     " ms after the previous event");
  }
  if (std::find(attempts_on_current_.begin(), attempts_on_current_.end(), symbol) !=
      attempts_on_current_.end()) {
    throw Error(ErrorCode::repeat_guess,
                "'" + utf8::encode(symbol) + "' was already tried at position " + std::to_string(cursor_));
  }

  GuessOutcome out;
  out.position = cursor_;
  out.attempts_so_far = static_cast<int>(attempts_on_current_.size()) + 1;
  out.event = GuessEvent{next_seq_++, id_, participant_id_, sentence_id_, cursor_, symbol, false, now};

  last_event_at_ = now;
  --budget_remaining_;
  ++total_guesses_;

  if (symbol == sentence_[cursor_]) {
    out.correct = true;
    out.event.correct = true;
    out.revealed_symbol = symbol;
    out.observation = Observation{id_, participant_id_, sentence_id_, cursor_, out.attempts_so_far, now};
    ++correct_guesses_;
    ++cursor_;
    attempts_on_current_.clear();
  } else {
    attempts_on_current_.push_back(symbol);
  }
  if (budget_remaining_ == 0 || cursor_ == sentence_length()) status_ = SessionStatus::completed;

  out.budget_remaining = budget_remaining_;
  out.status = status_;
  return out;
}

void Session::abandon(Timestamp now) {
  if (status_ != SessionStatus::active) {
    throw Error(ErrorCode::session_not_active,
                "session " + id_ + " is " + std::string(to_string(status_)));
  }
  status_ = SessionStatus::abandoned;
  last_event_at_ = now;
}

std::string Session::revealed_text() const {
  return utf8::encode(std::u32string_view(sentence_).substr(0, cursor_));
}

std::vector<Observation> derive_observations(std::span<const GuessEvent> events,
                                             std::size_t alphabet_size) {
  struct Replay {
    std::uint64_t last_seq = 0;
    bool started = false;
    int position = 0;
    std::vector<char32_t> tried;
  };
  std::unordered_map<std::string, Replay> state;
  std::vector<Observation> out;
  for (const auto& e : events) {
    auto& r = state[e.session_id];
    auto corrupt = [&](const std::string& why) {
      return Error(ErrorCode::corrupt_log,
                   "session " + e.session_id + " seq " + std::to_string(e.seq) + ": " + why);
    };
    if (r.started && e.seq <= r.last_seq) throw corrupt("seq is not strictly increasing");
    if (e.position < 0) throw corrupt("negative position");
    if (r.started && e.position != r.position) {
      throw corrupt("guess at position " + std::to_string(e.position) + ", expected " +
                    std::to_string(r.position));
    }
    if (std::find(r.tried.begin(), r.tried.end(), e.symbol) != r.tried.end()) {
      throw corrupt("symbol repeated at one position");
    }
    r.started = true;
    r.last_seq = e.seq;
    r.position = e.position;
    if (e.correct) {
      out.push_back(Observation{e.session_id, e.participant_id, e.sentence_id, e.position,
                                static_cast<int>(r.tried.size()) + 1, e.timestamp});
      r.tried.clear();
      ++r.position;
    } else {
      r.tried.push_back(e.symbol);
      if (r.tried.size() >= alphabet_size) throw corrupt("more wrong guesses than the alphabet allows");
    }
  }
  return out;
}

}  // namespace guesslab
