#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "guesslab/alphabet.hpp"
#include "guesslab/corpus.hpp"
#include "guesslab/observation.hpp"

namespace guesslab {

struct SessionConfig {
  int prefix_len = 70;
  std::chrono::milliseconds min_attempt_interval{300};
  std::shared_ptr<const Alphabet> alphabet = std::make_shared<const Alphabet>(Alphabet::ukrainian());
};

enum class SessionStatus { active, completed, abandoned };

std::string_view to_string(SessionStatus status);
SessionStatus session_status_from_string(std::string_view text);

/// Raw guess record. `seq` increases strictly within a session.
struct GuessEvent {
  std::uint64_t seq = 0;
  std::string session_id;
  std::string participant_id;
  std::string sentence_id;
  int position = 0;
  char32_t symbol = 0;
  bool correct = false;
  Timestamp timestamp{};

  bool operator==(const GuessEvent&) const = default;
};

/// {"type":"guess","seq",...,"symbol","correct","ts"}
nlohmann::ordered_json to_json(const GuessEvent& e);
GuessEvent guess_event_from_json(const nlohmann::json& j);

struct GuessOutcome {
  bool correct = false;
  std::optional<char32_t> revealed_symbol;
  int budget_remaining = 0;
  SessionStatus status = SessionStatus::active;
  int position = 0;         // position the guess was made at
  int attempts_so_far = 0;  // tries spent at that position, this one included
  std::optional<Observation> observation;
  GuessEvent event;
};

/// One participant working through one sentence.
///
/// The guess budget equals sentence length minus the revealed prefix; every
/// accepted guess, right or wrong, spends one unit. The session completes when
/// the budget runs out or the last character is guessed. Rejected calls
/// (rate limit, repeat, invalid symbol) leave the state untouched.
///
/// Not thread-safe; callers serialize access per session.
class Session {
 public:
  /// Throws SentenceTooShort if the sentence has no character past the prefix.
  static Session start(std::string id, std::string participant_id, const SentenceRecord& sentence,
                       const SessionConfig& config, Timestamp now);

  GuessOutcome submit_guess(char32_t symbol, Timestamp now);
  void abandon(Timestamp now);

  const std::string& id() const noexcept { return id_; }
  const std::string& participant_id() const noexcept { return participant_id_; }
  const std::string& sentence_id() const noexcept { return sentence_id_; }
  SessionStatus status() const noexcept { return status_; }
  int prefix_len() const noexcept { return prefix_len_; }
  int cursor() const noexcept { return cursor_; }
  int sentence_length() const noexcept { return static_cast<int>(sentence_.size()); }
  int initial_budget() const noexcept { return initial_budget_; }
  int budget_remaining() const noexcept { return budget_remaining_; }
  std::span<const char32_t> attempts_on_current() const noexcept { return attempts_on_current_; }
  int total_guesses() const noexcept { return total_guesses_; }
  int correct_guesses() const noexcept { return correct_guesses_; }
  Timestamp started_at() const noexcept { return started_at_; }
  Timestamp last_event_at() const noexcept { return last_event_at_; }
  const SessionConfig& config() const noexcept { return config_; }

  /// Prefix plus every correctly guessed character; never more.
  std::string revealed_text() const;

 private:
  Session() = default;

  std::string id_;
  std::string participant_id_;
  std::string sentence_id_;
  std::u32string sentence_;
  SessionConfig config_;
  int prefix_len_ = 0;
  int cursor_ = 0;
  int initial_budget_ = 0;
  int budget_remaining_ = 0;
  std::vector<char32_t> attempts_on_current_;
  SessionStatus status_ = SessionStatus::active;
  int total_guesses_ = 0;
  int correct_guesses_ = 0;
  std::uint64_t next_seq_ = 1;
  Timestamp started_at_{};
  Timestamp last_event_at_{};
};

/// Rebuilds the observation stream from a guess log. Events of several sessions
/// may be interleaved; within a session they must be in seq order. Throws
/// CorruptLog on a non-increasing seq, a position jump, a repeated symbol at one
/// position, or more wrong guesses than the alphabet allows.
std::vector<Observation> derive_observations(std::span<const GuessEvent> events,
                                             std::size_t alphabet_size = 34);

}  // namespace guesslab
