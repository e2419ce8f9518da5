#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "guesslab/error.hpp"
#include "guesslab/session.hpp"
#include "guesslab/utf8.hpp"
#include "test_support.hpp"

using namespace guesslab;
using namespace std::chrono_literals;
using guesslab::test::make_sentence;

namespace {

const Timestamp t0 = from_millis(1'700'000'000'000);
const Alphabet kUk = Alphabet::ukrainian();

char32_t char_at(const SentenceRecord& s, int pos) { return utf8::decode(s.normalized_text)[static_cast<std::size_t>(pos)]; }

// Some alphabet symbol that is not the one at `pos`, skipping `avoid`.
char32_t wrong_at(const SentenceRecord& s, int pos, const std::vector<char32_t>& avoid = {}) {
  for (char32_t c : kUk.symbols()) {
    if (c != char_at(s, pos) && std::find(avoid.begin(), avoid.end(), c) == avoid.end()) return c;
  }
  return U'?';
}

ErrorCode error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_input;
}

}  // namespace

TEST(SessionStart, BudgetIsLengthMinusPrefix) {
  const auto s = Session::start("s", "p", make_sentence("x", 150), SessionConfig{}, t0);
  EXPECT_EQ(s.budget_remaining(), 80);
  EXPECT_EQ(s.cursor(), 70);
  EXPECT_EQ(s.status(), SessionStatus::active);
  EXPECT_TRUE(s.attempts_on_current().empty());
  EXPECT_EQ(utf8::length(s.revealed_text()), 70u);
}

TEST(SessionStart, MinimalSentenceHasBudgetOne) {
  EXPECT_EQ(Session::start("s", "p", make_sentence("x", 71), SessionConfig{}, t0).budget_remaining(), 1);
}

TEST(SessionStart, SentenceOfPrefixLengthIsTooShort) {
  EXPECT_EQ(error_of([] { Session::start("s", "p", make_sentence("x", 70), SessionConfig{}, t0); }),
            ErrorCode::sentence_too_short);
}

TEST(SessionStart, RejectsNegativeConfig) {
  SessionConfig c;
  c.prefix_len = -1;
  EXPECT_EQ(error_of([&] { Session::start("s", "p", make_sentence("x", 150), c, t0); }), ErrorCode::invalid_input);
}

TEST(SubmitGuess, FirstTryCorrect) {
  const auto sentence = make_sentence("x", 150);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  const auto out = s.submit_guess(char_at(sentence, 70), t0 + 1s);
  EXPECT_TRUE(out.correct);
  ASSERT_TRUE(out.observation);
  EXPECT_EQ(out.observation->position, 70);
  EXPECT_EQ(out.observation->attempts, 1);
  EXPECT_EQ(out.revealed_symbol, char_at(sentence, 70));
  EXPECT_EQ(out.budget_remaining, 79);
  EXPECT_EQ(s.cursor(), 71);
  EXPECT_EQ(utf8::length(s.revealed_text()), 71u);
}

TEST(SubmitGuess, WrongThenCorrectGivesTwoAttempts) {
  const auto sentence = make_sentence("x", 150);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  const auto wrong = s.submit_guess(wrong_at(sentence, 70), t0 + 1s);
  EXPECT_FALSE(wrong.correct);
  EXPECT_FALSE(wrong.revealed_symbol);
  EXPECT_FALSE(wrong.observation);
  const auto right = s.submit_guess(char_at(sentence, 70), t0 + 2s);
  ASSERT_TRUE(right.observation);
  EXPECT_EQ(right.observation->attempts, 2);
  EXPECT_EQ(right.budget_remaining, 78);
}

TEST(SubmitGuess, WrongGuessOnLastBudgetUnitCompletes) {
  const auto sentence = make_sentence("x", 71);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  const auto out = s.submit_guess(wrong_at(sentence, 70), t0 + 1s);
  EXPECT_EQ(out.status, SessionStatus::completed);
  EXPECT_FALSE(out.observation);
  EXPECT_EQ(s.budget_remaining(), 0);
}

TEST(SubmitGuess, RateLimitLeavesStateUntouched) {
  const auto sentence = make_sentence("x", 150);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  s.submit_guess(wrong_at(sentence, 70), t0 + 1s);
  try {
    s.submit_guess(char_at(sentence, 70), t0 + 1s + 50ms);
    FAIL();
  } catch (const RateLimitedError& e) {
    EXPECT_EQ(e.retry_after(), 250ms);
  }
  EXPECT_EQ(s.budget_remaining(), 79);
  EXPECT_EQ(s.attempts_on_current().size(), 1u);
  EXPECT_NO_THROW(s.submit_guess(char_at(sentence, 70), t0 + 1s + 300ms));
}

TEST(SubmitGuess, RepeatDoesNotSpendBudget) {
  const auto sentence = make_sentence("x", 150);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  const auto w = wrong_at(sentence, 70);
  s.submit_guess(w, t0 + 1s);
  EXPECT_EQ(error_of([&] { s.submit_guess(w, t0 + 2s); }), ErrorCode::repeat_guess);
  EXPECT_EQ(s.budget_remaining(), 79);
}

TEST(SubmitGuess, InvalidSymbolAndInactiveSession) {
  const auto sentence = make_sentence("x", 150);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  EXPECT_EQ(error_of([&] { s.submit_guess(U'Q', t0 + 1s); }), ErrorCode::invalid_symbol);
  EXPECT_EQ(error_of([&] { s.submit_guess(U'ы', t0 + 1s); }), ErrorCode::invalid_symbol);
  s.abandon(t0 + 2s);
  EXPECT_EQ(error_of([&] { s.submit_guess(char_at(sentence, 70), t0 + 3s); }), ErrorCode::session_not_active);
}

TEST(SubmitGuess, GuessingEveryCharacterCompletes) {
  const auto sentence = make_sentence("x", 120);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  auto now = t0;
  for (int pos = 70; pos < 120; ++pos) {
    now += 1s;
    s.submit_guess(char_at(sentence, pos), now);
  }
  EXPECT_EQ(s.status(), SessionStatus::completed);
  EXPECT_EQ(s.revealed_text(), sentence.normalized_text);
}

TEST(Abandon, KeepsEmittedObservationsAndRejectsSecondCall) {
  const auto sentence = make_sentence("x", 150);
  auto s = Session::start("s", "p", sentence, SessionConfig{}, t0);
  std::vector<Observation> emitted;
  for (int pos = 70; pos < 75; ++pos) {
    auto out = s.submit_guess(char_at(sentence, pos), t0 + std::chrono::seconds(pos));
    emitted.push_back(*out.observation);
  }
  s.abandon(t0 + 100s);
  EXPECT_EQ(s.status(), SessionStatus::abandoned);
  EXPECT_EQ(emitted.size(), 5u);
  EXPECT_EQ(error_of([&] { s.abandon(t0 + 101s); }), ErrorCode::session_not_active);
}

TEST(Abandon, EmptySessionContributesNothing) {
  auto s = Session::start("s", "p", make_sentence("x", 150), SessionConfig{}, t0);
  s.abandon(t0);
  EXPECT_EQ(s.total_guesses(), 0);
}

TEST(DeriveObservations, WrongWrongCorrectIsThreeAttempts) {
  const std::vector<GuessEvent> log = {
      {1, "s", "p", "x", 70, U'К', false, t0},
      {2, "s", "p", "x", 70, U'Н', false, t0 + 1s},
      {3, "s", "p", "x", 70, U'Л', true, t0 + 2s},
  };
  const auto out = derive_observations(log);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].position, 70);
  EXPECT_EQ(out[0].attempts, 3);
}

TEST(DeriveObservations, EmptyLog) { EXPECT_TRUE(derive_observations({}).empty()); }

TEST(DeriveObservations, CorruptLogs) {
  const std::vector<GuessEvent> dup = {{1, "s", "p", "x", 70, U'К', false, t0}, {1, "s", "p", "x", 70, U'Н', false, t0}};
  EXPECT_EQ(error_of([&] { derive_observations(dup); }), ErrorCode::corrupt_log);
  const std::vector<GuessEvent> jump = {{1, "s", "p", "x", 70, U'К', true, t0}, {2, "s", "p", "x", 72, U'Н', true, t0}};
  EXPECT_EQ(error_of([&] { derive_observations(jump); }), ErrorCode::corrupt_log);
  const std::vector<GuessEvent> repeat = {{1, "s", "p", "x", 70, U'К', false, t0},
                                          {2, "s", "p", "x", 70, U'К', false, t0}};
  EXPECT_EQ(error_of([&] { derive_observations(repeat); }), ErrorCode::corrupt_log);
  std::vector<GuessEvent> too_many;
  const auto symbols = Alphabet::ukrainian().symbols();
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    too_many.push_back({i + 1, "s", "p", "x", 70, symbols[i], false, t0});
  }
  EXPECT_EQ(error_of([&] { derive_observations(too_many); }), ErrorCode::corrupt_log);
}

TEST(GuessEventJson, RoundTrip) {
  const GuessEvent e{7, "s", "p", "x", 71, U'Ї', true, t0};
  EXPECT_EQ(guess_event_from_json(nlohmann::json::parse(to_json(e).dump())), e);
}

namespace {

struct Run {
  std::vector<Observation> online;
  std::vector<GuessEvent> events;
};

// Drives one session with a random guesser, random pacing (including
// too-fast and repeated guesses) and an occasional abandon.
Run drive_random_session(std::mt19937_64& rng, const std::string& id, Session& s, const SentenceRecord& sentence) {
  Run run;
  const auto& symbols = kUk.symbols();
  auto now = s.started_at();
  const int initial = s.initial_budget();
  while (s.status() == SessionStatus::active) {
    if (rng() % 400 == 0) {
      s.abandon(now);
      break;
    }
    now += std::chrono::milliseconds(rng() % 700);
    char32_t guess;
    const auto tried = s.attempts_on_current();
    const auto r = rng() % 10;
    if (r < 3) {
      guess = char_at(sentence, s.cursor());
    } else if (r == 3 && !tried.empty()) {
      guess = tried[rng() % tried.size()];
    } else {
      guess = symbols[rng() % symbols.size()];
    }
    const int budget_before = s.budget_remaining();
    const int cursor_before = s.cursor();
    const auto tried_before = std::vector<char32_t>(tried.begin(), tried.end());
    try {
      auto out = s.submit_guess(guess, now);
      EXPECT_EQ(s.budget_remaining(), budget_before - 1);
      run.events.push_back(out.event);
      if (out.observation) {
        EXPECT_LE(out.observation->attempts, static_cast<int>(symbols.size()));
        run.online.push_back(*out.observation);
      }
    } catch (const Error&) {
      // rejected calls change nothing
      EXPECT_EQ(s.budget_remaining(), budget_before);
      EXPECT_EQ(s.cursor(), cursor_before);
      EXPECT_TRUE(std::equal(tried_before.begin(), tried_before.end(), s.attempts_on_current().begin(),
                             s.attempts_on_current().end()));
    }
    EXPECT_GE(s.cursor(), s.prefix_len());
    EXPECT_LE(s.cursor(), s.sentence_length());
    EXPECT_GE(s.budget_remaining(), 0);
    EXPECT_LE(s.budget_remaining(), initial);
    const bool done = s.budget_remaining() == 0 || s.cursor() == s.sentence_length();
    EXPECT_EQ(s.status() == SessionStatus::completed, done) << id;
  }
  return run;
}

}  // namespace

TEST(SessionProperty, BudgetConservationOver1000RandomSessions) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto len = 71 + rng() % 130;
    const auto sentence = make_sentence("x" + std::to_string(i), len, rng());
    auto s = Session::start("s" + std::to_string(i), "p", sentence, SessionConfig{}, t0);
    const auto run = drive_random_session(rng, s.id(), s, sentence);
    int attempts = 0;
    for (const auto& o : run.online) attempts += o.attempts;
    const int pending = static_cast<int>(s.attempts_on_current().size());
    ASSERT_EQ(attempts + pending, s.initial_budget() - s.budget_remaining()) << "session " << i;
    ASSERT_EQ(s.total_guesses(), s.initial_budget() - s.budget_remaining());
    ASSERT_EQ(static_cast<std::size_t>(s.correct_guesses()), run.online.size());
  }
}

TEST(SessionProperty, ReplayEquivalenceOver1000RandomSessions) {
  std::mt19937_64 rng(23);
  std::vector<GuessEvent> merged;
  std::vector<Observation> online_all;
  for (int i = 0; i < 1000; ++i) {
    const auto sentence = make_sentence("x" + std::to_string(i), 71 + rng() % 130, rng());
    auto s = Session::start("s" + std::to_string(i), "p" + std::to_string(i % 17), sentence, SessionConfig{}, t0);
    const auto run = drive_random_session(rng, s.id(), s, sentence);
    ASSERT_EQ(derive_observations(run.events), run.online) << "session " << i;
    if (i < 50) {
      merged.insert(merged.end(), run.events.begin(), run.events.end());
      online_all.insert(online_all.end(), run.online.begin(), run.online.end());
    }
  }
  // Interleaving sessions by timestamp keeps every per-session stream intact.
  std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  auto derived = derive_observations(merged);
  auto key = [](const Observation& o) { return std::tie(o.session_id, o.position); };
  std::sort(derived.begin(), derived.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(online_all.begin(), online_all.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  EXPECT_EQ(derived, online_all);
}
