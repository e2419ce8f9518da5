#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "guesslab/corpus.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/observation.hpp"
#include "guesslab/robustness.hpp"
#include "guesslab/session.hpp"

namespace httplib {
class Server;
}

namespace guesslab {

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path corpus_path;
  std::filesystem::path data_dir = "data";
  std::filesystem::path alphabet_path;  // empty: built-in Ukrainian
  int prefix_len = 70;
  std::chrono::milliseconds min_attempt_interval{300};
  std::chrono::seconds session_ttl{24 * 3600};
  std::string export_salt = "guesslab";
  std::uint64_t snapshot_every = 1000;  // events between snapshots; 0 disables
  std::optional<std::uint64_t> seed;    // id and assignment RNG; random when unset

  nlohmann::ordered_json to_json() const;
};

/// Reads a JSON config file (missing keys keep defaults), then applies
/// GUESSLAB_* environment overrides. An empty path skips the file.
ServiceConfig load_service_config(const std::filesystem::path& path);
void apply_env_overrides(ServiceConfig& config);

/// Durable append-only record store. `append` returns only once the record is
/// persisted and throws StorageUnavailable otherwise.
class EventLog {
 public:
  virtual ~EventLog() = default;
  virtual void append(const nlohmann::ordered_json& record) = 0;
  virtual std::vector<nlohmann::json> read_all() = 0;
};

class FileEventLog final : public EventLog {
 public:
  explicit FileEventLog(std::filesystem::path path);
  void append(const nlohmann::ordered_json& record) override;
  std::vector<nlohmann::json> read_all() override;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::unique_ptr<JsonlWriter> writer_;
};

/// In-memory log; `set_available(false)` simulates a storage outage.
class MemoryEventLog final : public EventLog {
 public:
  void append(const nlohmann::ordered_json& record) override;
  std::vector<nlohmann::json> read_all() override;
  void set_available(bool available) { available_ = available; }

 private:
  std::mutex mutex_;
  std::vector<nlohmann::json> records_;
  bool available_ = true;
};

using Clock = std::function<Timestamp()>;
Timestamp system_now();

struct Participant {
  std::string id;
  std::optional<std::string> display_name;
  Timestamp created_at{};
};

struct ServiceStats {
  std::uint64_t sessions_started = 0;
  std::uint64_t sessions_completed = 0;
  std::uint64_t sessions_abandoned = 0;
  std::uint64_t total_guesses = 0;
  std::uint64_t correct_guesses = 0;
  std::uint64_t observations = 0;

  bool operator==(const ServiceStats&) const = default;
};

nlohmann::ordered_json to_json(const ServiceStats& s);

/// What a client may see of a session: never a character past the cursor.
struct SessionView {
  std::string session_id;
  std::string participant_id;
  std::string sentence_id;
  SessionStatus status = SessionStatus::active;
  std::string revealed_text;
  int prefix_len = 0;
  int cursor = 0;
  int sentence_length = 0;
  int budget = 0;
  int budget_remaining = 0;
  std::vector<char32_t> wrong_guesses;
  int total_guesses = 0;
  int correct_guesses = 0;
  Timestamp locked_until{};
};

nlohmann::ordered_json to_json(const SessionView& v);

/// Experiment state behind the HTTP API. Every mutation is appended to the
/// event log before it becomes visible; a fresh instance over the same log
/// rebuilds identical state via `recover`.
///
/// Thread-safe. Guesses on one session are serialized; different sessions
/// proceed independently.
class ExperimentService {
 public:
  ExperimentService(std::vector<SentenceRecord> pool, ServiceConfig config, std::unique_ptr<EventLog> log,
                    Clock clock = system_now);
  ~ExperimentService();

  /// Replays the log into empty state. Throws CorruptLog on an inconsistent log.
  void recover();

  Participant register_participant(std::optional<std::string> display_name);
  SessionView start_session(const std::string& participant_id);
  GuessOutcome guess(const std::string& session_id, char32_t symbol);
  SessionView abandon(const std::string& session_id, const std::string& reason = "participant");
  SessionView view(const std::string& session_id) const;
  ServiceStats stats() const;

  /// Abandons active sessions idle for longer than the TTL; returns how many.
  std::size_t sweep_idle();

  /// Header line, then observation records in log order, then session records
  /// in start order. Participant ids are replaced by salted hashes.
  std::string export_jsonl() const;

  /// Observations in log order, raw participant ids.
  std::vector<Observation> observations() const;
  /// One record per session in start order, raw participant ids.
  std::vector<SessionRecord> session_records() const;

  /// Writes snapshot.json, observations.jsonl and sessions.jsonl into data_dir.
  void write_snapshot() const;

  std::string pseudonym(const std::string& participant_id) const;
  const ServiceConfig& config() const noexcept { return config_; }
  const SessionConfig& session_config() const noexcept { return session_config_; }
  std::uint64_t log_seq() const;

 private:
  struct SessionEntry;

  std::uint64_t append(nlohmann::ordered_json record);
  std::shared_ptr<SessionEntry> find_session(const std::string& session_id) const;
  const SentenceRecord& pick_sentence(const std::string& participant_id);
  std::string new_id(std::string_view prefix);
  SessionView make_view(const SessionEntry& entry) const;
  void apply(const nlohmann::json& record);
  void maybe_snapshot(std::uint64_t seq);

  std::vector<SentenceRecord> pool_;
  std::unordered_map<std::string, std::size_t> pool_index_;
  ServiceConfig config_;
  SessionConfig session_config_;
  std::unique_ptr<EventLog> log_;
  Clock clock_;

  mutable std::mutex state_mutex_;  // registries, rng, counters
  mutable std::mutex log_mutex_;    // seq assignment and append order
  std::uint64_t seq_ = 0;
  std::mt19937_64 rng_;
  std::unordered_map<std::string, Participant> participants_;
  std::unordered_map<std::string, std::vector<std::size_t>> unseen_;  // per participant
  std::unordered_map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::vector<std::string> session_order_;
  std::vector<std::pair<std::uint64_t, Observation>> observations_;  // (seq, obs)
  ServiceStats counters_;
};

/// Installs the /api routes on `server`. Errors map to {code, message} bodies.
void install_routes(httplib::Server& server, ExperimentService& service);

/// Async-signal-safe: makes every HttpService::wait() return.
void request_shutdown() noexcept;

/// Owns an httplib server bound to the configured address, running on a
/// background thread, plus the idle-session sweeper.
class HttpService {
 public:
  HttpService(ExperimentService& service, const std::string& host, int port,
              std::chrono::milliseconds sweep_interval = std::chrono::minutes(1));
  ~HttpService();

  int port() const noexcept { return port_; }
  std::string base_url() const;
  /// Blocks until stop() is called from another thread or request_shutdown()
  /// from a signal handler.
  void wait();
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
  std::string host_;
  int port_ = -1;
  std::thread listener_;
  std::thread sweeper_;
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  bool stopping_ = false;
};

}  // namespace guesslab
