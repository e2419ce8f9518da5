#include "guesslab/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "guesslab/error.hpp"
#include "guesslab/robustness.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::int64_t env_int(const char* name, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto n = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_input, std::string(name) + " must be an integer, got '" + value + "'");
  }
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << bytes;
    out.flush();
    if (!out) throw Error(ErrorCode::storage_unavailable, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::storage_unavailable, "cannot replace " + path.string() + ": " + ec.message());
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace

ordered_json ServiceConfig::to_json() const {
  ordered_json j;
  j["listen_host"] = listen_host;
  j["port"] = port;
  j["corpus_path"] = corpus_path.string();
  j["data_dir"] = data_dir.string();
  j["alphabet_path"] = alphabet_path.string();
  j["prefix_len"] = prefix_len;
  j["min_attempt_interval_ms"] = min_attempt_interval.count();
  j["session_ttl_s"] = session_ttl.count();
  j["snapshot_every"] = snapshot_every;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  ServiceConfig c;
  if (!path.empty()) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::invalid_input, "config " + path.string() + ": " + e.what());
    }
    try {
      c.listen_host = j.value("listen_host", c.listen_host);
      c.port = j.value("port", c.port);
      if (j.contains("corpus_path")) c.corpus_path = j["corpus_path"].get<std::string>();
      if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
      if (j.contains("alphabet_path")) c.alphabet_path = j["alphabet_path"].get<std::string>();
      c.prefix_len = j.value("prefix_len", c.prefix_len);
      if (j.contains("min_attempt_interval_ms")) {
        c.min_attempt_interval = std::chrono::milliseconds(j["min_attempt_interval_ms"].get<std::int64_t>());
      }
      if (j.contains("session_ttl_s")) c.session_ttl = std::chrono::seconds(j["session_ttl_s"].get<std::int64_t>());
      c.export_salt = j.value("export_salt", c.export_salt);
      c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
      if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_input, "config " + path.string() + ": " + e.what());
    }
  }
  apply_env_overrides(c);
  return c;
}

void apply_env_overrides(ServiceConfig& c) {
  if (auto v = env("GUESSLAB_LISTEN_HOST")) c.listen_host = *v;
  if (auto v = env("GUESSLAB_PORT")) c.port = static_cast<int>(env_int("GUESSLAB_PORT", *v));
  if (auto v = env("GUESSLAB_CORPUS")) c.corpus_path = *v;
  if (auto v = env("GUESSLAB_DATA_DIR")) c.data_dir = *v;
  if (auto v = env("GUESSLAB_ALPHABET")) c.alphabet_path = *v;
  if (auto v = env("GUESSLAB_PREFIX_LEN")) c.prefix_len = static_cast<int>(env_int("GUESSLAB_PREFIX_LEN", *v));
  if (auto v = env("GUESSLAB_MIN_ATTEMPT_INTERVAL_MS")) {
    c.min_attempt_interval = std::chrono::milliseconds(env_int("GUESSLAB_MIN_ATTEMPT_INTERVAL_MS", *v));
  }
  if (auto v = env("GUESSLAB_SESSION_TTL_S")) c.session_ttl = std::chrono::seconds(env_int("GUESSLAB_SESSION_TTL_S", *v));
  if (auto v = env("GUESSLAB_EXPORT_SALT")) c.export_salt = *v;
  if (auto v = env("GUESSLAB_SNAPSHOT_EVERY")) {
    c.snapshot_every = static_cast<std::uint64_t>(env_int("GUESSLAB_SNAPSHOT_EVERY", *v));
  }
  if (auto v = env("GUESSLAB_SEED")) c.seed = static_cast<std::uint64_t>(env_int("GUESSLAB_SEED", *v));
}

FileEventLog::FileEventLog(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
  writer_ = std::make_unique<JsonlWriter>(path_);
}

void FileEventLog::append(const ordered_json& record) { writer_->append(record); }

std::vector<json> FileEventLog::read_all() {
  std::vector<json> out;
  if (!std::filesystem::exists(path_)) return out;
  for_each_jsonl(path_, [&](const json& j, std::size_t) { out.push_back(j); });
  return out;
}

void MemoryEventLog::append(const ordered_json& record) {
  std::lock_guard lock(mutex_);
  if (!available_) throw Error(ErrorCode::storage_unavailable, "event log unavailable");
  records_.push_back(json::parse(record.dump()));
}

std::vector<json> MemoryEventLog::read_all() {
  std::lock_guard lock(mutex_);
  if (!available_) throw Error(ErrorCode::storage_unavailable, "event log unavailable");
  return records_;
}

Timestamp system_now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

ordered_json to_json(const ServiceStats& s) {
  ordered_json j;
  j["sessions_started"] = s.sessions_started;
  j["sessions_completed"] = s.sessions_completed;
  j["sessions_abandoned"] = s.sessions_abandoned;
  j["sessions_active"] = s.sessions_started - s.sessions_completed - s.sessions_abandoned;
  j["total_guesses"] = s.total_guesses;
  j["correct_guesses"] = s.correct_guesses;
  j["observations"] = s.observations;
  return j;
}

ordered_json to_json(const SessionView& v) {
  ordered_json j;
  j["session_id"] = v.session_id;
  j["participant_id"] = v.participant_id;
  j["sentence_id"] = v.sentence_id;
  j["status"] = to_string(v.status);
  j["revealed_text"] = v.revealed_text;
  j["prefix_len"] = v.prefix_len;
  j["cursor"] = v.cursor;
  j["sentence_length"] = v.sentence_length;
  j["budget"] = v.budget;
  j["budget_remaining"] = v.budget_remaining;
  auto wrong = json::array();
  for (char32_t c : v.wrong_guesses) wrong.push_back(utf8::encode(c));
  j["wrong_guesses"] = wrong;
  j["total_guesses"] = v.total_guesses;
  j["correct_guesses"] = v.correct_guesses;
  j["locked_until"] = to_millis(v.locked_until);
  return j;
}

struct ExperimentService::SessionEntry {
  explicit SessionEntry(Session s) : session(std::move(s)) {}
  std::mutex mutex;
  Session session;
};

ExperimentService::ExperimentService(std::vector<SentenceRecord> pool, ServiceConfig config,
                                     std::unique_ptr<EventLog> log, Clock clock)
    : config_(std::move(config)), log_(std::move(log)), clock_(std::move(clock)) {
  if (!log_) throw Error(ErrorCode::invalid_input, "event log required");
  session_config_.prefix_len = config_.prefix_len;
  session_config_.min_attempt_interval = config_.min_attempt_interval;
  if (!config_.alphabet_path.empty()) {
    session_config_.alphabet = std::make_shared<const Alphabet>(Alphabet::load(config_.alphabet_path));
  }
  // Sentences with nothing past the prefix can never start a session.
  for (auto& s : pool) {
    if (static_cast<int>(s.length) > config_.prefix_len) pool_.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (!pool_index_.emplace(pool_[i].id, i).second) {
      throw Error(ErrorCode::invalid_input, "duplicate sentence id '" + pool_[i].id + "'");
    }
  }
  rng_.seed(config_.seed ? *config_.seed : std::random_device{}());
}

ExperimentService::~ExperimentService() = default;

std::uint64_t ExperimentService::log_seq() const {
  std::lock_guard lock(log_mutex_);
  return seq_;
}

std::uint64_t ExperimentService::append(ordered_json record) {
  std::lock_guard lock(log_mutex_);
  ordered_json out;
  out["type"] = record["type"];
  out["seq"] = seq_ + 1;
  for (auto& [k, v] : record.items()) {
    if (k != "type" && k != "seq") out[k] = v;
  }
  log_->append(out);
  return ++seq_;
}

std::string ExperimentService::new_id(std::string_view prefix) {
  return std::string(prefix) + hex64(rng_());
}

std::string ExperimentService::pseudonym(const std::string& participant_id) const {
  return "anon-" + sha256_hex(config_.export_salt + ":" + participant_id).substr(0, 16);
}

void ExperimentService::maybe_snapshot(std::uint64_t seq) {
  if (config_.snapshot_every == 0 || seq % config_.snapshot_every != 0) return;
  try {
    write_snapshot();
  } catch (const Error&) {
    // a missed snapshot is recovered from the log on the next one
  }
}

Participant ExperimentService::register_participant(std::optional<std::string> display_name) {
  Participant p;
  {
    std::lock_guard lock(state_mutex_);
    do {
      p.id = new_id("p-");
    } while (participants_.contains(p.id));
  }
  p.display_name = std::move(display_name);
  p.created_at = clock_();
  ordered_json rec;
  rec["type"] = "participant";
  rec["participant_id"] = p.id;
  rec["display_name"] = p.display_name ? json(*p.display_name) : json(nullptr);
  rec["ts"] = to_millis(p.created_at);
  const auto seq = append(std::move(rec));
  {
    std::lock_guard lock(state_mutex_);
    std::vector<std::size_t> all(pool_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    unseen_[p.id] = std::move(all);
    participants_[p.id] = p;
  }
  maybe_snapshot(seq);
  return p;
}

const SentenceRecord& ExperimentService::pick_sentence(const std::string& participant_id) {
  auto& unseen = unseen_[participant_id];
  if (unseen.empty()) {
    std::uniform_int_distribution<std::size_t> d(0, pool_.size() - 1);
    return pool_[d(rng_)];
  }
  std::uniform_int_distribution<std::size_t> d(0, unseen.size() - 1);
  const auto k = d(rng_);
  const auto idx = unseen[k];
  unseen[k] = unseen.back();
  unseen.pop_back();
  return pool_[idx];
}

SessionView ExperimentService::start_session(const std::string& participant_id) {
  std::string session_id;
  const SentenceRecord* sentence = nullptr;
  std::vector<std::size_t> unseen_before;
  {
    std::lock_guard lock(state_mutex_);
    if (!participants_.contains(participant_id)) {
      throw Error(ErrorCode::unknown_participant, "unknown participant '" + participant_id + "'");
    }
    if (pool_.empty()) throw Error(ErrorCode::pool_exhausted, "sentence pool has no usable sentence");
    unseen_before = unseen_[participant_id];
    sentence = &pick_sentence(participant_id);
    do {
      session_id = new_id("s-");
    } while (sessions_.contains(session_id));
  }
  const auto now = clock_();
  auto entry = std::make_shared<SessionEntry>(
      Session::start(session_id, participant_id, *sentence, session_config_, now));
  ordered_json rec;
  rec["type"] = "session_started";
  rec["session_id"] = session_id;
  rec["participant_id"] = participant_id;
  rec["sentence_id"] = sentence->id;
  rec["prefix_len"] = session_config_.prefix_len;
  rec["ts"] = to_millis(now);
  std::uint64_t seq = 0;
  try {
    seq = append(std::move(rec));
  } catch (...) {
    std::lock_guard lock(state_mutex_);
    unseen_[participant_id] = std::move(unseen_before);
    throw;
  }
  SessionView v = make_view(*entry);
  {
    std::lock_guard lock(state_mutex_);
    sessions_.emplace(session_id, entry);
    session_order_.push_back(session_id);
    ++counters_.sessions_started;
  }
  maybe_snapshot(seq);
  return v;
}

std::shared_ptr<ExperimentService::SessionEntry> ExperimentService::find_session(
    const std::string& session_id) const {
  std::lock_guard lock(state_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::unknown_session, "unknown session '" + session_id + "'");
  return it->second;
}

GuessOutcome ExperimentService::guess(const std::string& session_id, char32_t symbol) {
  auto entry = find_session(session_id);
  GuessOutcome outcome;
  std::uint64_t seq = 0;
  {
    std::lock_guard lock(entry->mutex);
    Session next = entry->session;
    outcome = next.submit_guess(session_config_.alphabet->fold(symbol), clock_());
    seq = append(to_json(outcome.event));
    outcome.event.seq = seq;
    entry->session = std::move(next);
    std::lock_guard state(state_mutex_);
    ++counters_.total_guesses;
    if (outcome.correct) ++counters_.correct_guesses;
    if (outcome.observation) {
      observations_.emplace_back(seq, *outcome.observation);
      ++counters_.observations;
    }
    if (outcome.status == SessionStatus::completed) ++counters_.sessions_completed;
  }
  maybe_snapshot(seq);
  return outcome;
}

SessionView ExperimentService::abandon(const std::string& session_id, const std::string& reason) {
  auto entry = find_session(session_id);
  SessionView v;
  std::uint64_t seq = 0;
  {
    std::lock_guard lock(entry->mutex);
    Session next = entry->session;
    const auto now = clock_();
    next.abandon(now);
    ordered_json rec;
    rec["type"] = "session_abandoned";
    rec["session_id"] = session_id;
    rec["reason"] = reason;
    rec["ts"] = to_millis(now);
    seq = append(std::move(rec));
    entry->session = std::move(next);
    v = make_view(*entry);
    std::lock_guard state(state_mutex_);
    ++counters_.sessions_abandoned;
  }
  maybe_snapshot(seq);
  return v;
}

SessionView ExperimentService::make_view(const SessionEntry& entry) const {
  const Session& s = entry.session;
  SessionView v;
  v.session_id = s.id();
  v.participant_id = s.participant_id();
  v.sentence_id = s.sentence_id();
  v.status = s.status();
  v.revealed_text = s.revealed_text();
  v.prefix_len = s.prefix_len();
  v.cursor = s.cursor();
  v.sentence_length = s.sentence_length();
  v.budget = s.initial_budget();
  v.budget_remaining = s.budget_remaining();
  if (s.status() == SessionStatus::active) {
    v.wrong_guesses.assign(s.attempts_on_current().begin(), s.attempts_on_current().end());
    v.locked_until = s.last_event_at() + s.config().min_attempt_interval;
  } else {
    v.locked_until = s.last_event_at();
  }
  v.total_guesses = s.total_guesses();
  v.correct_guesses = s.correct_guesses();
  return v;
}

SessionView ExperimentService::view(const std::string& session_id) const {
  auto entry = find_session(session_id);
  std::lock_guard lock(entry->mutex);
  return make_view(*entry);
}

ServiceStats ExperimentService::stats() const {
  std::lock_guard lock(state_mutex_);
  return counters_;
}

std::size_t ExperimentService::sweep_idle() {
  std::vector<std::shared_ptr<SessionEntry>> entries;
  {
    std::lock_guard lock(state_mutex_);
    for (const auto& id : session_order_) entries.push_back(sessions_.at(id));
  }
  const auto now = clock_();
  std::size_t swept = 0;
  for (const auto& e : entries) {
    {
      std::lock_guard lock(e->mutex);
      if (e->session.status() != SessionStatus::active) continue;
      if (now - e->session.last_event_at() <= config_.session_ttl) continue;
    }
    try {
      abandon(e->session.id(), "idle_timeout");
      ++swept;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::session_not_active) throw;
    }
  }
  return swept;
}

std::string ExperimentService::export_jsonl() const {
  auto obs = observations();
  auto records = session_records();
  std::string out;
  ordered_json header;
  header["record"] = "header";
  header["format"] = "guesslab-export";
  header["version"] = 1;
  header["alphabet"] = session_config_.alphabet->name();
  header["alphabet_size"] = session_config_.alphabet->size();
  header["prefix_len"] = session_config_.prefix_len;
  header["min_attempt_interval_ms"] = session_config_.min_attempt_interval.count();
  header["session_ttl_s"] = config_.session_ttl.count();
  header["repeat_guesses"] = "rejected";
  header["participant_ids"] = "pseudonymized";
  header["observations"] = obs.size();
  header["sessions"] = records.size();
  out += dump_line(header) + '\n';
  for (auto& o : obs) {
    ordered_json line;
    line["record"] = "observation";
    o.participant_id = pseudonym(o.participant_id);
    const auto body = to_json(o);
    for (auto& [k, v] : body.items()) line[k] = v;
    out += dump_line(line) + '\n';
  }
  for (auto& r : records) {
    ordered_json line;
    line["record"] = "session";
    r.participant_id = pseudonym(r.participant_id);
    const auto body = to_json(r);
    for (auto& [k, v] : body.items()) line[k] = v;
    out += dump_line(line) + '\n';
  }
  return out;
}

std::vector<Observation> ExperimentService::observations() const {
  std::vector<std::pair<std::uint64_t, Observation>> obs;
  {
    std::lock_guard lock(state_mutex_);
    obs = observations_;
  }
  std::stable_sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Observation> out;
  out.reserve(obs.size());
  for (auto& [seq, o] : obs) out.push_back(std::move(o));
  return out;
}

std::vector<SessionRecord> ExperimentService::session_records() const {
  std::vector<std::shared_ptr<SessionEntry>> entries;
  {
    std::lock_guard lock(state_mutex_);
    for (const auto& id : session_order_) entries.push_back(sessions_.at(id));
  }
  std::vector<SessionRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    std::lock_guard lock(e->mutex);
    const Session& s = e->session;
    out.push_back({s.id(), s.participant_id(), s.sentence_id(), std::string(to_string(s.status())),
                   s.total_guesses(), s.correct_guesses()});
  }
  return out;
}

void ExperimentService::write_snapshot() const {
  const std::uint64_t seq = log_seq();
  const auto counters = stats();
  std::string obs_bytes;
  for (const auto& o : observations()) obs_bytes += dump_line(to_json(o)) + '\n';
  std::string session_bytes;
  for (const auto& r : session_records()) session_bytes += dump_line(to_json(r)) + '\n';
  ordered_json meta;
  meta["log_seq"] = seq;
  meta["written_at"] = to_millis(clock_());
  meta["stats"] = to_json(counters);
  std::error_code ec;
  std::filesystem::create_directories(config_.data_dir, ec);
  write_atomically(config_.data_dir / "observations.jsonl", obs_bytes);
  write_atomically(config_.data_dir / "sessions.jsonl", session_bytes);
  write_atomically(config_.data_dir / "snapshot.json", meta.dump(2) + "\n");
}

void ExperimentService::recover() {
  {
    std::lock_guard lock(state_mutex_);
    if (!sessions_.empty() || !participants_.empty()) {
      throw Error(ErrorCode::invalid_input, "recover() needs an empty service");
    }
  }
  const auto records = log_->read_all();
  for (const auto& r : records) apply(r);
}

void ExperimentService::apply(const json& r) {
  const auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::corrupt_log, "log record seq " + r.value("seq", json()).dump() + ": " + why);
  };
  std::uint64_t seq = 0;
  std::string type;
  try {
    seq = r.at("seq").get<std::uint64_t>();
    type = r.at("type").get<std::string>();
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  }
  if (seq <= seq_) throw corrupt("sequence number not increasing");
  std::lock_guard lock(state_mutex_);
  try {
    const auto ts = from_millis(r.at("ts").get<std::int64_t>());
    if (type == "participant") {
      Participant p;
      p.id = r.at("participant_id").get<std::string>();
      if (r.contains("display_name") && !r["display_name"].is_null()) {
        p.display_name = r["display_name"].get<std::string>();
      }
      p.created_at = ts;
      if (participants_.contains(p.id)) throw corrupt("duplicate participant");
      std::vector<std::size_t> all(pool_.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      unseen_[p.id] = std::move(all);
      participants_[p.id] = std::move(p);
    } else if (type == "session_started") {
      const auto sid = r.at("session_id").get<std::string>();
      const auto pid = r.at("participant_id").get<std::string>();
      const auto sentence_id = r.at("sentence_id").get<std::string>();
      if (sessions_.contains(sid)) throw corrupt("duplicate session");
      // logs written without participant records (e.g. imported data) register implicitly
      if (!participants_.contains(pid)) {
        std::vector<std::size_t> all(pool_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        unseen_[pid] = std::move(all);
        participants_[pid] = Participant{pid, std::nullopt, ts};
      }
      auto it = pool_index_.find(sentence_id);
      if (it == pool_index_.end()) throw corrupt("sentence '" + sentence_id + "' not in pool");
      auto& unseen = unseen_[pid];
      if (auto u = std::find(unseen.begin(), unseen.end(), it->second); u != unseen.end()) {
        *u = unseen.back();
        unseen.pop_back();
      }
      SessionConfig sc = session_config_;
      sc.prefix_len = r.value("prefix_len", sc.prefix_len);
      sessions_.emplace(sid, std::make_shared<SessionEntry>(Session::start(sid, pid, pool_[it->second], sc, ts)));
      session_order_.push_back(sid);
      ++counters_.sessions_started;
    } else if (type == "guess") {
      const auto ev = guess_event_from_json(r);
      auto it = sessions_.find(ev.session_id);
      if (it == sessions_.end()) throw corrupt("guess for unknown session");
      Session& s = it->second->session;
      if (ev.position != s.cursor()) throw corrupt("guess position does not match the session cursor");
      auto outcome = s.submit_guess(ev.symbol, ev.timestamp);
      if (outcome.correct != ev.correct) throw corrupt("logged correctness disagrees with the sentence");
      ++counters_.total_guesses;
      if (outcome.correct) ++counters_.correct_guesses;
      if (outcome.observation) {
        observations_.emplace_back(seq, *outcome.observation);
        ++counters_.observations;
      }
      if (outcome.status == SessionStatus::completed) ++counters_.sessions_completed;
    } else if (type == "session_abandoned") {
      const auto sid = r.at("session_id").get<std::string>();
      auto it = sessions_.find(sid);
      if (it == sessions_.end()) throw corrupt("abandon for unknown session");
      it->second->session.abandon(ts);
      ++counters_.sessions_abandoned;
    } else {
      throw corrupt("unknown record type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw corrupt(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::corrupt_log) throw;
    throw corrupt(std::string(to_string(e.code())) + ": " + e.what());
  }
  seq_ = seq;
}

}  // namespace guesslab
