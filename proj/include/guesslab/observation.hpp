#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace guesslab {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline std::int64_t to_millis(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_millis(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

/// One correctly guessed character: `attempts` tries at 0-based `position`.
struct Observation {
  std::string session_id;
  std::string participant_id;
  std::string sentence_id;
  int position = 0;
  int attempts = 1;
  Timestamp timestamp{};

  bool operator==(const Observation&) const = default;
};

nlohmann::ordered_json to_json(const Observation& o);
Observation observation_from_json(const nlohmann::json& j);

/// Reads an observation file. Lines carrying a "record" tag other than
/// "observation" (as in the service export bundle) are skipped.
std::vector<Observation> read_observations(const std::filesystem::path& path);
void write_observations(const std::filesystem::path& path, const std::vector<Observation>& obs);

}  // namespace guesslab
