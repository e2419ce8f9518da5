#include "guesslab/observation.hpp"

#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"

namespace guesslab {

nlohmann::ordered_json to_json(const Observation& o) {
  nlohmann::ordered_json j;
  j["session_id"] = o.session_id;
  j["participant_id"] = o.participant_id;
  j["sentence_id"] = o.sentence_id;
  j["position"] = o.position;
  j["attempts"] = o.attempts;
  j["timestamp"] = to_millis(o.timestamp);
  return j;
}

Observation observation_from_json(const nlohmann::json& j) {
  Observation o;
  o.session_id = j.at("session_id").get<std::string>();
  o.participant_id = j.value("participant_id", std::string());
  o.sentence_id = j.value("sentence_id", std::string());
  o.position = j.at("position").get<int>();
  o.attempts = j.at("attempts").get<int>();
  o.timestamp = from_millis(j.value("timestamp", std::int64_t{0}));
  if (o.attempts < 1) throw Error(ErrorCode::invalid_input, "observation with attempts < 1");
  if (o.position < 0) throw Error(ErrorCode::invalid_input, "observation with negative position");
  return o;
}

std::vector<Observation> read_observations(const std::filesystem::path& path) {
  std::vector<Observation> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t lineno) {
    if (j.contains("record") && j["record"] != "observation") return;
    try {
      out.push_back(observation_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_input,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

void write_observations(const std::filesystem::path& path, const std::vector<Observation>& obs) {
  JsonlWriter w(path, true);
  for (const auto& o : obs) w.append(to_json(o));
}

}  // namespace guesslab
