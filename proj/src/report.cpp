#include "guesslab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"

namespace guesslab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json estimate_json(const PooledEstimate& e, std::size_t pool_size, double max_entropy) {
  ordered_json j;
  j["pool_size"] = pool_size;
  j["h_upper"] = e.h_upper;
  j["h_lower"] = e.h_lower;
  j["n_obs"] = e.n_obs;
  j["positions"] = e.per_position.size();
  j["redundancy"] = 1.0 - e.h_upper / max_entropy;
  j["non_monotone_positions"] = e.non_monotone_positions;
  return j;
}

ordered_json number_or_null(double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::storage_unavailable, "cannot write " + path.string());
}

}  // namespace

std::vector<double> default_trim_fractions() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9};
}

std::string format_number(double v) {
  if (std::isnan(v)) return {};  // empty CSV cell
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

ordered_json to_json(const AnalysisConfig& c) {
  ordered_json j;
  j["observations"] = c.observations.string();
  j["sessions"] = c.sessions.empty() ? json(nullptr) : json(c.sessions.string());
  j["alpha"] = c.alpha;
  j["trim_fraction"] = c.trim_fraction;
  j["trim_fractions"] = c.trim_fractions;
  j["window"] = std::to_string(c.window.first) + ":" + std::to_string(c.window.last);
  j["alphabet"] = c.alphabet->name();
  j["alphabet_size"] = c.alphabet->size();
  j["score"] = to_string(c.score);
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["retrim"] = c.retrim;
  return j;
}

std::vector<SessionRecord> derive_session_records(std::span<const Observation> observations) {
  std::map<std::string, SessionRecord> by_id;
  std::vector<std::string> order;
  for (const auto& o : observations) {
    auto [it, inserted] = by_id.try_emplace(o.session_id);
    if (inserted) {
      it->second.session_id = o.session_id;
      it->second.participant_id = o.participant_id;
      it->second.sentence_id = o.sentence_id;
      it->second.status = "unknown";
      order.push_back(o.session_id);
    }
    it->second.total_guesses += o.attempts;
    it->second.correct_guesses += 1;
  }
  std::vector<SessionRecord> out;
  out.reserve(order.size());
  for (const auto& id : order) out.push_back(by_id[id]);
  return out;
}

AnalysisInputs load_analysis_inputs(const AnalysisConfig& config) {
  if (!std::filesystem::exists(config.observations)) {
    throw Error(ErrorCode::invalid_input, "observation file " + config.observations.string() + " does not exist");
  }
  AnalysisInputs in;
  in.observations = read_observations(config.observations);
  in.files.push_back({config.observations.string(), sha256_file(config.observations)});
  if (!config.sessions.empty()) {
    in.sessions = read_session_records(config.sessions);
    in.session_source = "file";
    in.files.push_back({config.sessions.string(), sha256_file(config.sessions)});
  } else {
    // only lines explicitly tagged as session records count inside an observation file
    for_each_jsonl(config.observations, [&](const json& j, std::size_t) {
      if (j.is_object() && j.value("record", std::string()) == "session") {
        in.sessions.push_back(session_record_from_json(j));
      }
    });
    in.session_source = "bundle";
    if (in.sessions.empty()) {
      in.sessions = derive_session_records(in.observations);
      in.session_source = "derived";
    }
  }
  in.by_session = group_by_session(in.observations);
  return in;
}

ScreenedSessions screen_sessions(const AnalysisInputs& inputs, const AnalysisConfig& config) {
  ScreenedSessions s;
  s.scored = summarize_sessions(inputs.sessions, inputs.by_session, config.alphabet->size(), config.score);
  if (s.scored.empty()) throw Error(ErrorCode::no_data, "no session has observations");
  try {
    s.split = binomial_outlier_filter(s.scored, config.alpha);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_accuracy) throw;
    std::int64_t total = 0, correct = 0;
    for (const auto& x : s.scored) {
      total += x.total_guesses;
      correct += x.correct_guesses;
    }
    s.split.kept = s.scored;
    s.split.mean_accuracy = static_cast<double>(correct) / static_cast<double>(total);
    s.filter_skipped = true;
  }
  for (const auto& d : s.split.discarded) {
    auto it = std::find_if(s.scored.begin(), s.scored.end(),
                           [&](const SessionSummary& x) { return x.session_id == d.session_id; });
    if (it != s.scored.end()) it->suspicious = true;
  }
  s.retained = trim_bottom(s.split.kept, config.trim_fraction);
  return s;
}

ReportBundle run_analysis(const AnalysisInputs& inputs, const AnalysisConfig& config, AnalysisParts parts) {
  ReportBundle r;
  r.config = to_json(config);
  r.inputs = inputs.files;
  r.seed = config.seed;
  r.sessions_total = inputs.sessions.size();
  r.session_source = inputs.session_source;
  r.screened = screen_sessions(inputs, config);
  const auto k = config.alphabet->size();
  r.untrimmed = pooled_for_sessions(r.screened.split.kept, inputs.by_session, config.window, k);
  r.estimate = pooled_for_sessions(r.screened.retained, inputs.by_session, config.window, k);
  r.pool_size = r.screened.retained.size();

  BootstrapConfig bc;
  bc.replicates = config.replicates;
  bc.seed = config.seed;
  bc.window = config.window;
  bc.alphabet_size = k;
  bc.threads = config.threads;
  bc.retrim = config.retrim;
  bc.trim_fraction = config.trim_fraction;
  if (parts.bootstrap) {
    r.bootstrap = config.retrim ? bootstrap_upper(r.screened.split.kept, inputs.by_session, bc)
                                : bootstrap_upper(r.screened.retained, inputs.by_session, bc);
  }
  if (parts.trim_table) {
    if (parts.bootstrap) {
      r.trim_table = trim_table(r.screened.split.kept, inputs.by_session, config.trim_fractions, bc);
    } else {
      auto fractions = config.trim_fractions;
      std::sort(fractions.begin(), fractions.end());
      for (double f : fractions) {
        const auto retained = trim_bottom(r.screened.split.kept, f);
        const auto est = pooled_for_sessions(retained, inputs.by_session, config.window, k);
        TrimRow row;
        row.trim_fraction = f;
        row.pool_size = retained.size();
        row.point_estimate = est.h_upper;
        row.point_lower = est.h_lower;
        row.n_obs = est.n_obs;
        r.trim_table.push_back(row);
      }
    }
  }
  return r;
}

ordered_json to_json(const ReportBundle& r, double max_entropy) {
  ordered_json j;
  j["config"] = r.config;
  auto inputs = ordered_json::array();
  for (const auto& f : r.inputs) inputs.push_back(ordered_json{{"path", f.path}, {"sha256", f.sha256}});
  j["inputs"] = inputs;
  j["seed"] = r.seed;

  ordered_json sessions;
  sessions["source"] = r.session_source;
  sessions["records"] = r.sessions_total;
  sessions["with_observations"] = r.screened.scored.size();
  j["sessions"] = sessions;

  ordered_json outliers;
  outliers["mean_accuracy"] = r.screened.split.mean_accuracy;
  outliers["filter"] = r.screened.filter_skipped ? "skipped_degenerate_accuracy" : "binomial_upper_tail";
  outliers["discarded"] = r.screened.split.discarded.size();
  outliers["kept"] = r.screened.split.kept.size();
  auto ids = ordered_json::array();
  for (const auto& s : r.screened.split.discarded) ids.push_back(s.session_id);
  outliers["discarded_ids"] = ids;
  j["outliers"] = outliers;

  j["untrimmed"] = estimate_json(r.untrimmed, r.screened.split.kept.size(), max_entropy);
  j["estimate"] = estimate_json(r.estimate, r.pool_size, max_entropy);

  if (r.bootstrap.replicates > 0) {
    ordered_json b;
    b["replicates"] = r.bootstrap.replicates;
    b["seed"] = r.bootstrap.seed;
    b["retrimmed"] = r.bootstrap.retrimmed;
    b["median"] = r.bootstrap.median;
    b["ci_lo"] = r.bootstrap.ci_lo;
    b["ci_hi"] = r.bootstrap.ci_hi;
    b["ci_width"] = r.bootstrap.ci_width();
    j["bootstrap"] = b;
  } else {
    j["bootstrap"] = nullptr;
  }

  auto rows = ordered_json::array();
  for (const auto& t : r.trim_table) {
    ordered_json row;
    row["trim_fraction"] = t.trim_fraction;
    row["pool_size"] = t.pool_size;
    row["h_upper"] = t.point_estimate;
    row["h_lower"] = t.point_lower;
    row["n_obs"] = t.n_obs;
    row["redundancy"] = 1.0 - t.point_estimate / max_entropy;
    if (r.bootstrap.replicates > 0) {
      row["bootstrap_median"] = number_or_null(t.bootstrap_median);
      row["ci_lo"] = number_or_null(t.ci_lo);
      row["ci_hi"] = number_or_null(t.ci_hi);
      row["ci_width"] = number_or_null(t.ci_width());
    }
    rows.push_back(row);
  }
  j["trim_table"] = rows;
  j["csv_files"] = r.csv_files;
  return j;
}

std::string per_position_bounds_csv(const PooledEstimate& estimate) {
  std::string out = "position,n_obs,weight,h_upper,h_lower,rank_monotone\n";
  for (const auto& [pos, pb] : estimate.per_position) {
    out += std::to_string(pos) + "," + std::to_string(pb.bounds.n_obs) + "," +
           format_number(estimate.weights.at(pos)) + "," + format_number(pb.bounds.h_upper) + "," +
           format_number(pb.bounds.h_lower) + "," + (pb.rank_monotone ? "1" : "0") + "\n";
  }
  return out;
}

std::string per_position_counts_csv(std::span<const Observation> observations, std::size_t alphabet_size) {
  std::map<int, std::vector<std::int64_t>> counts;
  for (const auto& o : observations) {
    auto& row = counts[o.position];
    if (row.empty()) row.assign(alphabet_size, 0);
    if (o.attempts < 1 || static_cast<std::size_t>(o.attempts) > alphabet_size) {
      throw Error(ErrorCode::invalid_input, "attempts outside [1, K] in session " + o.session_id);
    }
    ++row[static_cast<std::size_t>(o.attempts - 1)];
  }
  std::string out = "position,n_obs";
  for (std::size_t i = 1; i <= alphabet_size; ++i) out += ",rank_" + std::to_string(i);
  out += "\n";
  for (const auto& [pos, row] : counts) {
    std::int64_t n = 0;
    for (auto c : row) n += c;
    out += std::to_string(pos) + "," + std::to_string(n);
    for (auto c : row) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

std::string session_scores_csv(const ScreenedSessions& screened) {
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < screened.retained.size(); ++i) rank[screened.retained[i].session_id] = i + 1;
  std::string out = "session_id,total_guesses,correct_guesses,accuracy,score,suspicious,retained_rank\n";
  for (const auto& s : screened.scored) {
    const double acc = s.total_guesses > 0 ? static_cast<double>(s.correct_guesses) / s.total_guesses : 0.0;
    auto it = rank.find(s.session_id);
    out += s.session_id + "," + std::to_string(s.total_guesses) + "," + std::to_string(s.correct_guesses) + "," +
           format_number(acc) + "," + format_number(s.score) + "," + (s.suspicious ? "1" : "0") + "," +
           (it == rank.end() ? std::string() : std::to_string(it->second)) + "\n";
  }
  return out;
}

std::string trim_table_csv(std::span<const TrimRow> rows, double max_entropy, bool with_bootstrap) {
  std::string out =
      "trim_fraction,pool_size,h_upper,h_lower,n_obs,redundancy,bootstrap_median,ci_lo,ci_hi,ci_width\n";
  for (const auto& t : rows) {
    out += format_number(t.trim_fraction) + "," + std::to_string(t.pool_size) + "," +
           format_number(t.point_estimate) + "," + format_number(t.point_lower) + "," + std::to_string(t.n_obs) +
           "," + format_number(1.0 - t.point_estimate / max_entropy);
    if (with_bootstrap) {
      out += "," + format_number(t.bootstrap_median) + "," + format_number(t.ci_lo) + "," + format_number(t.ci_hi) +
             "," + format_number(t.ci_width()) + "\n";
    } else {
      out += ",,,,\n";
    }
  }
  return out;
}

std::vector<std::string> write_figures(const std::filesystem::path& dir, const AnalysisInputs& inputs,
                                       const ReportBundle& report, double max_entropy) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::storage_unavailable, "cannot create " + dir.string() + ": " + ec.message());
  const std::size_t k = static_cast<std::size_t>(report.config.at("alphabet_size").get<std::size_t>());
  std::vector<std::pair<std::string, std::string>> files = {
      {"entropy_by_position.csv", per_position_bounds_csv(report.estimate)},
      {"observations_by_position.csv", per_position_counts_csv(inputs.observations, k)},
      {"session_scores.csv", session_scores_csv(report.screened)},
  };
  if (!report.trim_table.empty()) files.emplace_back("trim_table.csv", trim_table_csv(report.trim_table, max_entropy, report.bootstrap.replicates > 0));
  std::vector<std::string> written;
  for (const auto& [name, text] : files) {
    write_text(dir / name, text);
    written.push_back((dir / name).string());
  }
  return written;
}

}  // namespace guesslab
