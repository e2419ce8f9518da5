#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "guesslab/estimator.hpp"
#include "guesslab/observation.hpp"

namespace guesslab {

/// Per-session guess totals as exported by the service (sessions.jsonl).
struct SessionRecord {
  std::string session_id;
  std::string participant_id;
  std::string sentence_id;
  std::string status;
  std::int64_t total_guesses = 0;
  std::int64_t correct_guesses = 0;
};

nlohmann::ordered_json to_json(const SessionRecord& r);
SessionRecord session_record_from_json(const nlohmann::json& j);
/// Skips lines tagged with a "record" other than "session".
std::vector<SessionRecord> read_session_records(const std::filesystem::path& path);

struct SessionSummary {
  std::string session_id;
  std::int64_t total_guesses = 0;    // correct + wrong
  std::int64_t correct_guesses = 0;
  double score = 0.0;                // bits/char, lower is better
  bool suspicious = false;
};

using ObservationsBySession = std::unordered_map<std::string, std::vector<Observation>>;

ObservationsBySession group_by_session(std::span<const Observation> observations);

/// Joins session totals with their observations and scores each session.
/// Sessions without any observation cannot be scored and are left out.
std::vector<SessionSummary> summarize_sessions(std::span<const SessionRecord> records,
                                               const ObservationsBySession& observations,
                                               std::size_t alphabet_size,
                                               ScoreStatistic statistic = ScoreStatistic::merged_upper_bound);

/// P[X >= k] for X ~ Binomial(n, p), summed exactly over pmf terms.
double binomial_upper_tail(std::int64_t n, std::int64_t k, double p);

struct OutlierSplit {
  std::vector<SessionSummary> kept;
  std::vector<SessionSummary> discarded;  // marked suspicious
  double mean_accuracy = 0.0;
};

/// One-sided filter for improbably good sessions. The pooled accuracy
/// p = sum(correct) / sum(total) is computed once over all input sessions; a
/// session is discarded iff P[X >= correct] < alpha under Binomial(total, p).
/// Input order is preserved in both outputs.
OutlierSplit binomial_outlier_filter(std::vector<SessionSummary> sessions, double alpha = 0.01);

/// ceil((1 - fraction) * n), robust to floating-point noise when the product is integral.
std::size_t retained_count(std::size_t n, double fraction);

/// Keeps the best ceil((1 - fraction) * N) sessions, ordered by
/// (score asc, total_guesses desc, session_id asc).
std::vector<SessionSummary> trim_bottom(std::vector<SessionSummary> sessions, double fraction);

struct BootstrapConfig {
  int replicates = 2000;
  std::uint64_t seed = 0;
  PositionWindow window{};
  std::size_t alphabet_size = 34;
  unsigned threads = 1;
  /// Re-apply trim_bottom(trim_fraction) inside every replicate, resampling the
  /// untrimmed pool. Off: the caller passes an already-trimmed pool.
  bool retrim = false;
  double trim_fraction = 0.0;
};

struct BootstrapResult {
  int replicates = 0;
  std::vector<double> estimates;  // in replicate order
  double median = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::uint64_t seed = 0;
  bool retrimmed = false;

  double ci_width() const noexcept { return ci_hi - ci_lo; }
};

/// Linear-interpolation percentile (pct in [0, 100]) of an ascending sample.
double percentile(std::span<const double> sorted, double pct);

/// Session-level bootstrap of the pooled upper bound. Each replicate draws
/// |sessions| sessions with replacement and pools their in-window observations.
/// Throws InsufficientData for fewer than two sessions or a replicate without data.
BootstrapResult bootstrap_upper(std::span<const SessionSummary> sessions,
                                const ObservationsBySession& observations,
                                const BootstrapConfig& config);

struct TrimRow {
  double trim_fraction = 0.0;
  std::size_t pool_size = 0;
  double point_estimate = 0.0;
  double point_lower = 0.0;
  std::int64_t n_obs = 0;
  double bootstrap_median = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  double ci_width() const noexcept { return ci_hi - ci_lo; }
};

/// One row per fraction, ascending. `kept` is the post-outlier-filter pool.
/// Rows whose pool cannot be resampled (fewer than two sessions) carry NaN
/// bootstrap fields.
std::vector<TrimRow> trim_table(std::span<const SessionSummary> kept,
                                const ObservationsBySession& observations,
                                std::vector<double> fractions, const BootstrapConfig& config);

/// Pooled estimate over the given sessions' observations.
PooledEstimate pooled_for_sessions(std::span<const SessionSummary> sessions,
                                   const ObservationsBySession& observations, PositionWindow window,
                                   std::size_t alphabet_size);

}  // namespace guesslab
