#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guesslab/alphabet.hpp"
#include "guesslab/estimator.hpp"
#include "guesslab/observation.hpp"
#include "guesslab/robustness.hpp"

namespace guesslab {

std::vector<double> default_trim_fractions();

struct AnalysisConfig {
  std::filesystem::path observations;
  std::filesystem::path sessions;  // optional; see load_analysis_inputs
  double alpha = 0.01;
  double trim_fraction = 0.65;
  std::vector<double> trim_fractions = default_trim_fractions();
  PositionWindow window{};
  std::shared_ptr<const Alphabet> alphabet = std::make_shared<const Alphabet>(Alphabet::ukrainian());
  ScoreStatistic score = ScoreStatistic::merged_upper_bound;
  int replicates = 2000;
  std::uint64_t seed = 0;
  bool retrim = false;
  unsigned threads = 1;
};

nlohmann::ordered_json to_json(const AnalysisConfig& c);

struct InputFile {
  std::string path;
  std::string sha256;
};

struct AnalysisInputs {
  std::vector<Observation> observations;
  std::vector<SessionRecord> sessions;
  ObservationsBySession by_session;
  std::string session_source;  // "file", "bundle" or "derived"
  std::vector<InputFile> files;
};

/// Loads observations and session totals. Session totals come from
/// `config.sessions` when given, else from session records inside the
/// observation file (an export bundle), else they are derived from the
/// observations alone (total = sum of attempts, correct = count).
AnalysisInputs load_analysis_inputs(const AnalysisConfig& config);

/// Totals recoverable from observations alone. Wrong guesses on a position the
/// session never finished are invisible here.
std::vector<SessionRecord> derive_session_records(std::span<const Observation> observations);

struct ScreenedSessions {
  std::vector<SessionSummary> scored;    // every session with observations
  OutlierSplit split;
  bool filter_skipped = false;           // pooled accuracy 0 or 1: nothing can stand out
  std::vector<SessionSummary> retained;  // kept, bottom-trimmed, best first
};

ScreenedSessions screen_sessions(const AnalysisInputs& inputs, const AnalysisConfig& config);

struct ReportBundle {
  nlohmann::ordered_json config;
  std::vector<InputFile> inputs;
  std::uint64_t seed = 0;
  std::size_t sessions_total = 0;
  std::string session_source;
  ScreenedSessions screened;
  PooledEstimate untrimmed;
  PooledEstimate estimate;  // at config.trim_fraction
  std::size_t pool_size = 0;
  BootstrapResult bootstrap;
  std::vector<TrimRow> trim_table;
  std::vector<std::string> csv_files;
};

nlohmann::ordered_json to_json(const ReportBundle& r, double max_entropy);

struct AnalysisParts {
  bool bootstrap = true;
  bool trim_table = true;
};

ReportBundle run_analysis(const AnalysisInputs& inputs, const AnalysisConfig& config, AnalysisParts parts = {});

/// Figure data. Each returns the CSV text; write_figures writes them all.
std::string per_position_bounds_csv(const PooledEstimate& estimate);
std::string per_position_counts_csv(std::span<const Observation> observations, std::size_t alphabet_size);
std::string session_scores_csv(const ScreenedSessions& screened);
std::string trim_table_csv(std::span<const TrimRow> rows, double max_entropy, bool with_bootstrap = true);

/// Writes the figure CSVs into `dir`; returns the written paths.
std::vector<std::string> write_figures(const std::filesystem::path& dir, const AnalysisInputs& inputs,
                                       const ReportBundle& report, double max_entropy);

/// Formats a double for CSV output with round-trip precision.
std::string format_number(double v);

}  // namespace guesslab
