#include <gtest/gtest.h>

#include <fstream>

#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/report.hpp"
#include "test_support.hpp"

using namespace guesslab;
using guesslab::test::obs;
using nlohmann::json;

namespace {

AnalysisConfig surrogate_config() {
  AnalysisConfig c;
  c.observations = test::surrogate_dir() / "observations.jsonl";
  c.sessions = test::surrogate_dir() / "sessions.jsonl";
  c.seed = 42;
  c.threads = 4;
  return c;
}

json expected() { return json::parse(read_file(test::surrogate_dir() / "expected.json")); }

}  // namespace

TEST(Report, SurrogateMatchesReferenceImplementation) {
  const auto config = surrogate_config();
  const auto inputs = load_analysis_inputs(config);
  EXPECT_EQ(inputs.session_source, "file");
  const auto r = run_analysis(inputs, config);
  const auto e = expected();

  EXPECT_EQ(r.screened.scored.size(), e["analysis_sessions"].get<std::size_t>());
  EXPECT_EQ(r.screened.split.discarded.size(), e["binomial"]["discarded"].get<std::size_t>());
  EXPECT_NEAR(r.screened.split.mean_accuracy, e["binomial"]["mean_accuracy"].get<double>(), 1e-15);
  std::vector<std::string> ids;
  for (const auto& s : r.screened.split.discarded) ids.push_back(s.session_id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, e["binomial"]["discarded_ids"].get<std::vector<std::string>>());

  const auto& rows = e["trim_table"];
  ASSERT_EQ(r.trim_table.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& t = r.trim_table[i];
    EXPECT_EQ(t.pool_size, rows[i]["pool_size"].get<std::size_t>());
    EXPECT_NEAR(t.point_estimate, rows[i]["point_estimate"].get<double>(), 1e-12);
    EXPECT_NEAR(t.point_lower, rows[i]["h_lower"].get<double>(), 1e-12);
    EXPECT_EQ(t.n_obs, rows[i]["n_obs"].get<std::int64_t>());
    EXPECT_NEAR(t.bootstrap_median, rows[i]["bootstrap_median"].get<double>(), 1e-12);
    EXPECT_NEAR(t.ci_lo, rows[i]["ci_lo"].get<double>(), 1e-12);
    EXPECT_NEAR(t.ci_hi, rows[i]["ci_hi"].get<double>(), 1e-12);
  }
  // the headline row is the 65% one
  for (const auto& row : rows) {
    if (row["trim_fraction"] != 0.65) continue;
    EXPECT_EQ(r.pool_size, row["pool_size"].get<std::size_t>());
    EXPECT_NEAR(r.estimate.h_upper, row["point_estimate"].get<double>(), 1e-12);
    EXPECT_NEAR(r.bootstrap.ci_lo, row["ci_lo"].get<double>(), 1e-12);
  }
}

TEST(Report, OutputIsByteIdenticalAcrossRuns) {
  auto config = surrogate_config();
  config.replicates = 200;
  const auto inputs = load_analysis_inputs(config);
  const auto a = to_json(run_analysis(inputs, config), 5.0).dump(2);
  config.threads = 1;
  const auto b = to_json(run_analysis(load_analysis_inputs(config), config), 5.0).dump(2);
  // threads are not part of the report, and replicate streams do not depend on them
  EXPECT_EQ(a, b);
}

TEST(Report, PerfectGuesserGivesZeroBounds) {
  test::TempDir dir;
  std::vector<Observation> o;
  for (int s = 0; s < 10; ++s) {
    for (int p = 70; p < 100; ++p) o.push_back(obs("s" + std::to_string(s), p, 1));
  }
  write_observations(dir / "obs.jsonl", o);
  AnalysisConfig c;
  c.observations = dir / "obs.jsonl";
  c.replicates = 100;
  const auto inputs = load_analysis_inputs(c);
  EXPECT_EQ(inputs.session_source, "derived");
  const auto r = run_analysis(inputs, c);
  EXPECT_TRUE(r.screened.filter_skipped);
  EXPECT_EQ(r.estimate.h_upper, 0.0);
  EXPECT_EQ(r.estimate.h_lower, 0.0);
  EXPECT_EQ(r.bootstrap.ci_hi, 0.0);
  const auto j = to_json(r, 5.0);
  EXPECT_EQ(j["outliers"]["filter"], "skipped_degenerate_accuracy");
  // the 90% row keeps a single session: point estimate only
  EXPECT_EQ(r.trim_table.back().pool_size, 1u);
  EXPECT_TRUE(j["trim_table"].back()["ci_lo"].is_null());
}

TEST(Report, SessionsFromExportBundle) {
  test::TempDir dir;
  {
    std::ofstream out(dir / "bundle.jsonl");
    out << R"({"record":"header","format":"guesslab-export"})" << "\n";
    out << R"({"record":"observation","session_id":"a","participant_id":"x","sentence_id":"q","position":70,"attempts":2,"ts":0})" << "\n";
    out << R"({"record":"session","session_id":"a","participant_id":"x","sentence_id":"q","status":"completed","total_guesses":9,"correct_guesses":1})" << "\n";
  }
  AnalysisConfig c;
  c.observations = dir / "bundle.jsonl";
  const auto in = load_analysis_inputs(c);
  EXPECT_EQ(in.session_source, "bundle");
  ASSERT_EQ(in.observations.size(), 1u);
  ASSERT_EQ(in.sessions.size(), 1u);
  EXPECT_EQ(in.sessions[0].total_guesses, 9);
}

TEST(Report, DerivedSessionTotals) {
  const std::vector<Observation> o = {obs("a", 70, 3), obs("b", 70, 1), obs("a", 71, 2)};
  const auto r = derive_session_records(o);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].session_id, "a");
  EXPECT_EQ(r[0].total_guesses, 5);
  EXPECT_EQ(r[0].correct_guesses, 2);
  EXPECT_EQ(r[1].total_guesses, 1);
}

TEST(Report, MissingInputIsAnError) {
  AnalysisConfig c;
  c.observations = "/nonexistent/obs.jsonl";
  EXPECT_THROW(load_analysis_inputs(c), Error);
}

TEST(Report, FigureCsvs) {
  auto config = surrogate_config();
  config.replicates = 50;
  const auto inputs = load_analysis_inputs(config);
  const auto r = run_analysis(inputs, config);
  const auto bounds = per_position_bounds_csv(r.estimate);
  EXPECT_EQ(bounds.substr(0, bounds.find('\n')), "position,n_obs,weight,h_upper,h_lower,rank_monotone");
  EXPECT_EQ(std::count(bounds.begin(), bounds.end(), '\n'), 42);
  const auto counts = per_position_counts_csv(inputs.observations, 34);
  EXPECT_EQ(counts.substr(0, 20), "position,n_obs,rank_");
  const auto scores = session_scores_csv(r.screened);
  EXPECT_EQ(static_cast<std::size_t>(std::count(scores.begin(), scores.end(), '\n')), r.screened.scored.size() + 1);

  test::TempDir dir;
  const auto files = write_figures(dir.path(), inputs, r, 5.0);
  EXPECT_EQ(files.size(), 4u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
}

TEST(Report, NumberFormatRoundTrips) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.25), "1.25");
  EXPECT_EQ(std::stod(format_number(2.114822610097897)), 2.114822610097897);
  EXPECT_EQ(format_number(std::nan("")), "");
}
