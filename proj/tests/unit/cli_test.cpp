#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "guesslab/jsonl.hpp"
#include "llm_fixtures.hpp"
#include "test_support.hpp"

using namespace guesslab;
using nlohmann::json;

namespace {

struct RunResult {
  int status;
  std::string out;
  std::string err;
};

// Runs the guesslab binary with shell-quoted arguments, capturing both streams.
RunResult guesslab_cli(const std::vector<std::string>& args, const test::TempDir& dir) {
  std::string cmd = std::string("'") + GUESSLAB_CLI_PATH + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  cmd += " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_file(out), read_file(err)};
}

std::string surrogate(const std::string& name) { return (test::surrogate_dir() / name).string(); }

}  // namespace

TEST(Cli, CorpusPrepareIsReproducible) {
  test::TempDir dir;
  const auto a = dir / "a.jsonl";
  const auto b = dir / "b.jsonl";
  for (const auto& out : {a, b}) {
    const auto r = guesslab_cli({"corpus", "prepare", "--in", surrogate("articles"), "--manifest",
                                 surrogate("manifest.json"), "--out", out.string()},
                                dir);
    ASSERT_EQ(r.status, 0) << r.err;
  }
  EXPECT_EQ(sha256_file(a), sha256_file(b));
  EXPECT_EQ(read_file(a), read_file(surrogate("pool.jsonl")));
}

TEST(Cli, CorpusPrepareOnEmptyDirectoryFails) {
  test::TempDir dir;
  std::filesystem::create_directories(dir / "empty");
  std::ofstream(dir / "empty" / "manifest.json") << "{}";
  const auto r = guesslab_cli({"corpus", "prepare", "--in", (dir / "empty").string()}, dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("EmptyPool"), std::string::npos) << r.err;
}

TEST(Cli, AnalyzeIsDeterministicAndMatchesReference) {
  test::TempDir dir;
  std::vector<std::string> reports;
  for (const char* name : {"r1.json", "r2.json"}) {
    const auto r = guesslab_cli({"analyze", "bounds", "--obs", surrogate("observations.jsonl"), "--sessions",
                                 surrogate("sessions.jsonl"), "--seed", "42", "--replicates", "300", "--out",
                                 (dir / name).string()},
                                dir);
    ASSERT_EQ(r.status, 0) << r.err;
    reports.push_back(read_file(dir / name));
  }
  EXPECT_EQ(reports[0], reports[1]);
  const auto report = json::parse(reports[0]);
  const auto expected = json::parse(read_file(surrogate("expected.json")));
  for (const auto& row : expected["trim_table"]) {
    if (row["trim_fraction"] != 0.65) continue;
    EXPECT_NEAR(report["estimate"]["h_upper"].get<double>(), row["point_estimate"].get<double>(), 1e-12);
    EXPECT_EQ(report["estimate"]["pool_size"], row["pool_size"]);
  }
  EXPECT_EQ(report["outliers"]["discarded"], expected["binomial"]["discarded"]);
}

TEST(Cli, AnalyzeWithoutSeedRecordsTheDrawnOne) {
  test::TempDir dir;
  const auto r = guesslab_cli({"analyze", "bootstrap", "--obs", surrogate("observations.jsonl"), "--sessions",
                               surrogate("sessions.jsonl"), "--replicates", "20"},
                              dir);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto pos = r.err.find("seed: ");
  ASSERT_NE(pos, std::string::npos);
  const auto seed = std::stoull(r.err.substr(pos + 6));
  EXPECT_EQ(json::parse(r.out)["seed"].get<std::uint64_t>(), seed);
}

TEST(Cli, AnalyzePerfectGuesser) {
  test::TempDir dir;
  std::vector<Observation> o;
  for (int s = 0; s < 5; ++s) {
    for (int p = 70; p < 90; ++p) o.push_back(test::obs("s" + std::to_string(s), p, 1));
  }
  write_observations(dir / "obs.jsonl", o);
  const auto r = guesslab_cli({"analyze", "bounds", "--obs", (dir / "obs.jsonl").string(), "--seed", "1",
                               "--replicates", "10"},
                              dir);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["estimate"]["h_upper"], 0.0);
  EXPECT_EQ(j["estimate"]["h_lower"], 0.0);
}

TEST(Cli, TrimTableAndFigures) {
  test::TempDir dir;
  auto r = guesslab_cli({"analyze", "trim-table", "--obs", surrogate("observations.jsonl"), "--sessions",
                         surrogate("sessions.jsonl"), "--seed", "1", "--replicates", "20", "--trims", "0,0.5,0.9"},
                        dir);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  r = guesslab_cli({"export-figures", "--obs", surrogate("observations.jsonl"), "--sessions",
                    surrogate("sessions.jsonl"), "--out-dir", (dir / "figs").string()},
                   dir);
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* f : {"entropy_by_position.csv", "observations_by_position.csv", "session_scores.csv",
                        "trim_table.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "figs" / f)) << f;
  }
}

TEST(Cli, ReplayPrintsStats) {
  test::TempDir dir;
  const auto r = guesslab_cli({"replay", "--log", surrogate("events.jsonl"), "--corpus", surrogate("pool.jsonl"),
                               "--obs-out", (dir / "obs.jsonl").string()},
                              dir);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto stats = json::parse(r.out);
  const auto expected = json::parse(read_file(surrogate("expected.json")))["stats"];
  for (const auto& [k, v] : expected.items()) EXPECT_EQ(stats[k], v) << k;
  EXPECT_EQ(read_file(dir / "obs.jsonl"), read_file(surrogate("observations.jsonl")));
}

TEST(Cli, LlmEvalWithMockProvider) {
  test::TempDir dir;
  const auto fixtures = test::llm_fixtures();
  std::vector<SentenceRecord> pool;
  auto doc = test::mock_document(fixtures, "noisy");
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    SentenceRecord s;
    s.id = "a-s00" + std::to_string(i);
    s.raw_text = s.normalized_text = fixtures[i].text;
    s.length = utf8::length(fixtures[i].text);
    s.source_article = "a";
    pool.push_back(s);
    json tokens = json::array();
    for (const auto& t : fixtures[i].tokens) {
      tokens.push_back({{"text", t.text}, {"start", t.start_char}, {"logprob", 0.0}, {"base", "e"}});
    }
    doc["models"]["certain"][fixtures[i].text] = {{"tokens", tokens}};
  }
  write_pool(dir / "pool.jsonl", pool);
  std::ofstream(dir / "mock.json") << doc.dump();
  const auto r = guesslab_cli({"llm-eval", "--corpus", (dir / "pool.jsonl").string(), "--provider",
                               "file://" + (dir / "mock.json").string(), "--model", "noisy", "--model", "certain",
                               "--params", "1B", "--params", "2B"},
                              dir);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  ASSERT_EQ(j["results"].size(), 2u);
  EXPECT_EQ(j["results"][0]["model"], "certain");
  EXPECT_EQ(j["results"][0]["params"], "2B");
  EXPECT_EQ(j["results"][0]["bpc"], 0.0);
  EXPECT_EQ(j["results"][1]["model"], "noisy");
  EXPECT_NEAR(j["results"][1]["bpc"].get<double>(), test::kFixtureCorpusBpc, 1e-9);
  EXPECT_EQ(j["corpus_sha256"], sha256_file(dir / "pool.jsonl"));
}

TEST(Cli, LlmEvalUnreachableProviderFails) {
  test::TempDir dir;
  write_pool(dir / "pool.jsonl", std::vector<SentenceRecord>{test::make_sentence("a-s000", 80)});
  const auto r = guesslab_cli({"llm-eval", "--corpus", (dir / "pool.jsonl").string(), "--provider",
                               "http://127.0.0.1:9/v1/logprobs", "--model", "m", "--max-retries", "1",
                               "--timeout-s", "1"},
                              dir);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("ProviderUnavailable"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  test::TempDir dir;
  EXPECT_NE(guesslab_cli({}, dir).status, 0);
  EXPECT_NE(guesslab_cli({"analyze", "bounds"}, dir).status, 0);
  EXPECT_EQ(guesslab_cli({"--help"}, dir).status, 0);
}
