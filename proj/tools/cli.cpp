#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "guesslab/corpus.hpp"
#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/llm_eval.hpp"
#include "guesslab/report.hpp"
#include "guesslab/service.hpp"

namespace guesslab::cli {

namespace {

using nlohmann::ordered_json;

std::shared_ptr<const Alphabet> load_alphabet(const std::string& spec) {
  if (spec.empty() || spec == "uk" || spec == "ukrainian") return std::make_shared<const Alphabet>(Alphabet::ukrainian());
  if (spec == "en" || spec == "english") return std::make_shared<const Alphabet>(Alphabet::english());
  return std::make_shared<const Alphabet>(Alphabet::load(spec));
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::invalid_input, "bad trim fraction '" + item + "'");
    // accept percentages as well as fractions
    out.push_back(v > 1.0 ? v / 100.0 : v);
  }
  if (out.empty()) throw Error(ErrorCode::invalid_input, "no trim fractions given");
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::storage_unavailable, "cannot write " + path);
}

struct AnalyzeArgs {
  std::string observations;
  std::string sessions;
  double trim = 0.65;
  std::string trims;
  std::string window = "70:110";
  std::string alphabet;
  double alpha = 0.01;
  std::string score = "merged_upper_bound";
  int replicates = 2000;
  std::optional<std::uint64_t> seed;
  bool retrim = false;
  unsigned threads = 1;
  std::string out;
  std::string csv_dir;
};

void add_analysis_options(CLI::App* cmd, AnalyzeArgs& a, bool with_bootstrap) {
  cmd->add_option("--obs", a.observations, "Observation JSONL (or a service export bundle)")->required();
  cmd->add_option("--sessions", a.sessions, "Session JSONL with guess totals");
  cmd->add_option("--trim", a.trim, "Bottom-trim fraction applied after the outlier filter")
      ->capture_default_str();
  cmd->add_option("--window", a.window, "Pooled position window FIRST:LAST (0-based, inclusive)")
      ->capture_default_str();
  cmd->add_option("--alphabet", a.alphabet, "uk, en, or an alphabet JSON file (default uk)");
  cmd->add_option("--alpha", a.alpha, "Binomial outlier significance level")->capture_default_str();
  cmd->add_option("--score", a.score, "Session ranking statistic: merged_upper_bound or mean_attempts")
      ->capture_default_str();
  if (with_bootstrap) {
    cmd->add_option("--replicates", a.replicates, "Bootstrap replicates")->capture_default_str();
    cmd->add_option("--seed", a.seed, "Bootstrap seed (random and recorded when omitted)");
    cmd->add_flag("--retrim", a.retrim, "Re-apply the trim inside every bootstrap replicate");
    cmd->add_option("--threads", a.threads, "Bootstrap worker threads")->capture_default_str();
  }
}

AnalysisConfig make_config(const AnalyzeArgs& a) {
  AnalysisConfig c;
  c.observations = a.observations;
  c.sessions = a.sessions;
  c.trim_fraction = a.trim > 1.0 ? a.trim / 100.0 : a.trim;
  if (!a.trims.empty()) c.trim_fractions = parse_fractions(a.trims);
  c.window = PositionWindow::parse(a.window);
  c.alphabet = load_alphabet(a.alphabet);
  c.alpha = a.alpha;
  c.score = score_statistic_from_string(a.score);
  c.replicates = a.replicates;
  if (a.seed) {
    c.seed = *a.seed;
  } else {
    std::random_device rd;
    c.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << c.seed << "\n";
  }
  c.retrim = a.retrim;
  c.threads = std::max(1u, a.threads);
  return c;
}

void print_headline(const ReportBundle& r, double max_entropy) {
  std::cerr << "sessions with observations: " << r.screened.scored.size() << ", outliers discarded: "
            << r.screened.split.discarded.size() << " (mean accuracy " << format_number(r.screened.split.mean_accuracy)
            << ")\n";
  std::cerr << "pool " << r.pool_size << ": H_upper " << format_number(r.estimate.h_upper) << " H_lower "
            << format_number(r.estimate.h_lower) << " bpc over " << r.estimate.n_obs << " observations, redundancy "
            << format_number(1.0 - r.estimate.h_upper / max_entropy) << "\n";
  if (r.bootstrap.replicates > 0) {
    std::cerr << "bootstrap median " << format_number(r.bootstrap.median) << ", 95% CI ["
              << format_number(r.bootstrap.ci_lo) << ", " << format_number(r.bootstrap.ci_hi) << "]\n";
  }
}

int cmd_corpus_prepare(const std::string& in_dir, std::string manifest, const std::string& out, int min_len,
                       int max_len, const std::string& alphabet) {
  if (manifest.empty()) manifest = (std::filesystem::path(in_dir) / "manifest.json").string();
  const auto a = load_alphabet(alphabet);
  std::vector<RawArticle> articles;
  if (std::filesystem::is_directory(in_dir)) articles = load_articles(in_dir, manifest);
  else throw Error(ErrorCode::invalid_input, "input directory " + in_dir + " does not exist");
  if (min_len < 0 || max_len < 0) throw Error(ErrorCode::invalid_input, "length bounds must be >= 0");
  const auto pool = build_pool(articles, *a, LengthRange{static_cast<std::size_t>(min_len), static_cast<std::size_t>(max_len)});
  if (out.empty() || out == "-") write_pool(std::cout, pool);
  else write_pool(std::filesystem::path(out), pool);
  std::cerr << pool.size() << " sentences from " << articles.size() << " articles\n";
  return 0;
}

void on_signal(int) { request_shutdown(); }

int cmd_serve(const std::string& config_path, ServiceConfig overrides, const std::set<std::string>& given) {
  ServiceConfig c = load_service_config(config_path);
  if (given.contains("corpus")) c.corpus_path = overrides.corpus_path;
  if (given.contains("data-dir")) c.data_dir = overrides.data_dir;
  if (given.contains("host")) c.listen_host = overrides.listen_host;
  if (given.contains("port")) c.port = overrides.port;
  if (given.contains("prefix-len")) c.prefix_len = overrides.prefix_len;
  if (given.contains("min-interval-ms")) c.min_attempt_interval = overrides.min_attempt_interval;
  if (given.contains("ttl-s")) c.session_ttl = overrides.session_ttl;
  if (given.contains("salt")) c.export_salt = overrides.export_salt;
  if (given.contains("alphabet")) c.alphabet_path = overrides.alphabet_path;
  if (given.contains("seed")) c.seed = overrides.seed;
  if (c.corpus_path.empty()) throw Error(ErrorCode::invalid_input, "a corpus pool file is required (--corpus)");

  auto pool = read_pool(c.corpus_path);
  auto log = std::make_unique<FileEventLog>(c.data_dir / "events.jsonl");
  ExperimentService service(std::move(pool), c, std::move(log));
  service.recover();
  const auto ttl_ms = std::chrono::duration_cast<std::chrono::milliseconds>(c.session_ttl);
  const auto sweep = std::clamp(ttl_ms / 10, std::chrono::milliseconds(1000), std::chrono::milliseconds(60000));
  HttpService http(service, c.listen_host, c.port, sweep);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << http.base_url() << " (" << service.stats().sessions_started
            << " sessions recovered)\n";
  http.wait();
  http.stop();
  service.write_snapshot();
  return 0;
}

int cmd_replay(const std::string& log_path, const std::string& corpus, const std::string& alphabet,
               const std::string& obs_out, const std::string& sessions_out) {
  ServiceConfig c;
  c.snapshot_every = 0;
  c.seed = 0;
  if (!alphabet.empty() && alphabet != "uk") c.alphabet_path = alphabet;
  // copy the log into memory so the replay never appends to the source file
  auto mem = std::make_unique<MemoryEventLog>();
  for_each_jsonl(log_path, [&](const nlohmann::json& j, std::size_t) { mem->append(ordered_json(j)); });
  ExperimentService service(read_pool(corpus), c, std::move(mem));
  service.recover();
  std::cout << to_json(service.stats()).dump(2) << "\n";
  if (!obs_out.empty()) write_observations(obs_out, service.observations());
  if (!sessions_out.empty()) {
    std::string text;
    for (const auto& r : service.session_records()) text += dump_line(to_json(r)) + "\n";
    write_file(sessions_out, text);
  }
  return 0;
}

int cmd_llm_eval(const std::string& corpus, const std::string& provider, const std::vector<std::string>& models,
                 std::vector<std::string> params, std::size_t mask_from, unsigned concurrency, int timeout_s,
                 int max_retries, const std::string& token_env, const std::string& manifest,
                 const std::string& cutoff, std::size_t max_context, const std::string& out) {
  auto sentences = read_pool(corpus);
  if (!cutoff.empty()) {
    if (manifest.empty()) throw Error(ErrorCode::invalid_input, "--cutoff needs --manifest");
    std::map<std::string, Date> published;
    for (const auto& [file, entry] : read_manifest(manifest)) published[entry.id] = entry.published_date;
    const auto cut = parse_date(cutoff);
    std::vector<SentenceRecord> usable;
    for (auto& s : sentences) {
      if (contamination_check(s, published, cut)) usable.push_back(std::move(s));
    }
    std::cerr << usable.size() << " of " << sentences.size() << " sentences published after " << cutoff << "\n";
    sentences = std::move(usable);
  }
  if (params.size() > models.size()) throw Error(ErrorCode::invalid_input, "more --params labels than --model");
  params.resize(models.size());

  std::vector<LlmEvalResult> results;
  for (std::size_t i = 0; i < models.size(); ++i) {
    ProviderConfig pc;
    pc.endpoint = provider;
    pc.model_id = models[i];
    pc.timeout = std::chrono::seconds(timeout_s);
    pc.max_retries = max_retries;
    pc.max_context_chars = max_context;
    if (!token_env.empty()) {
      if (const char* t = std::getenv(token_env.c_str())) pc.auth_token = t;
    }
    EvalOptions opt;
    opt.mask_from = mask_from;
    opt.concurrency = std::max(1u, concurrency);
    opt.params_label = params[i];
    results.push_back(evaluate_model(sentences, pc, opt));
    std::cerr << models[i] << ": bpc " << format_number(results.back().bpc) << ", fertility "
              << format_number(results.back().fertility) << "\n";
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const LlmEvalResult& a, const LlmEvalResult& b) { return a.bpc < b.bpc; });
  ordered_json j;
  j["corpus"] = corpus;
  j["corpus_sha256"] = sha256_file(corpus);
  j["mask_from"] = mask_from;
  j["sentences"] = sentences.size();
  j["cutoff"] = cutoff.empty() ? nlohmann::json(nullptr) : nlohmann::json(cutoff);
  auto arr = ordered_json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  j["results"] = arr;
  write_file(out, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Character-guessing entropy experiments: corpus, service, analysis and LLM comparison"};
  app.require_subcommand(1);

  // corpus prepare
  auto* corpus = app.add_subcommand("corpus", "Sentence pool preparation");
  corpus->require_subcommand(1);
  auto* prepare = corpus->add_subcommand("prepare", "Build the sentence pool from raw articles");
  std::string in_dir, manifest, pool_out, corpus_alphabet;
  int min_len = 120, max_len = 200;
  prepare->add_option("--in", in_dir, "Directory of article text files")->required();
  prepare->add_option("--manifest", manifest, "Article manifest (default <in>/manifest.json)");
  prepare->add_option("--out", pool_out, "Pool JSONL output (default stdout)");
  prepare->add_option("--min-len", min_len, "Minimum normalized length")->capture_default_str();
  prepare->add_option("--max-len", max_len, "Maximum normalized length")->capture_default_str();
  prepare->add_option("--alphabet", corpus_alphabet, "uk, en, or an alphabet JSON file (default uk)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the experiment HTTP service");
  std::string config_path, serve_alphabet;
  ServiceConfig so;
  std::int64_t min_interval_ms = 300, ttl_s = 86400;
  std::uint64_t serve_seed = 0;
  std::string corpus_path, data_dir;
  serve->add_option("--config", config_path, "JSON config file (GUESSLAB_* variables override it)");
  serve->add_option("--corpus", corpus_path, "Sentence pool JSONL");
  serve->add_option("--data-dir", data_dir, "Directory for the event log and snapshots");
  serve->add_option("--host", so.listen_host, "Listen address");
  serve->add_option("--port", so.port, "Listen port (0 picks a free one)");
  serve->add_option("--prefix-len", so.prefix_len, "Revealed prefix length");
  serve->add_option("--min-interval-ms", min_interval_ms, "Minimum time between guesses in a session");
  serve->add_option("--ttl-s", ttl_s, "Idle time after which active sessions are abandoned");
  serve->add_option("--salt", so.export_salt, "Salt for participant pseudonyms in exports");
  serve->add_option("--alphabet", serve_alphabet, "Alphabet JSON file (default Ukrainian)");
  serve->add_option("--seed", serve_seed, "Seed for ids and sentence assignment");

  // replay
  auto* replay = app.add_subcommand("replay", "Rebuild service state from an event log and print stats");
  std::string replay_log, replay_corpus, replay_alphabet, replay_obs, replay_sessions;
  replay->add_option("--log", replay_log, "Event log JSONL")->required();
  replay->add_option("--corpus", replay_corpus, "Sentence pool JSONL")->required();
  replay->add_option("--alphabet", replay_alphabet, "Alphabet JSON file (default Ukrainian)");
  replay->add_option("--obs-out", replay_obs, "Write derived observations here");
  replay->add_option("--sessions-out", replay_sessions, "Write session totals here");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Entropy bounds from observations");
  analyze->require_subcommand(1);
  AnalyzeArgs bounds_args, table_args, boot_args, fig_args;
  auto* bounds_cmd = analyze->add_subcommand("bounds", "Outlier filter, trim, pooled bounds, bootstrap and trim table");
  add_analysis_options(bounds_cmd, bounds_args, true);
  bounds_cmd->add_option("--trims", bounds_args.trims, "Comma-separated trim fractions for the trim table");
  bounds_cmd->add_option("--out", bounds_args.out, "Report JSON (default stdout)");
  bounds_cmd->add_option("--csv-dir", bounds_args.csv_dir, "Also write figure CSVs here");

  auto* table_cmd = analyze->add_subcommand("trim-table", "Trim sensitivity table");
  add_analysis_options(table_cmd, table_args, true);
  table_cmd->add_option("--trims", table_args.trims, "Comma-separated trim fractions");
  table_cmd->add_option("--out", table_args.out, "CSV output (default stdout)");

  auto* boot_cmd = analyze->add_subcommand("bootstrap", "Session bootstrap of the pooled upper bound");
  add_analysis_options(boot_cmd, boot_args, true);
  boot_cmd->add_option("--out", boot_args.out, "JSON output (default stdout)");

  // llm-eval
  auto* llm = app.add_subcommand("llm-eval", "Bits per character of language models on the corpus");
  std::string llm_corpus, provider, token_env, llm_manifest, cutoff, llm_out;
  std::vector<std::string> models, params;
  std::size_t mask_from = 70, max_context = 0;
  unsigned concurrency = 4;
  int timeout_s = 30, max_retries = 3;
  llm->add_option("--corpus", llm_corpus, "Sentence pool JSONL")->required();
  llm->add_option("--provider", provider, "Provider URL, or file:///path/mock.json")->required();
  llm->add_option("--model", models, "Model id (repeatable)")->required();
  llm->add_option("--params", params, "Parameter-count label per model (repeatable, in --model order)");
  llm->add_option("--mask-from", mask_from, "First counted 0-based character offset")->capture_default_str();
  llm->add_option("--concurrency", concurrency, "Requests in flight")->capture_default_str();
  llm->add_option("--timeout-s", timeout_s, "Per-request timeout")->capture_default_str();
  llm->add_option("--max-retries", max_retries, "Retries on transport errors, 429 and 5xx")->capture_default_str();
  llm->add_option("--auth-token-env", token_env, "Environment variable holding a bearer token");
  llm->add_option("--max-context", max_context, "Reject sentences longer than this many characters");
  llm->add_option("--manifest", llm_manifest, "Article manifest for the contamination cutoff");
  llm->add_option("--cutoff", cutoff, "Keep only sentences from articles published after YYYY-MM-DD");
  llm->add_option("--out", llm_out, "results.json (default stdout)");

  // export-figures
  auto* figs = app.add_subcommand("export-figures", "Figure data CSVs");
  add_analysis_options(figs, fig_args, false);
  figs->add_option("--out-dir", fig_args.csv_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (prepare->parsed()) {
      return cmd_corpus_prepare(in_dir, manifest, pool_out, min_len, max_len, corpus_alphabet);
    }
    if (serve->parsed()) {
      std::set<std::string> given;
      for (const char* name : {"corpus", "data-dir", "host", "port", "prefix-len", "min-interval-ms", "ttl-s", "salt",
                               "alphabet", "seed"}) {
        if (serve->count(std::string("--") + name) > 0) given.insert(name);
      }
      so.corpus_path = corpus_path;
      so.data_dir = data_dir;
      so.alphabet_path = serve_alphabet;
      so.min_attempt_interval = std::chrono::milliseconds(min_interval_ms);
      so.session_ttl = std::chrono::seconds(ttl_s);
      so.seed = serve_seed;
      return cmd_serve(config_path, so, given);
    }
    if (replay->parsed()) {
      return cmd_replay(replay_log, replay_corpus, replay_alphabet, replay_obs, replay_sessions);
    }
    if (bounds_cmd->parsed()) {
      const auto cfg = make_config(bounds_args);
      const auto inputs = load_analysis_inputs(cfg);
      auto report = run_analysis(inputs, cfg);
      const double hmax = cfg.alphabet->max_entropy();
      if (!bounds_args.csv_dir.empty()) report.csv_files = write_figures(bounds_args.csv_dir, inputs, report, hmax);
      print_headline(report, hmax);
      write_file(bounds_args.out, to_json(report, hmax).dump(2) + "\n");
      return 0;
    }
    if (table_cmd->parsed()) {
      const auto cfg = make_config(table_args);
      const auto inputs = load_analysis_inputs(cfg);
      AnalysisParts parts;
      parts.bootstrap = cfg.replicates > 0;
      parts.trim_table = true;
      const auto full = run_analysis(inputs, cfg, parts);
      write_file(table_args.out, trim_table_csv(full.trim_table, cfg.alphabet->max_entropy(), parts.bootstrap));
      return 0;
    }
    if (boot_cmd->parsed()) {
      const auto cfg = make_config(boot_args);
      const auto inputs = load_analysis_inputs(cfg);
      const auto report = run_analysis(inputs, cfg, {true, false});
      const double hmax = cfg.alphabet->max_entropy();
      print_headline(report, hmax);
      auto j = to_json(report, hmax);
      j.erase("trim_table");
      j.erase("csv_files");
      write_file(boot_args.out, j.dump(2) + "\n");
      return 0;
    }
    if (llm->parsed()) {
      return cmd_llm_eval(llm_corpus, provider, models, params, mask_from, concurrency, timeout_s, max_retries,
                          token_env, llm_manifest, cutoff, max_context, llm_out);
    }
    if (figs->parsed()) {
      fig_args.seed = 0;
      fig_args.replicates = 0;
      const auto cfg = make_config(fig_args);
      const auto inputs = load_analysis_inputs(cfg);
      const auto report = run_analysis(inputs, cfg, {false, true});
      for (const auto& p : write_figures(fig_args.csv_dir, inputs, report, cfg.alphabet->max_entropy())) {
        std::cout << p << "\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace guesslab::cli
