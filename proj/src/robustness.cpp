#include "guesslab/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "guesslab/error.hpp"
#include "guesslab/jsonl.hpp"
#include "guesslab/rng.hpp"

namespace guesslab {

nlohmann::ordered_json to_json(const SessionRecord& r) {
  nlohmann::ordered_json j;
  j["session_id"] = r.session_id;
  j["participant_id"] = r.participant_id;
  j["sentence_id"] = r.sentence_id;
  j["status"] = r.status;
  j["total_guesses"] = r.total_guesses;
  j["correct_guesses"] = r.correct_guesses;
  return j;
}

SessionRecord session_record_from_json(const nlohmann::json& j) {
  SessionRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.participant_id = j.value("participant_id", std::string());
  r.sentence_id = j.value("sentence_id", std::string());
  r.status = j.value("status", std::string());
  r.total_guesses = j.at("total_guesses").get<std::int64_t>();
  r.correct_guesses = j.at("correct_guesses").get<std::int64_t>();
  if (r.correct_guesses < 0 || r.correct_guesses > r.total_guesses) {
    throw Error(ErrorCode::invalid_input, "session " + r.session_id + ": correct_guesses outside [0, total]");
  }
  return r;
}

std::vector<SessionRecord> read_session_records(const std::filesystem::path& path) {
  std::vector<SessionRecord> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t lineno) {
    if (j.contains("record") && j["record"] != "session") return;
    try {
      out.push_back(session_record_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_input, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

ObservationsBySession group_by_session(std::span<const Observation> observations) {
  ObservationsBySession out;
  for (const auto& o : observations) out[o.session_id].push_back(o);
  return out;
}

std::vector<SessionSummary> summarize_sessions(std::span<const SessionRecord> records,
                                               const ObservationsBySession& observations,
                                               std::size_t alphabet_size, ScoreStatistic statistic) {
  std::vector<SessionSummary> out;
  for (const auto& r : records) {
    auto it = observations.find(r.session_id);
    if (it == observations.end() || it->second.empty()) continue;
    out.push_back({r.session_id, r.total_guesses, r.correct_guesses,
                   session_score(it->second, alphabet_size, statistic), false});
  }
  return out;
}

double binomial_upper_tail(std::int64_t n, std::int64_t k, double p) {
  if (n < 0) throw Error(ErrorCode::invalid_input, "binomial n < 0");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double sum = 0.0;
  for (std::int64_t i = k; i <= n; ++i) {
    const double di = static_cast<double>(i);
    const double log_term = lg_n1 - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) +
                            di * log_p + static_cast<double>(n - i) * log_q;
    sum += std::exp(log_term);
  }
  return std::min(sum, 1.0);
}

OutlierSplit binomial_outlier_filter(std::vector<SessionSummary> sessions, double alpha) {
  if (sessions.empty()) throw Error(ErrorCode::insufficient_data, "no sessions to filter");
  std::int64_t total = 0;
  std::int64_t correct = 0;
  for (const auto& s : sessions) {
    if (s.total_guesses < 1) {
      throw Error(ErrorCode::invalid_input, "session " + s.session_id + " has no guesses");
    }
    total += s.total_guesses;
    correct += s.correct_guesses;
  }
  OutlierSplit split;
  split.mean_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  if (correct == 0 || correct == total) {
    throw Error(ErrorCode::degenerate_accuracy,
                "pooled accuracy is " + std::to_string(split.mean_accuracy) + "; tail test is undefined");
  }
  for (auto& s : sessions) {
    if (binomial_upper_tail(s.total_guesses, s.correct_guesses, split.mean_accuracy) < alpha) {
      s.suspicious = true;
      split.discarded.push_back(std::move(s));
    } else {
      split.kept.push_back(std::move(s));
    }
  }
  return split;
}

std::size_t retained_count(std::size_t n, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::invalid_input, "trim fraction must lie in [0, 1)");
  }
  const double keep = std::ceil((1.0 - fraction) * static_cast<double>(n) - 1e-9);
  return static_cast<std::size_t>(std::clamp(keep, 0.0, static_cast<double>(n)));
}

namespace {

bool better(const SessionSummary& a, const SessionSummary& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.total_guesses != b.total_guesses) return a.total_guesses > b.total_guesses;
  return a.session_id < b.session_id;
}

// In-window (position, attempts) pairs per session, indexed like the session span.
std::vector<std::vector<std::pair<int, int>>> window_pairs(std::span<const SessionSummary> sessions,
                                                           const ObservationsBySession& observations,
                                                           PositionWindow window) {
  std::vector<std::vector<std::pair<int, int>>> out(sessions.size());
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    auto it = observations.find(sessions[i].session_id);
    if (it == observations.end()) continue;
    for (const auto& o : it->second) {
      if (window.contains(o.position)) out[i].emplace_back(o.position, o.attempts);
    }
  }
  return out;
}

}  // namespace

std::vector<SessionSummary> trim_bottom(std::vector<SessionSummary> sessions, double fraction) {
  const std::size_t keep = retained_count(sessions.size(), fraction);
  std::sort(sessions.begin(), sessions.end(), better);
  sessions.resize(keep);
  if (sessions.empty()) throw Error(ErrorCode::empty_pool, "trim retained no sessions");
  return sessions;
}

double percentile(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw Error(ErrorCode::insufficient_data, "percentile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

BootstrapResult bootstrap_upper(std::span<const SessionSummary> sessions,
                                const ObservationsBySession& observations,
                                const BootstrapConfig& config) {
  if (sessions.size() < 2) {
    throw Error(ErrorCode::insufficient_data, "bootstrap needs at least two sessions");
  }
  if (config.replicates < 1) throw Error(ErrorCode::invalid_input, "replicates must be >= 1");
  const auto pairs = window_pairs(sessions, observations, config.window);
  const std::size_t n = sessions.size();

  BootstrapResult result;
  result.replicates = config.replicates;
  result.seed = config.seed;
  result.retrimmed = config.retrim;
  result.estimates.assign(static_cast<std::size_t>(config.replicates), 0.0);

  auto run_range = [&](std::size_t begin, std::size_t end) {
    PositionHistogram hist(config.window, config.alphabet_size);
    std::vector<std::size_t> draw(n);
    std::vector<SessionSummary> resample;
    std::vector<std::size_t> order(n);
    for (std::size_t r = begin; r < end; ++r) {
      auto gen = replicate_stream(config.seed, r);
      for (auto& d : draw) d = static_cast<std::size_t>(gen.below(n));
      hist.clear();
      if (config.retrim) {
        // keep the first retained_count draws in trim order; ties broken by draw index
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return better(sessions[draw[a]], sessions[draw[b]]);
        });
        order.resize(retained_count(n, config.trim_fraction));
        for (std::size_t i : order) {
          for (auto [pos, att] : pairs[draw[i]]) hist.add(pos, att);
        }
        order.resize(n);
      } else {
        for (std::size_t d : draw) {
          for (auto [pos, att] : pairs[d]) hist.add(pos, att);
        }
      }
      if (hist.total() == 0) {
        throw Error(ErrorCode::insufficient_data,
                    "bootstrap replicate " + std::to_string(r) + " has no in-window observations");
      }
      result.estimates[r] = hist.pooled_upper();
    }
  };

  const std::size_t reps = result.estimates.size();
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    run_range(0, reps);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (reps + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(reps, b + chunk);
      pool.emplace_back([&, t, b, e] {
        try {
          run_range(b, e);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  std::vector<double> sorted = result.estimates;
  std::sort(sorted.begin(), sorted.end());
  result.median = percentile(sorted, 50.0);
  result.ci_lo = percentile(sorted, 2.5);
  result.ci_hi = percentile(sorted, 97.5);
  return result;
}

PooledEstimate pooled_for_sessions(std::span<const SessionSummary> sessions,
                                   const ObservationsBySession& observations, PositionWindow window,
                                   std::size_t alphabet_size) {
  PositionHistogram hist(window, alphabet_size);
  for (const auto& s : sessions) {
    auto it = observations.find(s.session_id);
    if (it == observations.end()) continue;
    for (const auto& o : it->second) hist.add(o);
  }
  return hist.pooled();
}

std::vector<TrimRow> trim_table(std::span<const SessionSummary> kept,
                                const ObservationsBySession& observations,
                                std::vector<double> fractions, const BootstrapConfig& config) {
  std::sort(fractions.begin(), fractions.end());
  const std::vector<SessionSummary> pool(kept.begin(), kept.end());
  std::vector<TrimRow> rows;
  for (double f : fractions) {
    const auto retained = trim_bottom(pool, f);
    const auto est = pooled_for_sessions(retained, observations, config.window, config.alphabet_size);
    BootstrapResult boot;
    try {
      if (config.retrim) {
        BootstrapConfig c = config;
        c.trim_fraction = f;
        boot = bootstrap_upper(pool, observations, c);
      } else {
        boot = bootstrap_upper(retained, observations, config);
      }
    } catch (const Error& e) {
      // a row too small to resample keeps its point estimate
      if (e.code() != ErrorCode::insufficient_data) throw;
      boot.median = boot.ci_lo = boot.ci_hi = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back({f, retained.size(), est.h_upper, est.h_lower, est.n_obs, boot.median, boot.ci_lo,
                    boot.ci_hi});
  }
  return rows;
}

}  // namespace guesslab
