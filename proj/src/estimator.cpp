#include "guesslab/estimator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "guesslab/error.hpp"

namespace guesslab {

namespace {

void check_attempts(int attempts, std::size_t k) {
  if (attempts < 1 || static_cast<std::size_t>(attempts) > k) {
    throw Error(ErrorCode::invalid_input, "attempts " + std::to_string(attempts) +
                                              " outside [1, " + std::to_string(k) + "]");
  }
}

double upper_from_counts(const std::int64_t* counts, std::size_t k, std::int64_t n) {
  double h = 0.0;
  const double total = static_cast<double>(n);
  for (std::size_t i = 0; i < k; ++i) {
    if (counts[i] == 0) continue;
    const double q = static_cast<double>(counts[i]) / total;
    h -= q * std::log2(q);
  }
  return h;
}

double lower_from_counts(const std::int64_t* counts, std::size_t k, std::int64_t n) {
  double h = 0.0;
  const double total = static_cast<double>(n);
  for (std::size_t i = 0; i < k; ++i) {
    if (counts[i] == 0) continue;
    h += (static_cast<double>(counts[i]) / total) * std::log2(static_cast<double>(i + 1));
  }
  return h;
}

bool monotone(const std::int64_t* counts, std::size_t k) {
  for (std::size_t i = 1; i < k; ++i) {
    if (counts[i] > counts[i - 1]) return false;
  }
  return true;
}

}  // namespace

double QDistribution::q(std::size_t rank) const {
  if (rank < 1 || rank > counts.size() || n_obs == 0) return 0.0;
  return static_cast<double>(counts[rank - 1]) / static_cast<double>(n_obs);
}

std::vector<double> QDistribution::fractions() const {
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = q(i + 1);
  return out;
}

bool QDistribution::is_rank_monotone() const noexcept { return monotone(counts.data(), counts.size()); }

QDistribution QDistribution::from_attempts(std::span<const int> attempts, std::size_t alphabet_size) {
  QDistribution d{std::vector<std::int64_t>(alphabet_size, 0), 0};
  for (int a : attempts) {
    check_attempts(a, alphabet_size);
    ++d.counts[a - 1];
    ++d.n_obs;
  }
  return d;
}

PositionWindow PositionWindow::parse(std::string_view text) {
  const auto colon = text.find(':');
  auto bad = [&] { return Error(ErrorCode::invalid_input, "window must look like 70:110, got '" + std::string(text) + "'"); };
  if (colon == std::string_view::npos) throw bad();
  PositionWindow w;
  auto read = [&](std::string_view part, int& v) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size()) throw bad();
  };
  read(text.substr(0, colon), w.first);
  read(text.substr(colon + 1), w.last);
  if (w.first < 0 || w.first > w.last) throw bad();
  return w;
}

std::string_view to_string(ScoreStatistic s) {
  return s == ScoreStatistic::mean_attempts ? "mean_attempts" : "merged_upper_bound";
}

ScoreStatistic score_statistic_from_string(std::string_view text) {
  if (text == "merged_upper_bound") return ScoreStatistic::merged_upper_bound;
  if (text == "mean_attempts") return ScoreStatistic::mean_attempts;
  throw Error(ErrorCode::invalid_input, "unknown score statistic '" + std::string(text) + "'");
}

QDistribution q_distribution(std::span<const Observation> observations, int position,
                             std::size_t alphabet_size) {
  QDistribution d{std::vector<std::int64_t>(alphabet_size, 0), 0};
  for (const auto& o : observations) {
    if (o.position != position) continue;
    check_attempts(o.attempts, alphabet_size);
    ++d.counts[o.attempts - 1];
    ++d.n_obs;
  }
  if (d.n_obs == 0) throw Error(ErrorCode::no_data, "no observations at position " + std::to_string(position));
  return d;
}

double upper_bound(const QDistribution& q) {
  if (q.n_obs == 0) return 0.0;
  return upper_from_counts(q.counts.data(), q.counts.size(), q.n_obs);
}

double lower_bound(const QDistribution& q) {
  if (q.n_obs == 0) return 0.0;
  return lower_from_counts(q.counts.data(), q.counts.size(), q.n_obs);
}

double upper_bound(std::span<const double> q) {
  double h = 0.0;
  for (double p : q) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

double lower_bound(std::span<const double> q) {
  double h = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) h += q[i] * std::log2(static_cast<double>(i + 1));
  }
  return h;
}

EntropyBounds bounds(const QDistribution& q) { return {lower_bound(q), upper_bound(q), q.n_obs}; }

std::map<int, PositionBounds> per_position_bounds(std::span<const Observation> observations,
                                                  PositionWindow window, std::size_t alphabet_size) {
  PositionHistogram hist(window, alphabet_size);
  for (const auto& o : observations) hist.add(o);
  auto pooled = hist.pooled();
  return std::move(pooled.per_position);
}

PooledEstimate pooled_estimate(std::span<const Observation> observations, PositionWindow window,
                               std::size_t alphabet_size) {
  PositionHistogram hist(window, alphabet_size);
  for (const auto& o : observations) hist.add(o);
  return hist.pooled();
}

double session_score(std::span<const Observation> observations, std::size_t alphabet_size,
                     ScoreStatistic statistic) {
  if (observations.empty()) throw Error(ErrorCode::no_data, "session has no observations");
  if (statistic == ScoreStatistic::mean_attempts) {
    double sum = 0.0;
    for (const auto& o : observations) {
      check_attempts(o.attempts, alphabet_size);
      sum += o.attempts;
    }
    return sum / static_cast<double>(observations.size());
  }
  QDistribution d{std::vector<std::int64_t>(alphabet_size, 0), 0};
  for (const auto& o : observations) {
    check_attempts(o.attempts, alphabet_size);
    ++d.counts[o.attempts - 1];
    ++d.n_obs;
  }
  return upper_bound(d);
}

PositionHistogram::PositionHistogram(PositionWindow window, std::size_t alphabet_size)
    : window_(window),
      k_(alphabet_size),
      counts_(window.width() * alphabet_size, 0),
      per_position_(window.width(), 0) {
  if (window.first > window.last) throw Error(ErrorCode::invalid_input, "window first > last");
  if (alphabet_size == 0) throw Error(ErrorCode::invalid_input, "alphabet size must be >= 1");
}

void PositionHistogram::add(int position, int attempts) {
  check_attempts(attempts, k_);
  if (!window_.contains(position)) return;
  const auto row = static_cast<std::size_t>(position - window_.first);
  ++counts_[row * k_ + static_cast<std::size_t>(attempts - 1)];
  ++per_position_[row];
  ++total_;
}

void PositionHistogram::add(const PositionHistogram& other) {
  if (other.k_ != k_ || other.window_.first != window_.first || other.window_.last != window_.last) {
    throw Error(ErrorCode::invalid_input, "histogram shapes differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  for (std::size_t i = 0; i < per_position_.size(); ++i) per_position_[i] += other.per_position_[i];
  total_ += other.total_;
}

void PositionHistogram::clear() {
  std::fill(counts_.begin(), counts_.end(), 0);
  std::fill(per_position_.begin(), per_position_.end(), 0);
  total_ = 0;
}

std::int64_t PositionHistogram::count_at(int position) const {
  if (!window_.contains(position)) return 0;
  return per_position_[static_cast<std::size_t>(position - window_.first)];
}

QDistribution PositionHistogram::distribution_at(int position) const {
  QDistribution d{std::vector<std::int64_t>(k_, 0), 0};
  if (!window_.contains(position)) return d;
  const auto row = static_cast<std::size_t>(position - window_.first);
  std::copy_n(counts_.begin() + static_cast<std::ptrdiff_t>(row * k_), k_, d.counts.begin());
  d.n_obs = per_position_[row];
  return d;
}

PooledEstimate PositionHistogram::pooled() const {
  if (total_ == 0) {
    throw Error(ErrorCode::no_data, "no observations in window " + std::to_string(window_.first) + ":" +
                                        std::to_string(window_.last));
  }
  PooledEstimate est;
  est.n_obs = total_;
  const double total = static_cast<double>(total_);
  for (std::size_t row = 0; row < per_position_.size(); ++row) {
    const std::int64_t n = per_position_[row];
    if (n == 0) continue;
    const std::int64_t* c = counts_.data() + row * k_;
    const int position = window_.first + static_cast<int>(row);
    PositionBounds pb;
    pb.bounds = {lower_from_counts(c, k_, n), upper_from_counts(c, k_, n), n};
    pb.rank_monotone = monotone(c, k_);
    if (!pb.rank_monotone) ++est.non_monotone_positions;
    const double w = static_cast<double>(n) / total;
    est.weights[position] = w;
    est.h_upper += w * pb.bounds.h_upper;
    est.h_lower += w * pb.bounds.h_lower;
    est.per_position.emplace(position, pb);
  }
  est.redundancy = 1.0 - est.h_upper / std::log2(static_cast<double>(k_));
  return est;
}

double PositionHistogram::pooled_upper() const {
  if (total_ == 0) throw Error(ErrorCode::no_data, "no observations in window");
  const double total = static_cast<double>(total_);
  double h = 0.0;
  for (std::size_t row = 0; row < per_position_.size(); ++row) {
    const std::int64_t n = per_position_[row];
    if (n == 0) continue;
    h += (static_cast<double>(n) / total) * upper_from_counts(counts_.data() + row * k_, k_, n);
  }
  return h;
}

}  // namespace guesslab
