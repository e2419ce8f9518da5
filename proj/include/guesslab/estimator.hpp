#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "guesslab/observation.hpp"

namespace guesslab {

/// Guess-count distribution: counts[i-1] characters were guessed on the i-th try.
/// Counts stay exact; fractions are formed only on demand.
struct QDistribution {
  std::vector<std::int64_t> counts;
  std::int64_t n_obs = 0;

  std::size_t alphabet_size() const noexcept { return counts.size(); }
  /// q_i for 1-based rank i.
  double q(std::size_t rank) const;
  std::vector<double> fractions() const;
  /// q_1 >= q_2 >= ... (the ordering an ideal guesser produces).
  bool is_rank_monotone() const noexcept;

  static QDistribution from_attempts(std::span<const int> attempts, std::size_t alphabet_size);
};

struct EntropyBounds {
  double h_lower = 0.0;
  double h_upper = 0.0;
  std::int64_t n_obs = 0;
};

/// Inclusive range of 0-based positions that enter the pooled estimate.
struct PositionWindow {
  int first = 70;
  int last = 110;

  bool contains(int position) const noexcept { return position >= first && position <= last; }
  std::size_t width() const noexcept { return static_cast<std::size_t>(last - first + 1); }

  /// "70:110"
  static PositionWindow parse(std::string_view text);
};

struct PositionBounds {
  EntropyBounds bounds;
  bool rank_monotone = true;
};

struct PooledEstimate {
  double h_upper = 0.0;
  double h_lower = 0.0;
  std::int64_t n_obs = 0;
  std::map<int, PositionBounds> per_position;  // N_n is per_position[n].bounds.n_obs
  std::map<int, double> weights;
  double redundancy = 0.0;
  std::size_t non_monotone_positions = 0;
};

enum class ScoreStatistic { merged_upper_bound, mean_attempts };

std::string_view to_string(ScoreStatistic s);
ScoreStatistic score_statistic_from_string(std::string_view text);

/// Throws NoData when no observation sits at `position`.
QDistribution q_distribution(std::span<const Observation> observations, int position,
                             std::size_t alphabet_size);

/// -sum q_i log2 q_i, with 0 log 0 = 0.
double upper_bound(const QDistribution& q);
double upper_bound(std::span<const double> q);

/// sum q_i log2 i
double lower_bound(const QDistribution& q);
double lower_bound(std::span<const double> q);

EntropyBounds bounds(const QDistribution& q);

std::map<int, PositionBounds> per_position_bounds(std::span<const Observation> observations,
                                                  PositionWindow window, std::size_t alphabet_size);

/// Observation-weighted mean of per-position bounds over the window.
PooledEstimate pooled_estimate(std::span<const Observation> observations, PositionWindow window,
                               std::size_t alphabet_size);

/// Ranking key for trimming: lower is better. By default the upper bound of
/// all of the session's observations merged into one distribution.
double session_score(std::span<const Observation> observations, std::size_t alphabet_size,
                     ScoreStatistic statistic = ScoreStatistic::merged_upper_bound);

/// Dense (position x rank) count table over a window. Cheap to merge, which is
/// what bootstrap replicates need.
class PositionHistogram {
 public:
  PositionHistogram(PositionWindow window, std::size_t alphabet_size);

  /// Ignores out-of-window observations; throws InvalidInput on attempts outside [1, K].
  void add(int position, int attempts);
  void add(const Observation& o) { add(o.position, o.attempts); }
  void add(const PositionHistogram& other);
  void clear();

  std::int64_t total() const noexcept { return total_; }
  std::int64_t count_at(int position) const;
  QDistribution distribution_at(int position) const;

  PooledEstimate pooled() const;
  /// Same number as pooled().h_upper without building the per-position maps.
  double pooled_upper() const;

 private:
  PositionWindow window_;
  std::size_t k_;
  std::vector<std::int64_t> counts_;  // width * k_
  std::vector<std::int64_t> per_position_;
  std::int64_t total_ = 0;
};

}  // namespace guesslab
