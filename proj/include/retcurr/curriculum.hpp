#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "retcurr/corpus.hpp"

namespace retcurr {

inline constexpr std::size_t kDefaultWindow = 300;
inline constexpr double kDefaultTau = 0.55;
inline constexpr int kDefaultMaxGap = 6;
inline constexpr double kSamplerTarget = 0.5;
inline constexpr double kDefaultSigma = 0.2;

// Slack on the upgrade comparison so that a window whose real-valued mean
// equals tau is not rejected by summation rounding.
inline constexpr double kThresholdSlack = 1e-9;

// Per-sample estimated reward H, index-aligned with corpus samples.
class DifficultyStore {
 public:
  explicit DifficultyStore(std::size_t n = 0) : estimates_(n, 0.0), update_counts_(n, 0) {}

  std::size_t size() const { return estimates_.size(); }
  double estimate(std::size_t i) const { return estimates_[i]; }
  int update_count(std::size_t i) const { return update_counts_[i]; }
  const std::vector<double>& estimates() const { return estimates_; }

  // Overwrites H_i (clamped to [0,1]). Used when H tracks raw observed means.
  void set(std::size_t i, double value);
  // H_i <- clamp(H_i + 0.5 * delta, 0, 1).
  void accumulate(std::size_t i, double delta);

  std::string to_csv(const Corpus& corpus) const;

 private:
  std::vector<double> estimates_;
  std::vector<int> update_counts_;
};

struct SamplerConfig {
  double target = kSamplerTarget;
  double sigma = kDefaultSigma;
  std::size_t batch_size = 1;

  void validate() const;
};

// exp(-(h - target)^2 / (2 sigma^2))
double sampler_weight(double h, const SamplerConfig& cfg);

// Draws batch_size distinct indices, each draw proportional to the sampler
// weight of the indices not yet drawn.
std::vector<std::size_t> sample_batch(const DifficultyStore& store, const SamplerConfig& cfg,
                                      std::mt19937_64& rng);
// Same, restricted to the given candidate pool.
std::vector<std::size_t> sample_batch(const DifficultyStore& store,
                                      std::span<const std::size_t> pool,
                                      const SamplerConfig& cfg, std::mt19937_64& rng);

// Uniform draw without replacement from the pool.
std::vector<std::size_t> sample_uniform(std::span<const std::size_t> pool,
                                        std::size_t batch_size, std::mt19937_64& rng);

// FIFO of recent rewards with fixed capacity.
class SlidingWindow {
 public:
  explicit SlidingWindow(std::size_t capacity = kDefaultWindow);

  void push(double reward);
  void clear() { values_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return values_.size(); }
  bool full() const { return values_.size() == capacity_; }
  bool empty() const { return values_.empty(); }
  std::optional<double> mean() const;
  const std::deque<double>& values() const { return values_; }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
};

void record_rewards(SlidingWindow& window, double reward);

struct GapState {
  int level = 0;
  int max_level = kDefaultMaxGap;
  double tau = kDefaultTau;

  void validate() const;
};

// Promotes g -> g + 1 and clears the window when the window mean reaches tau
// and g < G. With require_full the window must also be at capacity.
bool maybe_upgrade(GapState& state, SlidingWindow& window, bool require_full = true);

// For each i with propagated[i] > 0: H_i <- clamp(H_i + 0.5 * propagated[i], 0, 1).
void update_difficulty(DifficultyStore& store, std::span<const double> propagated);

// For each i with propagated[i] > 0: H_i <- (H_i + propagated[i]) / 2.
void average_difficulty(DifficultyStore& store, std::span<const double> propagated);

}  // namespace retcurr
