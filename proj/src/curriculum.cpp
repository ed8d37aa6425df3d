#include "retcurr/curriculum.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "retcurr/error.hpp"

namespace retcurr {

void DifficultyStore::set(std::size_t i, double value) {
  require(i < size(), "difficulty index out of range");
  estimates_[i] = std::clamp(value, 0.0, 1.0);
  ++update_counts_[i];
}

void DifficultyStore::accumulate(std::size_t i, double delta) {
  require(i < size(), "difficulty index out of range");
  estimates_[i] = std::clamp(estimates_[i] + 0.5 * delta, 0.0, 1.0);
  ++update_counts_[i];
}

std::string DifficultyStore::to_csv(const Corpus& corpus) const {
  require(corpus.num_samples() == size(), "difficulty store size differs from corpus");
  std::string out = "sample_id,H,update_count\n";
  for (std::size_t i = 0; i < size(); ++i) {
    out += fmt::format("{},{:.6f},{}\n", corpus.samples()[i].id, estimates_[i],
                       update_counts_[i]);
  }
  return out;
}

void SamplerConfig::validate() const {
  require(sigma > 0.0, "sampler sigma must be > 0");
  require(batch_size > 0, "batch_size must be > 0");
}

double sampler_weight(double h, const SamplerConfig& cfg) {
  const double d = h - cfg.target;
  return std::exp(-(d * d) / (2.0 * cfg.sigma * cfg.sigma));
}

std::vector<std::size_t> sample_batch(const DifficultyStore& store,
                                      std::span<const std::size_t> pool,
                                      const SamplerConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  require(!pool.empty(), "sample_batch: empty candidate pool");
  require(cfg.batch_size <= pool.size(),
          fmt::format("sample_batch: batch_size {} exceeds {} candidates", cfg.batch_size,
                      pool.size()));
  std::vector<double> weights(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    require(pool[i] < store.size(), "sample_batch: pool index out of range");
    weights[i] = sampler_weight(store.estimate(pool[i]), cfg);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> out;
  out.reserve(cfg.batch_size);
  std::vector<bool> taken(pool.size(), false);
  for (std::size_t draw = 0; draw < cfg.batch_size; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!taken[i]) total += weights[i];
    }
    std::size_t chosen = pool.size();
    if (total > 0.0) {
      const double u = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (taken[i] || weights[i] <= 0.0) continue;
        acc += weights[i];
        chosen = i;
        if (u < acc) break;
      }
    } else {
      // Every remaining weight underflowed; fall back to uniform.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!taken[i]) rest.push_back(i);
      }
      chosen = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
    }
    taken[chosen] = true;
    out.push_back(pool[chosen]);
  }
  return out;
}

std::vector<std::size_t> sample_batch(const DifficultyStore& store, const SamplerConfig& cfg,
                                      std::mt19937_64& rng) {
  std::vector<std::size_t> all(store.size());
  std::iota(all.begin(), all.end(), 0);
  return sample_batch(store, all, cfg, rng);
}

std::vector<std::size_t> sample_uniform(std::span<const std::size_t> pool,
                                        std::size_t batch_size, std::mt19937_64& rng) {
  require(batch_size > 0, "batch_size must be > 0");
  require(batch_size <= pool.size(),
          fmt::format("batch_size {} exceeds {} candidates", batch_size, pool.size()));
  std::vector<std::size_t> items(pool.begin(), pool.end());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(batch_size);
  return items;
}

SlidingWindow::SlidingWindow(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "window capacity must be > 0");
}

void SlidingWindow::push(double reward) {
  require(reward >= 0.0 && reward <= 1.0,
          fmt::format("window value {} outside [0,1]", reward));
  values_.push_back(reward);
  while (values_.size() > capacity_) values_.pop_front();
}

std::optional<double> SlidingWindow::mean() const {
  if (values_.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

void record_rewards(SlidingWindow& window, double reward) { window.push(reward); }

void GapState::validate() const {
  require(max_level >= 2, "max gap G must be >= 2");
  require(level >= 0 && level <= max_level, "gap level outside [0, G]");
  require(tau > 0.0 && tau < 1.0, "tau must be in (0,1)");
}

bool maybe_upgrade(GapState& state, SlidingWindow& window, bool require_full) {
  if (state.level >= state.max_level) return false;
  if (require_full && !window.full()) return false;
  const auto mean = window.mean();
  if (!mean || *mean < state.tau - kThresholdSlack) return false;
  ++state.level;
  window.clear();
  return true;
}

namespace {

template <typename Apply>
void apply_positive(DifficultyStore& store, std::span<const double> propagated,
                    std::string_view what, Apply apply) {
  require(propagated.size() == store.size(),
          fmt::format("{}: {} estimates for {} samples", what, propagated.size(), store.size()));
  for (double v : propagated) {
    require(v >= 0.0 && v <= 1.0, fmt::format("{}: propagated value outside [0,1]", what));
  }
  for (std::size_t i = 0; i < propagated.size(); ++i) {
    if (propagated[i] > 0.0) apply(i, propagated[i]);
  }
}

}  // namespace

void update_difficulty(DifficultyStore& store, std::span<const double> propagated) {
  apply_positive(store, propagated, "update_difficulty",
                 [&](std::size_t i, double v) { store.accumulate(i, v); });
}

void average_difficulty(DifficultyStore& store, std::span<const double> propagated) {
  apply_positive(store, propagated, "average_difficulty", [&](std::size_t i, double v) {
    store.set(i, 0.5 * (store.estimate(i) + v));
  });
}

}  // namespace retcurr
