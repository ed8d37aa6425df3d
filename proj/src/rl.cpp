#include "retcurr/rl.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "retcurr/error.hpp"
#include "retcurr/text.hpp"

namespace retcurr {

int reward_exact_match(std::string_view prediction, std::string_view ground_truth) {
  return normalize_answer(prediction) == normalize_answer(ground_truth) ? 1 : 0;
}

Advantages compute_advantages(std::span<const int> rewards) {
  require(rewards.size() >= 2, "compute_advantages: need at least 2 rollouts");
  Advantages out;
  out.values.assign(rewards.size(), 0.0);
  const bool constant =
      std::all_of(rewards.begin(), rewards.end(), [&](int r) { return r == rewards.front(); });
  if (constant) {
    out.ignored = true;
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (int r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (int r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) out.values[i] = (rewards[i] - mean) / sd;
  return out;
}

double RolloutGroup::mean_reward() const {
  if (rewards.empty()) return 0.0;
  double s = 0.0;
  for (int r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

RolloutGroup make_group(std::size_t sample_index, std::vector<int> rewards) {
  auto adv = compute_advantages(rewards);
  return {sample_index, std::move(rewards), std::move(adv.values), adv.ignored};
}

std::mt19937_64 derive_rng(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xFFFFFFFFu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), static_cast<std::uint32_t>(stream), lo(a), hi(a),
                    lo(b),    hi(b)};
  return std::mt19937_64(seq);
}

void SimConfig::validate() const {
  require(eta > 0.0, "sim eta must be > 0");
  require(eta_topic >= 0.0, "sim eta_topic must be >= 0");
  require(noise_coeff >= 0.0, "sim noise_coeff must be >= 0");
  require(miss_coeff >= 0.0, "sim miss_coeff must be >= 0");
  require(competence_bound > 0.0, "sim competence_bound must be > 0");
}

double SimPolicy::topic(const std::optional<std::string>& topic_id) const {
  if (!topic_id) return 0.0;
  auto it = topic_competence.find(*topic_id);
  return it == topic_competence.end() ? 0.0 : it->second;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double sim_success_prob(const SimPolicy& policy, const VqaSample& sample,
                        const RetrievedSet& retrieved, double base_difficulty) {
  require(base_difficulty >= 0.0 && base_difficulty <= 1.0,
          "sim_success_prob: base_difficulty outside [0,1]");
  const double ease = std::clamp(1.0 - base_difficulty, 1e-9, 1.0 - 1e-9);
  std::size_t noise = 0;
  bool gt_present = false;
  for (const auto& e : retrieved.entries) {
    if (e.article_id == sample.gt_article_id) {
      gt_present = true;
    } else {
      ++noise;
    }
  }
  const auto& cfg = policy.config;
  const double x = policy.competence + policy.topic(sample.topic_id) +
                   std::log(ease / (1.0 - ease)) -
                   cfg.noise_coeff * static_cast<double>(noise) -
                   (gt_present ? 0.0 : cfg.miss_coeff);
  return logistic(x);
}

namespace {

std::string draw_answer(const VqaSample& sample, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p ? sample.answer : std::string(kWrongAnswer);
}

}  // namespace

RolloutGroup sim_rollout(const SimPolicy& policy, const VqaSample& sample,
                         std::size_t sample_index, const RetrievedSet& retrieved,
                         int n_rollouts, double base_difficulty, std::mt19937_64& rng) {
  require(n_rollouts >= 2, "sim_rollout: n_rollouts must be >= 2");
  const double p = sim_success_prob(policy, sample, retrieved, base_difficulty);
  std::vector<int> rewards;
  rewards.reserve(static_cast<std::size_t>(n_rollouts));
  for (int r = 0; r < n_rollouts; ++r) {
    rewards.push_back(reward_exact_match(draw_answer(sample, p, rng), sample.answer));
  }
  return make_group(sample_index, std::move(rewards));
}

double group_signal(const RolloutGroup& group) {
  if (group.ignored) return 0.0;
  double abs_adv = 0.0;
  for (double a : group.advantages) abs_adv += std::abs(a);
  abs_adv /= static_cast<double>(group.advantages.size());
  const double m = group.mean_reward();
  return abs_adv * 2.0 * std::sqrt(m * (1.0 - m));
}

void sim_update(SimPolicy& policy, std::span<const RolloutGroup> groups, const Corpus& corpus) {
  if (groups.empty()) return;
  const auto& cfg = policy.config;
  const double n = static_cast<double>(groups.size());
  double total = 0.0;
  std::map<std::string, double> per_topic;
  for (const auto& g : groups) {
    const double s = group_signal(g);
    if (s == 0.0) continue;
    total += s;
    const auto& topic = corpus.samples()[g.sample_index].topic_id;
    if (topic) per_topic[*topic] += s;
  }
  if (total == 0.0) return;
  const double bound = cfg.competence_bound;
  policy.competence = std::clamp(policy.competence + cfg.eta * total / n, -bound, bound);
  for (const auto& [topic, s] : per_topic) {
    double& tc = policy.topic_competence[topic];
    tc = std::clamp(tc + cfg.eta_topic * s / n, -bound, bound);
  }
}

SimPolicyAdapter::SimPolicyAdapter(const Corpus& corpus, DifficultySidecar base_difficulty,
                                   SimConfig config)
    : corpus_(&corpus), difficulty_(std::move(base_difficulty)) {
  config.validate();
  require(difficulty_.size() == corpus.num_samples(),
          "difficulty sidecar size differs from corpus samples");
  policy_.config = config;
}

double SimPolicyAdapter::success_prob(const VqaSample& sample,
                                      const RetrievedSet& retrieved) const {
  const auto idx = corpus_->find_sample(sample.id);
  require(idx.has_value(), "sim policy: unknown sample " + sample.id);
  return sim_success_prob(policy_, sample, retrieved, difficulty_[*idx]);
}

std::string SimPolicyAdapter::answer(const VqaSample& sample, const RetrievedSet& retrieved,
                                     std::mt19937_64& rng) const {
  return draw_answer(sample, success_prob(sample, retrieved), rng);
}

void SimPolicyAdapter::learn(std::span<const RolloutGroup> groups) {
  sim_update(policy_, groups, *corpus_);
}

RolloutGroup rollout_group(const PolicyAdapter& policy, const VqaSample& sample,
                           std::size_t sample_index, const RetrievedSet& retrieved,
                           int n_rollouts, std::mt19937_64& rng) {
  require(n_rollouts >= 2, "rollout_group: n_rollouts must be >= 2");
  std::vector<int> rewards;
  rewards.reserve(static_cast<std::size_t>(n_rollouts));
  for (int r = 0; r < n_rollouts; ++r) {
    rewards.push_back(reward_exact_match(policy.answer(sample, retrieved, rng), sample.answer));
  }
  return make_group(sample_index, std::move(rewards));
}

}  // namespace retcurr
