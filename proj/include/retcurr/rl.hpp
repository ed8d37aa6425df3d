#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "retcurr/corpus.hpp"
#include "retcurr/retrieval.hpp"

namespace retcurr {

inline constexpr int kDefaultRollouts = 4;
inline constexpr std::string_view kWrongAnswer = "<no answer>";

// 1 iff the normalized strings are equal.
int reward_exact_match(std::string_view prediction, std::string_view ground_truth);

struct Advantages {
  std::vector<double> values;
  bool ignored = false;
};

// Group-relative advantages (r - mean) / population std. Constant groups
// carry no signal: all-zero advantages, ignored = true.
Advantages compute_advantages(std::span<const int> rewards);

struct RolloutGroup {
  std::size_t sample_index = 0;
  std::vector<int> rewards;
  std::vector<double> advantages;
  bool ignored = false;

  double mean_reward() const;
};

RolloutGroup make_group(std::size_t sample_index, std::vector<int> rewards);

// Independent random streams keyed by purpose and coordinates, so every
// draw is reproducible regardless of evaluation order.
enum class Stream : std::uint32_t {
  kSplit = 1,
  kSampling = 2,
  kRollout = 3,
  kEval = 4,
};

std::mt19937_64 derive_rng(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                           std::uint64_t b = 0);

struct SimConfig {
  double eta = 0.05;         // global competence rate
  double eta_topic = 0.1;    // per-topic competence rate
  double noise_coeff = 0.15; // logit penalty per non-ground-truth candidate
  double miss_coeff = 2.0;   // logit penalty when the ground truth is absent
  double competence_bound = 8.0;

  void validate() const;
  bool operator==(const SimConfig&) const = default;
};

// Desk-scale stand-in for the policy model: success probability is a
// logistic in competence, latent difficulty and retrieval noise.
struct SimPolicy {
  double competence = 0.0;
  std::map<std::string, double> topic_competence;
  SimConfig config;

  double topic(const std::optional<std::string>& topic_id) const;
  bool operator==(const SimPolicy&) const = default;
};

double logistic(double x);

double sim_success_prob(const SimPolicy& policy, const VqaSample& sample,
                        const RetrievedSet& retrieved, double base_difficulty);

RolloutGroup sim_rollout(const SimPolicy& policy, const VqaSample& sample,
                         std::size_t sample_index, const RetrievedSet& retrieved,
                         int n_rollouts, double base_difficulty, std::mt19937_64& rng);

// Learning signal of one informative group: mean|A| * 2 * std(r) = 4 r(1-r)
// for binary rewards. Zero for ignored groups.
double group_signal(const RolloutGroup& group);

// Competence moves by eta times the batch-averaged signal; each topic by
// eta_topic times its share of that signal. Ignored groups contribute nothing.
void sim_update(SimPolicy& policy, std::span<const RolloutGroup> groups, const Corpus& corpus);

// Plug-in point for a policy. Implementations must be deterministic given
// the rng state.
class PolicyAdapter {
 public:
  virtual ~PolicyAdapter() = default;
  virtual std::string answer(const VqaSample& sample, const RetrievedSet& retrieved,
                             std::mt19937_64& rng) const = 0;
  virtual void learn(std::span<const RolloutGroup> groups) = 0;
};

class SimPolicyAdapter : public PolicyAdapter {
 public:
  SimPolicyAdapter(const Corpus& corpus, DifficultySidecar base_difficulty, SimConfig config);

  std::string answer(const VqaSample& sample, const RetrievedSet& retrieved,
                     std::mt19937_64& rng) const override;
  void learn(std::span<const RolloutGroup> groups) override;

  const SimPolicy& policy() const { return policy_; }
  SimPolicy& policy() { return policy_; }
  double base_difficulty(std::size_t sample) const { return difficulty_[sample]; }
  double success_prob(const VqaSample& sample, const RetrievedSet& retrieved) const;

 private:
  const Corpus* corpus_;
  DifficultySidecar difficulty_;
  SimPolicy policy_;
};

// Runs n_rollouts answers through any adapter and scores them.
RolloutGroup rollout_group(const PolicyAdapter& policy, const VqaSample& sample,
                           std::size_t sample_index, const RetrievedSet& retrieved,
                           int n_rollouts, std::mt19937_64& rng);

}  // namespace retcurr
