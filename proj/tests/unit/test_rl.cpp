#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "retcurr/error.hpp"
#include "retcurr/rl.hpp"

using namespace retcurr;

namespace {

RetrievedSet with_ids(std::initializer_list<const char*> ids) {
  RetrievedSet r;
  for (const char* id : ids) r.entries.push_back({id, 0, 0.0, 0.0, 0.0, false});
  return r;
}

VqaSample topical(std::string topic) {
  auto s = fixtures::sample("q", "?", "Paris", "gt", fixtures::axis(2, 0));
  s.topic_id = std::move(topic);
  return s;
}

// Always answers from a fixed script, cycling.
class ScriptedPolicy : public PolicyAdapter {
 public:
  explicit ScriptedPolicy(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string answer(const VqaSample&, const RetrievedSet&, std::mt19937_64&) const override {
    return script_[next_++ % script_.size()];
  }
  void learn(std::span<const RolloutGroup>) override {}

 private:
  std::vector<std::string> script_;
  mutable std::size_t next_ = 0;
};

}  // namespace

TEST_CASE("exact-match reward normalizes case and whitespace") {
  CHECK(reward_exact_match("  paris ", "Paris") == 1);
  CHECK(reward_exact_match("Paris\tFrance", "paris  france") == 1);
  CHECK(reward_exact_match("Lyon", "Paris") == 0);
  CHECK(reward_exact_match(kWrongAnswer, "Paris") == 0);
}

TEST_CASE("advantages of a single success among four") {
  const std::vector<int> r{1, 0, 0, 0};
  const auto a = compute_advantages(r);
  CHECK_FALSE(a.ignored);
  // mean 0.25, population std sqrt(3)/4.
  CHECK(a.values[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  for (int i = 1; i < 4; ++i) CHECK(a.values[i] == doctest::Approx(-1.0 / std::sqrt(3.0)));
}

TEST_CASE("constant groups are ignored") {
  for (int v : {0, 1}) {
    const std::vector<int> r(5, v);
    const auto a = compute_advantages(r);
    CHECK(a.ignored);
    for (double x : a.values) CHECK(x == 0.0);
    const auto g = make_group(3, r);
    CHECK(g.ignored);
    CHECK(group_signal(g) == 0.0);
  }
  CHECK_THROWS_AS(compute_advantages(std::vector<int>{}), Error);
  // Graded rewards normalize the same way: {1,2} -> {-1,1}.
  const auto graded = compute_advantages(std::vector<int>{1, 2});
  CHECK(graded.values == std::vector<double>{-1.0, 1.0});
}

TEST_CASE("informative groups have zero mean and unit std") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + trial % 9;
    std::vector<int> r(n);
    for (int& x : r) x = coin(rng) ? 1 : 0;
    const auto a = compute_advantages(r);
    const int sum = std::accumulate(r.begin(), r.end(), 0);
    CHECK(a.ignored == (sum == 0 || sum == static_cast<int>(n)));
    if (a.ignored) continue;
    const double mean = std::accumulate(a.values.begin(), a.values.end(), 0.0) / n;
    double var = 0.0;
    for (double x : a.values) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var / n == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("group signal equals 4 r (1 - r) for binary rewards") {
  for (int k = 1; k < 6; ++k) {
    std::vector<int> r(6, 0);
    for (int i = 0; i < k; ++i) r[i] = 1;
    const double m = k / 6.0;
    CHECK(group_signal(make_group(0, r)) == doctest::Approx(4 * m * (1 - m)).epsilon(1e-12));
  }
}

TEST_CASE("simulated success probability") {
  SimPolicy pol;
  const auto s = topical("t0");
  CHECK(sim_success_prob(pol, s, with_ids({"gt"}), 0.5) == doctest::Approx(0.5));
  CHECK(sim_success_prob(pol, s, with_ids({"x"}), 0.5) ==
        doctest::Approx(logistic(-pol.config.miss_coeff - pol.config.noise_coeff)));
  CHECK(sim_success_prob(pol, s, with_ids({}), 0.5) == doctest::Approx(logistic(-2.0)));
  CHECK(sim_success_prob(pol, s, with_ids({"gt"}), 0.7) == doctest::Approx(0.3));
  pol.competence = 1.0;
  pol.topic_competence["t0"] = 0.5;
  CHECK(sim_success_prob(pol, s, with_ids({"gt", "a", "b"}), 0.5) ==
        doctest::Approx(logistic(1.5 - 2 * pol.config.noise_coeff)));
  CHECK(sim_success_prob(pol, topical("t1"), with_ids({"gt"}), 0.5) ==
        doctest::Approx(logistic(1.0)));
  CHECK_THROWS_AS(sim_success_prob(pol, s, with_ids({"gt"}), 1.5), Error);
}

TEST_CASE("success probability is monotone in its inputs") {
  SimPolicy pol;
  const auto s = topical("t0");
  double prev = 1.0;
  for (double d = 0.0; d <= 1.0; d += 0.05) {
    const double p = sim_success_prob(pol, s, with_ids({"gt"}), d);
    CHECK(p <= prev);
    prev = p;
  }
  prev = 0.0;
  for (double c = -3.0; c <= 3.0; c += 0.5) {
    pol.competence = c;
    const double p = sim_success_prob(pol, s, with_ids({"gt", "a"}), 0.5);
    CHECK(p >= prev);
    prev = p;
  }
  // Every gap level is at least as hard as the one before it.
  pol.competence = 0.0;
  for (int G : {3, 6}) {
    for (int g = 1; g <= G; ++g) {
      const auto easier = phi_for_gap(g - 1, G), harder = phi_for_gap(g, G);
      auto set_for = [](const RetrievalMod& m) {
        RetrievedSet r;
        if (m.gamma) r.entries.push_back({"gt", 0, 0, 0, 0, true});
        while (static_cast<int>(r.size()) < m.k) r.entries.push_back({"n", 0, 0, 0, 0, false});
        return r;
      };
      CHECK(sim_success_prob(pol, s, set_for(easier), 0.4) >=
            sim_success_prob(pol, s, set_for(harder), 0.4));
    }
  }
}

TEST_CASE("Monte Carlo rollouts match the analytic rate") {
  SimPolicy pol;
  const auto s = topical("t0");
  std::mt19937_64 rng(99);
  const int groups = 20000;
  long successes = 0;
  int ignored = 0;
  for (int i = 0; i < groups; ++i) {
    const auto g = sim_rollout(pol, s, 0, with_ids({"gt"}), 4, 0.7, rng);
    successes += std::accumulate(g.rewards.begin(), g.rewards.end(), 0);
    ignored += g.ignored ? 1 : 0;
  }
  CHECK(std::abs(successes / (4.0 * groups) - 0.3) < 0.01);
  const double p_const = std::pow(0.3, 4) + std::pow(0.7, 4);
  CHECK(std::abs(ignored / static_cast<double>(groups) - p_const) < 0.01);
  CHECK_THROWS_AS(sim_rollout(pol, s, 0, with_ids({"gt"}), 1, 0.7, rng), Error);
}

TEST_CASE("sim_update") {
  const auto synth = generate_synthetic_corpus(fixtures::small_spec(2));
  const auto& c = synth.corpus;
  SimPolicy pol;
  pol.config.eta = 0.1;
  pol.config.eta_topic = 0.2;

  SUBCASE("all ignored leaves the policy unchanged") {
    const std::vector<RolloutGroup> gs{make_group(0, {1, 1, 1, 1}), make_group(1, {0, 0, 0, 0})};
    const auto before = pol;
    sim_update(pol, gs, c);
    CHECK(pol == before);
  }
  SUBCASE("informative groups raise competence by the batch-averaged signal") {
    const std::vector<RolloutGroup> gs{make_group(0, {1, 0, 1, 0}), make_group(5, {0, 0, 0, 0})};
    sim_update(pol, gs, c);
    // Signal of the first group is 4 * 0.5 * 0.5 = 1, averaged over 2 groups.
    CHECK(pol.competence == doctest::Approx(0.1 * 0.5));
    const auto& topic = *c.samples()[0].topic_id;
    CHECK(pol.topic_competence.at(topic) == doctest::Approx(0.2 * 0.5));
    CHECK(pol.topic_competence.size() == 1);
  }
  SUBCASE("competence stays bounded") {
    pol.config.eta = 100.0;
    pol.config.competence_bound = 3.0;
    const std::vector<RolloutGroup> gs{make_group(0, {1, 0})};
    for (int i = 0; i < 5; ++i) sim_update(pol, gs, c);
    CHECK(pol.competence == 3.0);
  }
}

TEST_CASE("derived streams are reproducible and distinct") {
  auto a = derive_rng(7, Stream::kRollout, 3, 4);
  auto b = derive_rng(7, Stream::kRollout, 3, 4);
  CHECK(a() == b());
  const auto first = [](std::mt19937_64 r) { return r(); };
  CHECK(first(derive_rng(7, Stream::kRollout, 3, 4)) != first(derive_rng(7, Stream::kEval, 3, 4)));
  CHECK(first(derive_rng(7, Stream::kRollout, 3, 4)) != first(derive_rng(7, Stream::kRollout, 4, 3)));
  CHECK(first(derive_rng(7, Stream::kRollout, 3, 4)) != first(derive_rng(8, Stream::kRollout, 3, 4)));
}

TEST_CASE("rollout_group scores any adapter") {
  const ScriptedPolicy pol({"paris", "Lyon", " PARIS", "x"});
  std::mt19937_64 rng(1);
  const auto g = rollout_group(pol, topical("t"), 9, with_ids({"gt"}), 4, rng);
  CHECK(g.sample_index == 9);
  CHECK(g.rewards == std::vector<int>{1, 0, 1, 0});
  CHECK(g.mean_reward() == 0.5);
  CHECK_FALSE(g.ignored);
}

TEST_CASE("sim adapter is deterministic given the rng") {
  const auto synth = generate_synthetic_corpus(fixtures::small_spec(4));
  const SimPolicyAdapter pol(synth.corpus, synth.base_difficulty, SimConfig{});
  const auto& s = synth.corpus.samples()[3];
  const auto set = with_ids({s.gt_article_id.c_str()});
  auto r1 = derive_rng(1, Stream::kRollout, 0, 3), r2 = derive_rng(1, Stream::kRollout, 0, 3);
  CHECK(rollout_group(pol, s, 3, set, 8, r1).rewards == rollout_group(pol, s, 3, set, 8, r2).rewards);
  CHECK(pol.success_prob(s, set) ==
        doctest::Approx(logistic(std::log((1 - synth.base_difficulty[3]) / synth.base_difficulty[3]))));
  CHECK_THROWS_AS(SimPolicyAdapter(synth.corpus, {0.5}, SimConfig{}), Error);
}
