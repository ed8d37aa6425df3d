#include "retcurr/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "retcurr/error.hpp"
#include "retcurr/parallel.hpp"

namespace retcurr {

using ojson = nlohmann::ordered_json;

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kWikiR1: return "wiki_r1";
    case Mode::kVanilla: return "vanilla";
    case Mode::kDataOnly: return "data_only";
    case Mode::kSamplingOnly: return "sampling_only";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::kWikiR1, Mode::kVanilla, Mode::kDataOnly, Mode::kSamplingOnly}) {
    if (mode_name(m) == name) return m;
  }
  fail(ErrorKind::kValidation, "unknown mode " + std::string(name) +
                                   " (expected wiki_r1, vanilla, data_only, sampling_only)");
}

bool uses_data_curriculum(Mode mode) { return mode == Mode::kWikiR1 || mode == Mode::kDataOnly; }
bool uses_sampling_curriculum(Mode mode) {
  return mode == Mode::kWikiR1 || mode == Mode::kSamplingOnly;
}
bool uses_propagation(Mode mode) { return mode == Mode::kWikiR1; }

std::string_view granularity_name(WindowGranularity g) {
  switch (g) {
    case WindowGranularity::kBatch: return "batch";
    case WindowGranularity::kSample: return "sample";
    case WindowGranularity::kRollout: return "rollout";
  }
  return "?";
}

WindowGranularity parse_granularity(std::string_view name) {
  for (auto g : {WindowGranularity::kBatch, WindowGranularity::kSample,
                 WindowGranularity::kRollout}) {
    if (granularity_name(g) == name) return g;
  }
  fail(ErrorKind::kValidation,
       "unknown window_granularity " + std::string(name) + " (expected batch, sample, rollout)");
}

std::string_view update_name(DifficultyUpdate u) {
  switch (u) {
    case DifficultyUpdate::kAccumulate: return "accumulate";
    case DifficultyUpdate::kAverage: return "average";
  }
  return "?";
}

DifficultyUpdate parse_update(std::string_view name) {
  for (auto u : {DifficultyUpdate::kAccumulate, DifficultyUpdate::kAverage}) {
    if (update_name(u) == name) return u;
  }
  fail(ErrorKind::kValidation, "unknown difficulty_update " + std::string(name) +
                                   " (expected accumulate, average)");
}

void TrainerConfig::validate() const {
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(n_rollouts >= 2, "n_rollouts must be >= 2");
  require(window >= 1, "w must be >= 1");
  require(tau > 0.0 && tau < 1.0, "tau must be in (0,1)");
  require(max_gap >= 2, "G must be >= 2");
  require(initial_gap >= 0 && initial_gap <= max_gap, "initial_gap must be in [0, G]");
  require(sigma > 0.0, "sigma must be > 0");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
  require(alpha >= 0.0 && alpha < 1.0, "alpha must be in [0,1)");
  require(prop_iters >= 1, "prop_T must be >= 1");
  require(prop_eps > 0.0, "prop_eps must be > 0");
  require(propagation_interval >= 1, "propagation_interval must be >= 1");
  require(top_m >= 1, "top_m must be >= 1");
  require(chunk_size >= 1, "chunk_size must be >= 1");
  require(eval_interval >= 0, "eval_interval must be >= 0");
  require(eval_fraction >= 0.0 && eval_fraction < 1.0, "eval_fraction must be in [0,1)");
  require(snapshot_interval >= 0, "snapshot_interval must be >= 0");
  require(threads >= 1, "threads must be >= 1");
  sim.validate();
}

// ---------------------------------------------------------------------------
// Config JSON

std::string config_to_json(const TrainerConfig& c) {
  ojson j;
  j["mode"] = mode_name(c.mode);
  j["iterations"] = c.iterations;
  j["batch_size"] = c.batch_size;
  j["n_rollouts"] = c.n_rollouts;
  j["w"] = c.window;
  j["window_granularity"] = granularity_name(c.window_granularity);
  j["require_full_window"] = c.require_full_window;
  j["tau"] = c.tau;
  j["G"] = c.max_gap;
  j["initial_gap"] = c.initial_gap;
  j["sigma"] = c.sigma;
  j["lambda"] = c.lambda;
  j["alpha"] = c.alpha;
  j["prop_T"] = c.prop_iters;
  j["prop_eps"] = c.prop_eps;
  j["propagation_interval"] = c.propagation_interval;
  j["difficulty_update"] = update_name(c.difficulty_update);
  j["top_m"] = c.top_m;
  j["chunk_size"] = c.chunk_size;
  j["eval_interval"] = c.eval_interval;
  j["eval_fraction"] = c.eval_fraction;
  j["snapshot_interval"] = c.snapshot_interval;
  j["seed"] = c.seed;
  j["eta"] = c.sim.eta;
  j["eta_topic"] = c.sim.eta_topic;
  j["noise_coeff"] = c.sim.noise_coeff;
  j["miss_coeff"] = c.sim.miss_coeff;
  j["competence_bound"] = c.sim.competence_bound;
  j["threads"] = c.threads;
  return j.dump(2);
}

TrainerConfig config_from_json(std::string_view json, const TrainerConfig& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("trainer config: ") + e.what());
  }
  require(j.is_object(), "trainer config must be a flat JSON object");
  TrainerConfig c = base;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "mode") c.mode = parse_mode(v.get<std::string>());
      else if (key == "iterations") c.iterations = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "n_rollouts") c.n_rollouts = v.get<int>();
      else if (key == "w") c.window = v.get<int>();
      else if (key == "window_granularity") c.window_granularity = parse_granularity(v.get<std::string>());
      else if (key == "require_full_window") c.require_full_window = v.get<bool>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "G") c.max_gap = v.get<int>();
      else if (key == "initial_gap") c.initial_gap = v.get<int>();
      else if (key == "sigma") c.sigma = v.get<double>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "prop_T") c.prop_iters = v.get<int>();
      else if (key == "prop_eps") c.prop_eps = v.get<double>();
      else if (key == "propagation_interval") c.propagation_interval = v.get<int>();
      else if (key == "difficulty_update") c.difficulty_update = parse_update(v.get<std::string>());
      else if (key == "top_m") c.top_m = v.get<int>();
      else if (key == "chunk_size") c.chunk_size = v.get<int>();
      else if (key == "eval_interval") c.eval_interval = v.get<int>();
      else if (key == "eval_fraction") c.eval_fraction = v.get<double>();
      else if (key == "snapshot_interval") c.snapshot_interval = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "eta") c.sim.eta = v.get<double>();
      else if (key == "eta_topic") c.sim.eta_topic = v.get<double>();
      else if (key == "noise_coeff") c.sim.noise_coeff = v.get<double>();
      else if (key == "miss_coeff") c.sim.miss_coeff = v.get<double>();
      else if (key == "competence_bound") c.sim.competence_bound = v.get<double>();
      else if (key == "threads") c.threads = v.get<int>();
      else fail(ErrorKind::kValidation, "trainer config: unknown field " + key);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kValidation, "trainer config: field " + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Evaluation

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_samples(
    std::size_t n, double eval_fraction, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = derive_rng(seed, Stream::kSplit);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n)));
  std::vector<std::size_t> eval(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_eval));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_eval), perm.end());
  std::sort(eval.begin(), eval.end());
  std::sort(train.begin(), train.end());
  return {std::move(eval), std::move(train)};
}

double evaluate(const PolicyAdapter& policy, const Corpus& corpus, const RankingCache& rankings,
                const EvalConfig& config) {
  if (config.samples.empty()) return 0.0;
  const RetrievalMod hardest = phi_for_gap(config.max_gap, config.max_gap);
  long long correct = 0;
  for (std::size_t s : config.samples) {
    const auto& sample = corpus.samples()[s];
    auto rng = derive_rng(config.seed, Stream::kEval, config.round, s);
    correct += reward_exact_match(policy.answer(sample, rankings.modified(s, hardest), rng),
                                  sample.answer);
  }
  return static_cast<double>(correct) / static_cast<double>(config.samples.size());
}

// ---------------------------------------------------------------------------
// Training loop

MetricsLog run_training(const TrainerConfig& config, const Corpus& corpus,
                        const TextIndex& index, const SimilarityGraph& graph,
                        PolicyAdapter& policy) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  check_index_matches(index, corpus);
  if (graph.corpus_hash != corpus.content_hash()) {
    fail(ErrorKind::kHashMismatch, "similarity graph does not match corpus (hash " +
                                       graph.corpus_hash + " vs " + corpus.content_hash() + ")");
  }
  require(graph.size() == corpus.num_samples(), "graph size differs from corpus samples");
  require(static_cast<std::size_t>(config.max_gap - 1) <= corpus.num_articles(),
          fmt::format("G-1 = {} candidates exceed the {} articles", config.max_gap - 1,
                      corpus.num_articles()));

  const Mode mode = config.mode;
  const auto n = corpus.num_samples();
  const SimilarityGraph normalized = graph.row_normalized ? graph : row_normalize(graph);
  const PropagationConfig prop{config.alpha, config.prop_iters, config.prop_eps};
  const SamplerConfig sampler{kSamplerTarget, config.sigma,
                              static_cast<std::size_t>(config.batch_size)};

  MetricsLog log;
  log.config = config;
  log.corpus_hash = corpus.content_hash();
  log.index_hash = index.content_hash();
  log.graph_hash = graph_content_hash(graph);

  auto [eval_samples, pool] = split_samples(n, config.eval_fraction, config.seed);
  require(pool.size() >= static_cast<std::size_t>(config.batch_size),
          fmt::format("batch_size {} exceeds the {} training samples", config.batch_size,
                      pool.size()));
  log.eval_samples = eval_samples;

  const RankingCache rankings(corpus, index, config.lambda,
                              static_cast<unsigned>(config.threads));

  GapState gap{uses_data_curriculum(mode) ? config.initial_gap : config.max_gap,
               config.max_gap, config.tau};
  gap.validate();
  SlidingWindow window(static_cast<std::size_t>(config.window));
  DifficultyStore store(n);
  std::vector<double> reward_sum(n, 0.0);
  std::vector<int> reward_count(n, 0);
  long long cumulative_ignored = 0;

  auto run_eval = [&](int iteration) {
    EvalConfig ec{eval_samples, config.max_gap, config.seed,
                  static_cast<std::uint64_t>(iteration)};
    return evaluate(policy, corpus, rankings, ec);
  };

  for (int it = 1; it <= config.iterations; ++it) {
    IterationRecord rec;
    rec.iteration = it;

    auto sampling_rng = derive_rng(config.seed, Stream::kSampling, static_cast<std::uint64_t>(it));
    rec.batch = uses_sampling_curriculum(mode)
                    ? sample_batch(store, pool, sampler, sampling_rng)
                    : sample_uniform(pool, sampler.batch_size, sampling_rng);

    rec.gap_level = gap.level;
    const RetrievalMod mod = phi_for_gap(gap.level, gap.max_level);

    // Rollouts read only immutable state; merged in batch order below.
    std::vector<RolloutGroup> groups(rec.batch.size());
    parallel_for(rec.batch.size(), static_cast<unsigned>(config.threads), [&](std::size_t b) {
      const std::size_t s = rec.batch[b];
      auto rng = derive_rng(config.seed, Stream::kRollout, static_cast<std::uint64_t>(it), s);
      groups[b] = rollout_group(policy, corpus.samples()[s], s, rankings.modified(s, mod),
                                config.n_rollouts, rng);
    });

    long long ignored = 0;
    for (const auto& g : groups) ignored += g.ignored ? 1 : 0;
    cumulative_ignored += ignored;
    rec.zero_adv_fraction = static_cast<double>(ignored) / static_cast<double>(groups.size());
    rec.cumulative_ignored = cumulative_ignored;

    policy.learn(groups);

    switch (config.window_granularity) {
      case WindowGranularity::kBatch: {
        double sum = 0.0;
        for (const auto& g : groups) sum += g.mean_reward();
        record_rewards(window, sum / static_cast<double>(groups.size()));
        break;
      }
      case WindowGranularity::kSample:
        for (const auto& g : groups) record_rewards(window, g.mean_reward());
        break;
      case WindowGranularity::kRollout:
        for (const auto& g : groups) {
          for (int r : g.rewards) record_rewards(window, static_cast<double>(r));
        }
        break;
    }
    rec.window_mean = window.mean();
    if (uses_data_curriculum(mode)) {
      rec.upgraded = maybe_upgrade(gap, window, config.require_full_window);
    }

    for (const auto& g : groups) {
      reward_sum[g.sample_index] += g.mean_reward();
      ++reward_count[g.sample_index];
      log.groups.push_back({it, g.sample_index, g.rewards, g.ignored});
    }
    auto running_mean = [&](std::size_t s) {
      return reward_sum[s] / static_cast<double>(reward_count[s]);
    };

    if (uses_propagation(mode) && it % config.propagation_interval == 0) {
      auto obs = ObservationVector::empty(n);
      for (std::size_t s : rec.batch) obs.observe(s, running_mean(s));
      const auto propagated = propagate(normalized, obs, prop).values;
      if (config.difficulty_update == DifficultyUpdate::kAverage) {
        average_difficulty(store, propagated);
      } else {
        update_difficulty(store, propagated);
      }
    } else if (mode == Mode::kSamplingOnly) {
      for (std::size_t s : rec.batch) store.set(s, running_mean(s));
    }

    if (config.eval_interval > 0 &&
        (it % config.eval_interval == 0 || it == config.iterations)) {
      rec.eval_accuracy = run_eval(it);
    }
    if (config.snapshot_interval > 0 && it % config.snapshot_interval == 0) {
      log.snapshots.emplace_back(it, store);
    }
    log.records.push_back(std::move(rec));
  }
  if (config.iterations > 0 &&
      (log.snapshots.empty() || log.snapshots.back().first != config.iterations)) {
    log.snapshots.emplace_back(config.iterations, store);
  }

  log.observed_means = ObservationVector::empty(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (reward_count[s] > 0) {
      log.observed_means.observe(s, reward_sum[s] / static_cast<double>(reward_count[s]));
    }
  }
  if (const auto* sim = dynamic_cast<const SimPolicyAdapter*>(&policy)) {
    log.final_policy = sim->policy();
  }
  log.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return log;
}

MetricsLog run_training(const TrainerConfig& config, const Corpus& corpus,
                        const TextIndex& index, const SimilarityGraph& graph,
                        const DifficultySidecar& difficulty) {
  SimPolicyAdapter policy(corpus, difficulty, config.sim);
  return run_training(config, corpus, index, graph, policy);
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string opt_fixed(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

}  // namespace

std::string metrics_csv(const MetricsLog& log) {
  std::string out =
      "iteration,g,window_mean,zero_adv_fraction,cumulative_ignored,upgraded,eval_accuracy\n";
  for (const auto& r : log.records) {
    out += fmt::format("{},{},{},{:.6f},{},{},{}\n", r.iteration, r.gap_level,
                       opt_fixed(r.window_mean), r.zero_adv_fraction, r.cumulative_ignored,
                       r.upgraded ? 1 : 0, opt_fixed(r.eval_accuracy));
  }
  return out;
}

std::string groups_csv(const MetricsLog& log, const Corpus& corpus) {
  std::string out = "iteration,sample_id,rewards,ignored\n";
  for (const auto& g : log.groups) {
    std::string rewards;
    for (std::size_t i = 0; i < g.rewards.size(); ++i) {
      if (i) rewards.push_back(';');
      rewards += std::to_string(g.rewards[i]);
    }
    out += fmt::format("{},{},{},{}\n", g.iteration, corpus.samples()[g.sample_index].id, rewards,
                       g.ignored ? 1 : 0);
  }
  return out;
}

std::string run_json(const MetricsLog& log) {
  ojson j;
  j["config"] = ojson::parse(config_to_json(log.config));
  j["corpus_hash"] = log.corpus_hash;
  j["index_hash"] = log.index_hash;
  j["graph_hash"] = log.graph_hash;
  j["wall_clock_seconds"] = log.wall_clock_seconds;
  j["iterations"] = log.records.size();
  j["eval_samples"] = log.eval_samples.size();

  ojson fin;
  fin["competence"] = log.final_policy.competence;
  ojson topics = ojson::object();
  for (const auto& [t, v] : log.final_policy.topic_competence) topics[t] = v;
  fin["topic_competence"] = std::move(topics);
  int upgrades = 0;
  std::optional<double> last_eval;
  for (const auto& r : log.records) {
    upgrades += r.upgraded ? 1 : 0;
    if (r.eval_accuracy) last_eval = r.eval_accuracy;
  }
  fin["final_gap"] = log.records.empty() ? ojson(nullptr) : ojson(log.records.back().gap_level);
  fin["upgrades"] = upgrades;
  fin["cumulative_ignored"] =
      log.records.empty() ? 0LL : log.records.back().cumulative_ignored;
  fin["final_eval_accuracy"] = last_eval ? ojson(*last_eval) : ojson(nullptr);
  j["final"] = std::move(fin);
  return j.dump(2) + "\n";
}

void write_metrics(const MetricsLog& log, const Corpus& corpus,
                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  const auto snap_dir = out_dir / "difficulty_snapshots";
  std::filesystem::create_directories(snap_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + snap_dir.string() + ": " + ec.message());
  write_file(out_dir / "metrics.csv", metrics_csv(log));
  write_file(out_dir / "groups.csv", groups_csv(log, corpus));
  write_file(out_dir / "run.json", run_json(log));
  for (const auto& [it, store] : log.snapshots) {
    write_file(snap_dir / fmt::format("iter_{:06d}.csv", it), store.to_csv(corpus));
  }
}

}  // namespace retcurr
