#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retcurr/corpus.hpp"
#include "retcurr/curriculum.hpp"
#include "retcurr/graph.hpp"
#include "retcurr/retrieval.hpp"
#include "retcurr/rl.hpp"

namespace retcurr {

// Which curriculum components run.
//   vanilla        uniform sampling, hardest retrieval level throughout
//   data_only      gap-level data curriculum, uniform sampling
//   sampling_only  Gaussian sampling over raw observed rewards, hardest level
//   wiki_r1        data curriculum + Gaussian sampling + observation propagation
enum class Mode { kWikiR1, kVanilla, kDataOnly, kSamplingOnly };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

bool uses_data_curriculum(Mode mode);
bool uses_sampling_curriculum(Mode mode);
bool uses_propagation(Mode mode);

// What one sliding-window element stands for.
enum class WindowGranularity { kBatch, kSample, kRollout };

std::string_view granularity_name(WindowGranularity g);
WindowGranularity parse_granularity(std::string_view name);

// How propagated estimates H~ enter the difficulty store.
//   accumulate  H <- clamp(H + H~/2) where H~ > 0
//   average     H <- (H + H~) / 2 where H~ > 0
enum class DifficultyUpdate { kAccumulate, kAverage };

std::string_view update_name(DifficultyUpdate u);
DifficultyUpdate parse_update(std::string_view name);

struct TrainerConfig {
  Mode mode = Mode::kWikiR1;
  int iterations = 100;
  int batch_size = 32;
  int n_rollouts = kDefaultRollouts;
  int window = static_cast<int>(kDefaultWindow);
  WindowGranularity window_granularity = WindowGranularity::kBatch;
  bool require_full_window = true;
  double tau = kDefaultTau;
  int max_gap = kDefaultMaxGap;
  int initial_gap = 1;
  double sigma = kDefaultSigma;
  double lambda = kLambdaEvqa;
  double alpha = 0.8;
  int prop_iters = 10;
  double prop_eps = 1e-4;
  int propagation_interval = 1;
  DifficultyUpdate difficulty_update = DifficultyUpdate::kAccumulate;
  int top_m = static_cast<int>(kDefaultTopEdges);
  int chunk_size = static_cast<int>(kDefaultChunkSize);
  int eval_interval = 25;
  double eval_fraction = 0.2;
  int snapshot_interval = 50;
  std::uint64_t seed = 0;
  SimConfig sim;
  int threads = 1;

  void validate() const;
  bool operator==(const TrainerConfig&) const = default;
};

// Flat JSON object; unknown keys are rejected. Missing keys keep defaults
// (or the values in `base`).
TrainerConfig config_from_json(std::string_view json, const TrainerConfig& base = {});
std::string config_to_json(const TrainerConfig& config);

struct IterationRecord {
  int iteration = 0;
  int gap_level = 0;
  std::optional<double> window_mean;
  double zero_adv_fraction = 0.0;
  long long cumulative_ignored = 0;
  std::vector<std::size_t> batch;
  std::optional<double> eval_accuracy;
  bool upgraded = false;
};

struct GroupLogEntry {
  int iteration = 0;
  std::size_t sample_index = 0;
  std::vector<int> rewards;
  bool ignored = false;
};

struct MetricsLog {
  TrainerConfig config;
  std::string corpus_hash;
  std::string index_hash;
  std::string graph_hash;
  std::vector<IterationRecord> records;
  std::vector<GroupLogEntry> groups;
  // (iteration, H snapshot) at each snapshot interval and at the end.
  std::vector<std::pair<int, DifficultyStore>> snapshots;
  // Per-sample mean of every observed reward; unobserved entries flagged.
  ObservationVector observed_means;
  SimPolicy final_policy;
  std::vector<std::size_t> eval_samples;
  double wall_clock_seconds = 0.0;
};

struct EvalConfig {
  std::vector<std::size_t> samples;
  int max_gap = kDefaultMaxGap;
  std::uint64_t seed = 0;
  std::uint64_t round = 0;
};

// Mean exact-match reward over the held-out samples with one rollout each,
// always at the hardest retrieval level.
double evaluate(const PolicyAdapter& policy, const Corpus& corpus, const RankingCache& rankings,
                const EvalConfig& config);

// Deterministic held-out split: (eval samples, training pool), both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_samples(
    std::size_t n, double eval_fraction, std::uint64_t seed);

MetricsLog run_training(const TrainerConfig& config, const Corpus& corpus,
                        const TextIndex& index, const SimilarityGraph& graph,
                        const DifficultySidecar& difficulty);

// Same loop against any policy adapter.
MetricsLog run_training(const TrainerConfig& config, const Corpus& corpus,
                        const TextIndex& index, const SimilarityGraph& graph,
                        PolicyAdapter& policy);

std::string metrics_csv(const MetricsLog& log);
std::string groups_csv(const MetricsLog& log, const Corpus& corpus);
std::string run_json(const MetricsLog& log);

// metrics.csv, groups.csv, run.json and difficulty_snapshots/iter_NNNNNN.csv.
void write_metrics(const MetricsLog& log, const Corpus& corpus,
                   const std::filesystem::path& out_dir);

}  // namespace retcurr
