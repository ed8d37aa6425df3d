#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retcurr/corpus.hpp"

namespace retcurr {

inline constexpr std::size_t kDefaultTopEdges = 100;

// Dense cosine similarity between article TF-IDF vectors (one document per
// article). Self-similarity is exactly 1.
class ArticleSimilarity {
 public:
  static ArticleSimilarity from_corpus(const Corpus& corpus, unsigned threads = 1);

  std::size_t size() const { return n_; }
  double operator()(std::size_t a, std::size_t b) const { return values_[a * n_ + b]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

struct Edge {
  std::uint32_t target = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

// Directed sparse graph over samples, index-aligned with corpus samples.
struct SimilarityGraph {
  std::vector<std::vector<Edge>> adjacency;
  std::size_t top_m = kDefaultTopEdges;
  bool row_normalized = false;
  std::string corpus_hash;

  std::size_t size() const { return adjacency.size(); }
  bool operator==(const SimilarityGraph&) const = default;
};

// Keeps, per sample, the m most similar other samples by gt-article
// similarity (ties by ascending sample index). Zero-weight pairs are dropped.
SimilarityGraph build_graph(const Corpus& corpus, std::size_t m = kDefaultTopEdges,
                            unsigned threads = 1);
SimilarityGraph build_graph(const ArticleSimilarity& sim,
                            std::span<const std::size_t> gt_article_of_sample, std::size_t m,
                            unsigned threads = 1);

// Divides each row by its sum. All-zero rows stay empty.
SimilarityGraph row_normalize(SimilarityGraph graph);

std::string graph_to_jsonl(const SimilarityGraph& graph);
SimilarityGraph graph_from_jsonl(std::string_view jsonl, const Corpus& corpus);
void save_graph(const std::filesystem::path& path, const SimilarityGraph& graph);
SimilarityGraph load_graph(const std::filesystem::path& path, const Corpus& corpus);
std::string graph_content_hash(const SimilarityGraph& graph);

struct ObservationVector {
  std::vector<double> values;  // 0 where unobserved
  std::vector<bool> observed;

  static ObservationVector empty(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<bool>(n, false)};
  }
  void observe(std::size_t i, double value);
  std::size_t size() const { return values.size(); }
};

struct PropagationConfig {
  double alpha = 0.8;
  int max_iters = 10;
  double epsilon = 1e-4;

  void validate() const;
};

struct PropagationResult {
  std::vector<double> values;
  int iterations = 0;
  // Infinity-norm step size of each iteration, in order.
  std::vector<double> residuals;
  bool converged = false;
};

// Iterates A_new = alpha * K * A_pred + (1 - alpha) * A from A_pred = A and
// stops once the step falls below epsilon or after max_iters. On
// convergence the last accepted iterate is returned, as in the reference
// loop (the sub-epsilon step is not applied).
PropagationResult propagate(const SimilarityGraph& graph, const ObservationVector& obs,
                            const PropagationConfig& cfg);

// Exact solution of (I - alpha K) A* = (1 - alpha) A by dense LU.
std::vector<double> fixed_point_oracle(const SimilarityGraph& graph,
                                       const ObservationVector& obs, double alpha);

// Estimates for unobserved nodes as propagated value over propagated
// observation mass. Nodes the observations never reach fall back to the mean
// observed value.
std::vector<double> predict_unobserved(const SimilarityGraph& graph,
                                       const ObservationVector& obs,
                                       const PropagationConfig& cfg);

}  // namespace retcurr
