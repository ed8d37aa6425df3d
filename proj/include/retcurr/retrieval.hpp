#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retcurr/corpus.hpp"
#include "retcurr/tfidf.hpp"

namespace retcurr {

// Reference fusion weights for the two benchmark profiles.
inline constexpr double kLambdaEvqa = 0.985;
inline constexpr double kLambdaInfoseek = 0.997;

inline constexpr double kVisualUnitTolerance = 1e-4;

// TF-IDF statistics over every passage of every article. Immutable once built.
class TextIndex {
 public:
  struct PassageRef {
    std::size_t article = 0;  // corpus article index
    std::size_t index = 0;    // passage index within the article
  };

  TextIndex() = default;

  static TextIndex build(const Corpus& corpus, std::size_t chunk_size = kDefaultChunkSize);

  std::size_t num_passages() const { return passages_.size(); }
  std::size_t chunk_size() const { return chunk_size_; }
  const std::string& corpus_hash() const { return corpus_hash_; }
  const TfidfModel& model() const { return model_; }
  const std::vector<PassageRef>& passages() const { return passages_; }
  const SparseVector& passage_vector(std::size_t p) const { return vectors_[p]; }

  // [first, last) passage range of an article.
  std::pair<std::size_t, std::size_t> article_passages(std::size_t article) const {
    return {article_offsets_[article], article_offsets_[article + 1]};
  }

  // Deterministic digest of the index content.
  std::string content_hash() const;

  std::string to_json() const;
  // Throws kHashMismatch when the index was built from a different corpus.
  static TextIndex from_json(std::string_view json, const Corpus& corpus);

  void save(const std::filesystem::path& path) const;
  static TextIndex load(const std::filesystem::path& path, const Corpus& corpus);

 private:
  std::size_t chunk_size_ = kDefaultChunkSize;
  std::string corpus_hash_;
  TfidfModel model_;
  std::vector<PassageRef> passages_;
  std::vector<TermCounts> counts_;
  std::vector<SparseVector> vectors_;
  std::vector<std::size_t> article_offsets_{0};
};

// Refuses an index built from another corpus.
void check_index_matches(const TextIndex& index, const Corpus& corpus);

struct RetrievalMod {
  int gap = 0;
  int k = 1;
  bool gamma = true;

  bool operator==(const RetrievalMod&) const = default;
};

struct RetrievedEntry {
  std::string article_id;
  std::size_t passage_index = 0;
  double fused = 0.0;
  double visual = 0.0;
  double textual = 0.0;
  bool injected = false;

  bool operator==(const RetrievedEntry&) const = default;
};

struct RetrievedSet {
  std::vector<RetrievedEntry> entries;
  double lambda = 1.0;

  std::size_t size() const { return entries.size(); }
  bool contains(std::string_view article_id) const;

  bool operator==(const RetrievedSet&) const = default;
};

struct TextScore {
  double score = 0.0;
  std::size_t best_passage = 0;
};

// (cos + 1) / 2 over unit vectors. Rejects inputs whose norm is off by more
// than kVisualUnitTolerance.
double visual_score(std::span<const double> query, std::span<const double> article);

double fuse_scores(double v, double t, double lambda);

// Max TF-IDF cosine between the question and the article's passages.
TextScore text_score(std::string_view question, std::string_view article_id,
                     const Corpus& corpus, const TextIndex& index);

// Every article scored and sorted by fused score descending, ties by article
// id ascending.
std::vector<RetrievedEntry> rank_articles(const VqaSample& sample, const Corpus& corpus,
                                          const TextIndex& index, double lambda);

RetrievedSet retrieve(const VqaSample& sample, int k, const Corpus& corpus,
                      const TextIndex& index, double lambda);

// Maps gap level g in [0, max_gap] to (k, gamma). Level 1 falls between the
// easiest and intermediate clauses and maps to (1, true).
RetrievalMod phi_for_gap(int g, int max_gap);

// Applies (k, gamma) to a full ranking. With gamma the ground-truth entry
// replaces the lowest natural candidate when missing and the set is re-sorted.
RetrievedSet modify_ranking(std::span<const RetrievedEntry> ranking,
                            std::string_view gt_article_id, const RetrievalMod& mod,
                            double lambda);

RetrievedSet apply_modification(const VqaSample& sample, const RetrievalMod& mod,
                                const Corpus& corpus, const TextIndex& index, double lambda);

struct RecallPoint {
  int k = 0;
  double recall = 0.0;
};

std::vector<RecallPoint> recall_at_k(const Corpus& corpus, const TextIndex& index,
                                     double lambda, std::span<const int> ks);
std::string recall_to_csv(std::span<const RecallPoint> table);

// Full rankings for every sample, computed once. Curriculum levels only
// change how a ranking is cut, so the trainer reuses these.
class RankingCache {
 public:
  RankingCache(const Corpus& corpus, const TextIndex& index, double lambda,
               unsigned threads = 1);

  RetrievedSet modified(std::size_t sample, const RetrievalMod& mod) const;
  const std::vector<RetrievedEntry>& ranking(std::size_t sample) const {
    return rankings_[sample];
  }
  double lambda() const { return lambda_; }

 private:
  const Corpus* corpus_;
  double lambda_;
  std::vector<std::vector<RetrievedEntry>> rankings_;
};

}  // namespace retcurr
