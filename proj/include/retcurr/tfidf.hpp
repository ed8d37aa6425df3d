#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace retcurr {

using TermId = std::uint32_t;

// L2-normalized sparse vector, entries sorted by term id.
struct SparseVector {
  std::vector<std::pair<TermId, double>> entries;
};

// Counts of each term in one document, sorted by term id.
using TermCounts = std::vector<std::pair<TermId, std::uint32_t>>;

// Smoothed TF-IDF: weight = count * (ln((1 + N) / (1 + df)) + 1), then L2
// normalized. Term ids follow lexicographic term order so every derived value
// is independent of document order.
class TfidfModel {
 public:
  TfidfModel() = default;

  static TfidfModel fit(const std::vector<std::vector<std::string>>& docs);
  // Rebuilds a model from persisted statistics.
  static TfidfModel from_stats(std::vector<std::string> terms, std::vector<std::size_t> df,
                               std::size_t n_docs);

  TermCounts count(const std::vector<std::string>& tokens) const;
  SparseVector weigh(const TermCounts& counts) const;
  SparseVector transform(const std::vector<std::string>& tokens) const {
    return weigh(count(tokens));
  }

  std::size_t num_docs() const { return n_docs_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }
  double idf(TermId id) const { return idf_[id]; }

 private:
  std::size_t n_docs_ = 0;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::unordered_map<std::string, TermId> lookup_;
};

// Dot product of two normalized vectors, clamped to [0, 1].
double cosine(const SparseVector& a, const SparseVector& b);

}  // namespace retcurr
