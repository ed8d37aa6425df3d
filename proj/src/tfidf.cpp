#include "retcurr/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "retcurr/error.hpp"

namespace retcurr {

TfidfModel TfidfModel::fit(const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::vector<std::string> uniq(doc.begin(), doc.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto& term : uniq) ++df[term];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> freq;
  terms.reserve(df.size());
  freq.reserve(df.size());
  for (auto& [term, n] : df) {
    terms.push_back(term);
    freq.push_back(n);
  }
  return from_stats(std::move(terms), std::move(freq), docs.size());
}

TfidfModel TfidfModel::from_stats(std::vector<std::string> terms, std::vector<std::size_t> df,
                                  std::size_t n_docs) {
  require(terms.size() == df.size(), "tfidf: terms/df size mismatch");
  require(std::is_sorted(terms.begin(), terms.end()), "tfidf: terms must be sorted");
  TfidfModel m;
  m.n_docs_ = n_docs;
  m.terms_ = std::move(terms);
  m.df_ = std::move(df);
  m.idf_.resize(m.terms_.size());
  for (std::size_t i = 0; i < m.terms_.size(); ++i) {
    m.idf_[i] = std::log((1.0 + static_cast<double>(n_docs)) /
                         (1.0 + static_cast<double>(m.df_[i]))) +
                1.0;
    m.lookup_.emplace(m.terms_[i], static_cast<TermId>(i));
  }
  return m;
}

TermCounts TfidfModel::count(const std::vector<std::string>& tokens) const {
  std::vector<TermId> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    if (auto it = lookup_.find(tok); it != lookup_.end()) ids.push_back(it->second);
  }
  std::sort(ids.begin(), ids.end());
  TermCounts out;
  for (TermId id : ids) {
    if (!out.empty() && out.back().first == id) {
      ++out.back().second;
    } else {
      out.emplace_back(id, 1);
    }
  }
  return out;
}

SparseVector TfidfModel::weigh(const TermCounts& counts) const {
  SparseVector v;
  v.entries.reserve(counts.size());
  double sq = 0.0;
  for (auto [id, n] : counts) {
    const double w = static_cast<double>(n) * idf_[id];
    v.entries.emplace_back(id, w);
    sq += w * w;
  }
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& e : v.entries) e.second *= inv;
  }
  return v;
}

double cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(dot, 0.0, 1.0);
}

}  // namespace retcurr
