#include "retcurr/retrieval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "retcurr/error.hpp"
#include "retcurr/hash.hpp"
#include "retcurr/parallel.hpp"
#include "retcurr/text.hpp"

namespace retcurr {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kIndexFormat = "retcurr-text-index/1";

bool ranks_before(const RetrievedEntry& a, const RetrievedEntry& b) {
  if (a.fused != b.fused) return a.fused > b.fused;
  return a.article_id < b.article_id;
}

}  // namespace

// ---------------------------------------------------------------------------
// TextIndex

TextIndex TextIndex::build(const Corpus& corpus, std::size_t chunk_size) {
  require(chunk_size > 0, "chunk_size must be > 0");
  TextIndex idx;
  idx.chunk_size_ = chunk_size;
  idx.corpus_hash_ = corpus.content_hash();

  std::vector<std::vector<std::string>> docs;
  for (std::size_t a = 0; a < corpus.num_articles(); ++a) {
    const auto tokens = tokenize(corpus.articles()[a].text);
    std::size_t p = 0;
    for (std::size_t begin = 0; begin < tokens.size(); begin += chunk_size, ++p) {
      const std::size_t end = std::min(tokens.size(), begin + chunk_size);
      docs.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                        tokens.begin() + static_cast<std::ptrdiff_t>(end));
      idx.passages_.push_back({a, p});
    }
    idx.article_offsets_.push_back(idx.passages_.size());
  }
  idx.model_ = TfidfModel::fit(docs);
  idx.counts_.reserve(docs.size());
  idx.vectors_.reserve(docs.size());
  for (const auto& doc : docs) {
    idx.counts_.push_back(idx.model_.count(doc));
    idx.vectors_.push_back(idx.model_.weigh(idx.counts_.back()));
  }
  return idx;
}

std::string TextIndex::to_json() const {
  ojson j;
  j["format"] = kIndexFormat;
  j["corpus_hash"] = corpus_hash_;
  j["chunk_size"] = chunk_size_;
  j["n_docs"] = model_.num_docs();
  j["terms"] = model_.terms();
  j["df"] = model_.document_frequency();
  ojson passages = ojson::array();
  for (std::size_t p = 0; p < passages_.size(); ++p) {
    ojson rec;
    rec["article"] = passages_[p].article;
    rec["index"] = passages_[p].index;
    ojson counts = ojson::array();
    for (auto [id, n] : counts_[p]) counts.push_back({id, n});
    rec["counts"] = std::move(counts);
    passages.push_back(std::move(rec));
  }
  j["passages"] = std::move(passages);
  return j.dump();
}

std::string TextIndex::content_hash() const { return sha256_hex(to_json()); }

TextIndex TextIndex::from_json(std::string_view json, const Corpus& corpus) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("text index: ") + e.what());
  }
  TextIndex idx;
  try {
    if (j.at("format").get<std::string>() != kIndexFormat) {
      fail(ErrorKind::kParse, "text index: unsupported format");
    }
    idx.corpus_hash_ = j.at("corpus_hash").get<std::string>();
    if (idx.corpus_hash_ != corpus.content_hash()) {
      fail(ErrorKind::kHashMismatch,
           fmt::format("text index was built for corpus {} but corpus hash is {}",
                       idx.corpus_hash_, corpus.content_hash()));
    }
    idx.chunk_size_ = j.at("chunk_size").get<std::size_t>();
    idx.model_ = TfidfModel::from_stats(j.at("terms").get<std::vector<std::string>>(),
                                        j.at("df").get<std::vector<std::size_t>>(),
                                        j.at("n_docs").get<std::size_t>());
    std::size_t expected_article = 0;
    for (const auto& rec : j.at("passages")) {
      PassageRef ref{rec.at("article").get<std::size_t>(), rec.at("index").get<std::size_t>()};
      require(ref.article < corpus.num_articles(), "text index: passage article out of range");
      while (expected_article < ref.article) {
        idx.article_offsets_.push_back(idx.passages_.size());
        ++expected_article;
      }
      TermCounts counts;
      for (const auto& c : rec.at("counts")) {
        counts.emplace_back(c.at(0).get<TermId>(), c.at(1).get<std::uint32_t>());
      }
      idx.passages_.push_back(ref);
      idx.vectors_.push_back(idx.model_.weigh(counts));
      idx.counts_.push_back(std::move(counts));
    }
    while (idx.article_offsets_.size() < corpus.num_articles() + 1) {
      idx.article_offsets_.push_back(idx.passages_.size());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("text index: ") + e.what());
  }
  return idx;
}

void TextIndex::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

TextIndex TextIndex::load(const std::filesystem::path& path, const Corpus& corpus) {
  return from_json(read_file(path), corpus);
}

void check_index_matches(const TextIndex& index, const Corpus& corpus) {
  if (index.corpus_hash() != corpus.content_hash()) {
    fail(ErrorKind::kHashMismatch, "text index does not match corpus (hash " +
                                       index.corpus_hash() + " vs " + corpus.content_hash() + ")");
  }
}

// ---------------------------------------------------------------------------
// Scoring

bool RetrievedSet::contains(std::string_view article_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const RetrievedEntry& e) { return e.article_id == article_id; });
}

double visual_score(std::span<const double> query, std::span<const double> article) {
  require(query.size() == article.size(), "visual_score: dimension mismatch");
  double qq = 0.0, aa = 0.0, qa = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) {
    qq += query[i] * query[i];
    aa += article[i] * article[i];
    qa += query[i] * article[i];
  }
  require(std::abs(std::sqrt(qq) - 1.0) <= kVisualUnitTolerance &&
              std::abs(std::sqrt(aa) - 1.0) <= kVisualUnitTolerance,
          "visual_score: inputs must be unit vectors");
  return (std::clamp(qa, -1.0, 1.0) + 1.0) / 2.0;
}

double fuse_scores(double v, double t, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, fmt::format("lambda {} outside [0,1]", lambda));
  require(v >= 0.0 && v <= 1.0, "visual score outside [0,1]");
  require(t >= 0.0, "textual score must be >= 0");
  return lambda * v + (1.0 - lambda) * t;
}

namespace {

TextScore best_passage(const SparseVector& query, std::size_t article, const TextIndex& index) {
  TextScore best;
  const auto [first, last] = index.article_passages(article);
  for (std::size_t p = first; p < last; ++p) {
    const double s = cosine(query, index.passage_vector(p));
    if (p == first || s > best.score) {
      best.score = s;
      best.best_passage = index.passages()[p].index;
    }
  }
  return best;
}

}  // namespace

TextScore text_score(std::string_view question, std::string_view article_id,
                     const Corpus& corpus, const TextIndex& index) {
  check_index_matches(index, corpus);
  const auto article = corpus.find_article(article_id);
  if (!article) fail(ErrorKind::kValidation, "text_score: unknown article " + std::string(article_id));
  return best_passage(index.model().transform(tokenize(question)), *article, index);
}

std::vector<RetrievedEntry> rank_articles(const VqaSample& sample, const Corpus& corpus,
                                          const TextIndex& index, double lambda) {
  check_index_matches(index, corpus);
  require(lambda >= 0.0 && lambda <= 1.0, fmt::format("lambda {} outside [0,1]", lambda));
  const SparseVector query = index.model().transform(tokenize(sample.question));
  std::vector<RetrievedEntry> out;
  out.reserve(corpus.num_articles());
  for (std::size_t a = 0; a < corpus.num_articles(); ++a) {
    const Article& art = corpus.articles()[a];
    const TextScore t = best_passage(query, a, index);
    RetrievedEntry e;
    e.article_id = art.id;
    e.passage_index = t.best_passage;
    e.visual = visual_score(sample.query_image_vec, art.image_vec);
    e.textual = t.score;
    e.fused = fuse_scores(e.visual, e.textual, lambda);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

RetrievedSet retrieve(const VqaSample& sample, int k, const Corpus& corpus,
                      const TextIndex& index, double lambda) {
  require(k >= 1, "retrieve: k must be >= 1");
  require(static_cast<std::size_t>(k) <= corpus.num_articles(),
          fmt::format("retrieve: k={} exceeds corpus size {}", k, corpus.num_articles()));
  auto ranking = rank_articles(sample, corpus, index, lambda);
  ranking.resize(static_cast<std::size_t>(k));
  return {std::move(ranking), lambda};
}

RetrievalMod phi_for_gap(int g, int max_gap) {
  require(max_gap >= 2, "phi_for_gap: G must be >= 2");
  require(g >= 0 && g <= max_gap, fmt::format("phi_for_gap: g={} outside [0,{}]", g, max_gap));
  if (g == 0) return {0, 1, true};
  if (g == max_gap) return {g, max_gap - 1, false};
  return {g, g, true};
}

RetrievedSet modify_ranking(std::span<const RetrievedEntry> ranking,
                            std::string_view gt_article_id, const RetrievalMod& mod,
                            double lambda) {
  require(mod.k >= 1, "retrieval modification: k must be >= 1");
  require(static_cast<std::size_t>(mod.k) <= ranking.size(),
          fmt::format("retrieval modification: k={} exceeds corpus size {}", mod.k,
                      ranking.size()));
  RetrievedSet out;
  out.lambda = lambda;
  out.entries.assign(ranking.begin(), ranking.begin() + mod.k);
  if (mod.gamma && !out.contains(gt_article_id)) {
    auto gt = std::find_if(ranking.begin(), ranking.end(), [&](const RetrievedEntry& e) {
      return e.article_id == gt_article_id;
    });
    require(gt != ranking.end(), "ground-truth article missing from ranking");
    out.entries.back() = *gt;
    out.entries.back().injected = true;
    std::sort(out.entries.begin(), out.entries.end(), ranks_before);
  }
  return out;
}

RetrievedSet apply_modification(const VqaSample& sample, const RetrievalMod& mod,
                                const Corpus& corpus, const TextIndex& index, double lambda) {
  const auto ranking = rank_articles(sample, corpus, index, lambda);
  return modify_ranking(ranking, sample.gt_article_id, mod, lambda);
}

std::vector<RecallPoint> recall_at_k(const Corpus& corpus, const TextIndex& index,
                                     double lambda, std::span<const int> ks) {
  require(corpus.num_samples() > 0, "recall_at_k: corpus has no samples");
  require(!ks.empty(), "recall_at_k: empty K list");
  for (int k : ks) {
    require(k >= 1 && static_cast<std::size_t>(k) <= corpus.num_articles(),
            fmt::format("recall_at_k: K={} outside [1,{}]", k, corpus.num_articles()));
  }
  std::vector<std::size_t> gt_rank(corpus.num_samples());
  for (std::size_t s = 0; s < corpus.num_samples(); ++s) {
    const auto& sample = corpus.samples()[s];
    const auto ranking = rank_articles(sample, corpus, index, lambda);
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (ranking[r].article_id == sample.gt_article_id) {
        gt_rank[s] = r;
        break;
      }
    }
  }
  std::vector<RecallPoint> out;
  for (int k : ks) {
    const auto hits = std::count_if(gt_rank.begin(), gt_rank.end(), [k](std::size_t r) {
      return r < static_cast<std::size_t>(k);
    });
    out.push_back({k, static_cast<double>(hits) / static_cast<double>(gt_rank.size())});
  }
  return out;
}

std::string recall_to_csv(std::span<const RecallPoint> table) {
  std::string out = "K,recall\n";
  for (const auto& p : table) out += fmt::format("{},{:.6f}\n", p.k, p.recall);
  return out;
}

RankingCache::RankingCache(const Corpus& corpus, const TextIndex& index, double lambda,
                           unsigned threads)
    : corpus_(&corpus), lambda_(lambda), rankings_(corpus.num_samples()) {
  check_index_matches(index, corpus);
  parallel_for(corpus.num_samples(), threads, [&](std::size_t s) {
    rankings_[s] = rank_articles(corpus.samples()[s], corpus, index, lambda);
  });
}

RetrievedSet RankingCache::modified(std::size_t sample, const RetrievalMod& mod) const {
  return modify_ranking(rankings_[sample], corpus_->samples()[sample].gt_article_id, mod,
                        lambda_);
}

}  // namespace retcurr
