#include "retcurr/graph.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "retcurr/error.hpp"
#include "retcurr/hash.hpp"
#include "retcurr/parallel.hpp"
#include "retcurr/text.hpp"
#include "retcurr/tfidf.hpp"

namespace retcurr {

using ojson = nlohmann::ordered_json;

namespace {
constexpr std::string_view kGraphFormat = "retcurr-graph/1";
}

ArticleSimilarity ArticleSimilarity::from_corpus(const Corpus& corpus, unsigned threads) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.num_articles());
  for (const auto& a : corpus.articles()) docs.push_back(tokenize(a.text));
  const auto model = TfidfModel::fit(docs);
  std::vector<SparseVector> vecs;
  vecs.reserve(docs.size());
  for (const auto& d : docs) vecs.push_back(model.transform(d));

  ArticleSimilarity sim;
  sim.n_ = docs.size();
  sim.values_.assign(sim.n_ * sim.n_, 0.0);
  parallel_for(sim.n_, threads, [&](std::size_t a) {
    for (std::size_t b = 0; b < sim.n_; ++b) {
      sim.values_[a * sim.n_ + b] = (a == b) ? 1.0 : cosine(vecs[a], vecs[b]);
    }
  });
  return sim;
}

SimilarityGraph build_graph(const ArticleSimilarity& sim,
                            std::span<const std::size_t> gt_article_of_sample, std::size_t m,
                            unsigned threads) {
  require(m >= 1, "build_graph: m must be >= 1");
  const std::size_t n = gt_article_of_sample.size();
  SimilarityGraph g;
  g.top_m = m;
  g.adjacency.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    std::vector<Edge> cand;
    cand.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = sim(gt_article_of_sample[i], gt_article_of_sample[j]);
      if (w > 0.0) cand.push_back({static_cast<std::uint32_t>(j), w});
    }
    auto before = [](const Edge& a, const Edge& b) {
      if (a.weight != b.weight) return a.weight > b.weight;
      return a.target < b.target;
    };
    const std::size_t keep = std::min(m, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      before);
    cand.resize(keep);
    g.adjacency[i] = std::move(cand);
  });
  return g;
}

SimilarityGraph build_graph(const Corpus& corpus, std::size_t m, unsigned threads) {
  const auto sim = ArticleSimilarity::from_corpus(corpus, threads);
  std::vector<std::size_t> gt(corpus.num_samples());
  for (std::size_t s = 0; s < gt.size(); ++s) gt[s] = corpus.gt_article(s);
  auto g = build_graph(sim, gt, m, threads);
  g.corpus_hash = corpus.content_hash();
  return g;
}

SimilarityGraph row_normalize(SimilarityGraph graph) {
  require(!graph.row_normalized, "row_normalize: graph already normalized");
  for (auto& row : graph.adjacency) {
    double sum = 0.0;
    for (const auto& e : row) sum += e.weight;
    if (sum > 0.0) {
      for (auto& e : row) e.weight /= sum;
    }
  }
  graph.row_normalized = true;
  return graph;
}

std::string graph_to_jsonl(const SimilarityGraph& graph) {
  ojson header;
  header["format"] = kGraphFormat;
  header["corpus_hash"] = graph.corpus_hash;
  header["n"] = graph.size();
  header["top_m"] = graph.top_m;
  header["row_normalized"] = graph.row_normalized;
  std::string out = header.dump() + "\n";
  for (std::size_t i = 0; i < graph.size(); ++i) {
    ojson rec;
    rec["node"] = i;
    ojson nbrs = ojson::array();
    for (const auto& e : graph.adjacency[i]) nbrs.push_back({e.target, e.weight});
    rec["neighbors"] = std::move(nbrs);
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

std::string graph_content_hash(const SimilarityGraph& graph) {
  return sha256_hex(graph_to_jsonl(graph));
}

SimilarityGraph graph_from_jsonl(std::string_view jsonl, const Corpus& corpus) {
  SimilarityGraph g;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool have_header = false;
  try {
    while (start < jsonl.size()) {
      std::size_t end = jsonl.find('\n', start);
      if (end == std::string_view::npos) end = jsonl.size();
      const auto line = jsonl.substr(start, end - start);
      start = end + 1;
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.at("format").get<std::string>() != kGraphFormat) {
          fail(ErrorKind::kParse, "graph: unsupported format");
        }
        g.corpus_hash = j.at("corpus_hash").get<std::string>();
        if (g.corpus_hash != corpus.content_hash()) {
          fail(ErrorKind::kHashMismatch,
               fmt::format("graph was built for corpus {} but corpus hash is {}", g.corpus_hash,
                           corpus.content_hash()));
        }
        g.adjacency.resize(j.at("n").get<std::size_t>());
        g.top_m = j.at("top_m").get<std::size_t>();
        g.row_normalized = j.at("row_normalized").get<bool>();
        have_header = true;
        continue;
      }
      const auto node = j.at("node").get<std::size_t>();
      require(node < g.size(), fmt::format("graph:{}: node out of range", line_no));
      for (const auto& e : j.at("neighbors")) {
        const auto target = e.at(0).get<std::uint32_t>();
        require(target < g.size() && target != node,
                fmt::format("graph:{}: invalid neighbor", line_no));
        g.adjacency[node].push_back({target, e.at(1).get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, fmt::format("graph:{}: {}", line_no, e.what()));
  }
  require(have_header, "graph: missing header line");
  require(g.size() == corpus.num_samples(), "graph: node count differs from corpus samples");
  return g;
}

void save_graph(const std::filesystem::path& path, const SimilarityGraph& graph) {
  write_file(path, graph_to_jsonl(graph));
}

SimilarityGraph load_graph(const std::filesystem::path& path, const Corpus& corpus) {
  return graph_from_jsonl(read_file(path), corpus);
}

// ---------------------------------------------------------------------------
// Propagation

void ObservationVector::observe(std::size_t i, double value) {
  require(i < values.size(), "observation index out of range");
  require(value >= 0.0 && value <= 1.0, "observed value must be in [0,1]");
  values[i] = value;
  observed[i] = true;
}

void PropagationConfig::validate() const {
  require(alpha >= 0.0 && alpha < 1.0, "propagation alpha must be in [0,1)");
  require(max_iters >= 1, "propagation max_iters must be >= 1");
  require(epsilon > 0.0, "propagation epsilon must be > 0");
}

namespace {

void check_inputs(const SimilarityGraph& graph, const ObservationVector& obs) {
  require(graph.row_normalized, "propagate: graph must be row-normalized");
  require(obs.values.size() == graph.size() && obs.observed.size() == graph.size(),
          fmt::format("propagate: observation length {} differs from graph size {}",
                      obs.values.size(), graph.size()));
}

}  // namespace

PropagationResult propagate(const SimilarityGraph& graph, const ObservationVector& obs,
                            const PropagationConfig& cfg) {
  cfg.validate();
  check_inputs(graph, obs);
  const std::size_t n = graph.size();
  const auto& base = obs.values;

  PropagationResult out;
  std::vector<double> pred = base;
  std::vector<double> next(n);
  for (int t = 1; t <= cfg.max_iters; ++t) {
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& e : graph.adjacency[i]) acc += e.weight * pred[e.target];
      next[i] = cfg.alpha * acc + (1.0 - cfg.alpha) * base[i];
      residual = std::max(residual, std::abs(next[i] - pred[i]));
    }
    out.iterations = t;
    out.residuals.push_back(residual);
    if (residual < cfg.epsilon) {
      out.converged = true;
      break;
    }
    pred.swap(next);
  }
  for (double& v : pred) v = std::clamp(v, 0.0, 1.0);
  out.values = std::move(pred);
  return out;
}

std::vector<double> fixed_point_oracle(const SimilarityGraph& graph,
                                       const ObservationVector& obs, double alpha) {
  require(alpha >= 0.0 && alpha < 1.0, "fixed_point_oracle: alpha must be in [0,1)");
  check_inputs(graph, obs);
  const auto n = static_cast<Eigen::Index>(graph.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& e : graph.adjacency[static_cast<std::size_t>(i)]) {
      system(i, static_cast<Eigen::Index>(e.target)) -= alpha * e.weight;
    }
  }
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs(i) = (1.0 - alpha) * obs.values[static_cast<std::size_t>(i)];
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  if (n > 0 && !(lu.rcond() > 1e-14)) {
    fail(ErrorKind::kValidation, "fixed_point_oracle: system is singular");
  }
  const Eigen::VectorXd x = n > 0 ? Eigen::VectorXd(lu.solve(rhs)) : Eigen::VectorXd();
  return {x.data(), x.data() + x.size()};
}

std::vector<double> predict_unobserved(const SimilarityGraph& graph,
                                       const ObservationVector& obs,
                                       const PropagationConfig& cfg) {
  const auto values = propagate(graph, obs, cfg).values;
  ObservationVector mask = ObservationVector::empty(obs.size());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs.observed[i]) {
      mask.observe(i, 1.0);
      sum += obs.values[i];
      ++count;
    }
  }
  const double fallback = count > 0 ? sum / static_cast<double>(count) : 0.0;
  const auto mass = propagate(graph, mask, cfg).values;
  std::vector<double> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs.observed[i]) {
      out[i] = obs.values[i];
    } else if (mass[i] > 1e-12) {
      out[i] = std::clamp(values[i] / mass[i], 0.0, 1.0);
    } else {
      out[i] = fallback;
    }
  }
  return out;
}

}  // namespace retcurr
