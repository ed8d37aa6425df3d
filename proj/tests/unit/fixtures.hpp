#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "retcurr/corpus.hpp"
#include "retcurr/graph.hpp"

namespace fixtures {

inline std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

inline std::vector<double> axis(std::size_t dim, std::size_t i) {
  std::vector<double> v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

inline retcurr::Article article(std::string id, std::string text, std::vector<double> vec) {
  return {std::move(id), "", std::move(text), std::move(vec)};
}

inline retcurr::VqaSample sample(std::string id, std::string question, std::string answer,
                                 std::string gt, std::vector<double> vec) {
  return {std::move(id), std::move(question), std::move(answer), std::move(gt), std::move(vec),
          std::nullopt};
}

inline retcurr::SynthSpec small_spec(std::uint64_t seed = 1) {
  retcurr::SynthSpec s;
  s.n_topics = 3;
  s.articles_per_topic = 4;
  s.samples_per_article = 2;
  s.vocab_size = 600;
  s.topic_vocab_overlap = 0.8;
  s.difficulty_lo = 0.3;
  s.difficulty_hi = 0.7;
  s.vec_dim = 16;
  s.seed = seed;
  s.article_min_tokens = 40;
  s.article_max_tokens = 600;
  s.query_vec_noise = 1.0;
  return s;
}

// Dense random row-stochastic graph with no self loops.
inline retcurr::SimilarityGraph random_stochastic_graph(std::size_t n, double density,
                                                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  retcurr::SimilarityGraph g;
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && u(rng) < density) {
        g.adjacency[i].push_back({static_cast<std::uint32_t>(j), u(rng) + 1e-3});
      }
    }
  }
  return retcurr::row_normalize(std::move(g));
}

inline retcurr::ObservationVector random_observations(std::size_t n, double fraction,
                                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto obs = retcurr::ObservationVector::empty(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (u(rng) < fraction) obs.observe(i, u(rng));
  }
  return obs;
}

}  // namespace fixtures
