#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "retcurr/corpus.hpp"
#include "retcurr/error.hpp"
#include "retcurr/graph.hpp"
#include "retcurr/retrieval.hpp"
#include "retcurr/rl.hpp"
#include "retcurr/trainer.hpp"

namespace py = pybind11;
using namespace retcurr;

namespace {

struct CorpusHandle {
  Corpus corpus;
  DifficultySidecar difficulty;
};

SimilarityGraph graph_from_lists(const std::vector<std::vector<std::pair<std::uint32_t, double>>>& adj,
                                 bool row_normalized) {
  SimilarityGraph g;
  g.adjacency.resize(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (const auto& [j, w] : adj[i]) {
      require(j < adj.size(), "edge target out of range");
      g.adjacency[i].push_back({j, w});
    }
  }
  g.row_normalized = row_normalized;
  return row_normalized ? g : row_normalize(std::move(g));
}

ObservationVector observations(const std::vector<std::optional<double>>& values) {
  auto obs = ObservationVector::empty(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) obs.observe(i, *values[i]);
  }
  return obs;
}

py::list records(const MetricsLog& log) {
  py::list out;
  for (const auto& r : log.records) {
    py::dict d;
    d["iteration"] = r.iteration;
    d["g"] = r.gap_level;
    d["window_mean"] = r.window_mean;
    d["zero_adv_fraction"] = r.zero_adv_fraction;
    d["cumulative_ignored"] = r.cumulative_ignored;
    d["upgraded"] = r.upgraded;
    d["eval_accuracy"] = r.eval_accuracy;
    out.append(std::move(d));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Retrieval-difficulty curriculum engine";

  static py::exception<Error> hash_error(m, "HashMismatchError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kIo: PyErr_SetString(PyExc_OSError, e.what()); break;
        case ErrorKind::kHashMismatch: hash_error(e.what()); break;
        default: PyErr_SetString(PyExc_ValueError, e.what()); break;
      }
    }
  });

  py::class_<CorpusHandle>(m, "Corpus")
      .def_property_readonly("num_articles", [](const CorpusHandle& c) { return c.corpus.num_articles(); })
      .def_property_readonly("num_samples", [](const CorpusHandle& c) { return c.corpus.num_samples(); })
      .def_property_readonly("content_hash", [](const CorpusHandle& c) { return c.corpus.content_hash(); })
      .def_property_readonly("difficulty", [](const CorpusHandle& c) { return c.difficulty; })
      .def("sample_ids", [](const CorpusHandle& c) {
        std::vector<std::string> ids;
        for (const auto& s : c.corpus.samples()) ids.push_back(s.id);
        return ids;
      })
      .def("write", [](const CorpusHandle& c, const std::filesystem::path& dir) {
        write_corpus_dir(dir, c.corpus, c.difficulty.empty() ? nullptr : &c.difficulty);
      }, py::arg("dir"));

  m.def("generate_corpus", [](const std::string& spec_json) {
    auto synth = generate_synthetic_corpus(synth_spec_from_json(spec_json));
    return CorpusHandle{std::move(synth.corpus), std::move(synth.base_difficulty)};
  }, py::arg("spec_json") = "{}", "Generate a synthetic corpus from a JSON spec.");

  m.def("load_corpus", [](const std::filesystem::path& dir) {
    CorpusHandle h{load_corpus_dir(dir), {}};
    const auto diff = dir / CorpusFiles::kDifficulty;
    if (std::filesystem::exists(diff)) h.difficulty = load_difficulty(diff, h.corpus);
    return h;
  }, py::arg("dir"));

  py::class_<TextIndex>(m, "TextIndex")
      .def_static("build", [](const CorpusHandle& c, std::size_t chunk) {
        return TextIndex::build(c.corpus, chunk);
      }, py::arg("corpus"), py::arg("chunk_size") = kDefaultChunkSize)
      .def_property_readonly("num_passages", &TextIndex::num_passages)
      .def_property_readonly("content_hash", &TextIndex::content_hash);

  m.def("recall_at_k", [](const CorpusHandle& c, const TextIndex& index, double lambda,
                          const std::vector<int>& ks) {
    std::vector<std::pair<int, double>> out;
    for (const auto& p : recall_at_k(c.corpus, index, lambda, ks)) out.emplace_back(p.k, p.recall);
    return out;
  }, py::arg("corpus"), py::arg("index"), py::arg("lambda_") = kLambdaEvqa,
     py::arg("ks") = std::vector<int>{1, 5, 10, 20});

  m.def("phi_for_gap", [](int g, int max_gap) {
    const auto mod = phi_for_gap(g, max_gap);
    return std::make_pair(mod.k, mod.gamma);
  }, py::arg("g"), py::arg("max_gap") = kDefaultMaxGap, "(k, gamma) for gap level g.");

  m.def("compute_advantages", [](const std::vector<int>& rewards) {
    const auto a = compute_advantages(rewards);
    return std::make_pair(a.values, a.ignored);
  }, py::arg("rewards"));

  m.def("propagate", [](const std::vector<std::vector<std::pair<std::uint32_t, double>>>& adjacency,
                        const std::vector<std::optional<double>>& observed, double alpha,
                        int max_iters, double epsilon, bool row_normalized) {
    const auto g = graph_from_lists(adjacency, row_normalized);
    const auto r = propagate(g, observations(observed), {alpha, max_iters, epsilon});
    return py::make_tuple(r.values, r.residuals, r.converged);
  }, py::arg("adjacency"), py::arg("observed"), py::arg("alpha") = 0.8, py::arg("max_iters") = 10,
     py::arg("epsilon") = 1e-4, py::arg("row_normalized") = false,
     "Label propagation over an adjacency list of (target, weight) pairs. "
     "Unobserved entries are None. Returns (values, residuals, converged).");

  py::class_<MetricsLog>(m, "Run")
      .def_property_readonly("records", &records)
      .def_property_readonly("cumulative_ignored", [](const MetricsLog& log) {
        return log.records.empty() ? 0LL : log.records.back().cumulative_ignored;
      })
      .def("metrics_csv", &metrics_csv)
      .def("run_json", &run_json);

  m.def("train", [](const CorpusHandle& c, const std::string& config_json,
                    const std::optional<std::filesystem::path>& out_dir) {
    const auto cfg = config_from_json(config_json);
    require(!c.difficulty.empty(), "corpus has no difficulty sidecar");
    MetricsLog log;
    {
      py::gil_scoped_release release;
      const auto index = TextIndex::build(c.corpus, static_cast<std::size_t>(cfg.chunk_size));
      const auto graph = build_graph(c.corpus, static_cast<std::size_t>(cfg.top_m),
                                     static_cast<unsigned>(cfg.threads));
      log = run_training(cfg, c.corpus, index, graph, c.difficulty);
      if (out_dir) write_metrics(log, c.corpus, *out_dir);
    }
    return log;
  }, py::arg("corpus"), py::arg("config_json") = "{}", py::arg("out_dir") = py::none(),
     "Run the training loop; index and graph are built in memory.");
}
