#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "retcurr/corpus.hpp"
#include "retcurr/error.hpp"
#include "retcurr/graph.hpp"
#include "retcurr/report.hpp"
#include "retcurr/retrieval.hpp"
#include "retcurr/trainer.hpp"

namespace fs = std::filesystem;
using namespace retcurr;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitHash = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kHashMismatch: return kExitHash;
    default: return kExitValidation;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) fail(ErrorKind::kIo, "no such file: " + p.string());
}

// Output must not land inside an input directory.
void refuse_inside(const fs::path& out, const fs::path& input_dir) {
  const auto a = fs::weakly_canonical(out);
  const auto b = fs::weakly_canonical(input_dir);
  auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  require(ib != b.end(), "output " + out.string() + " is inside input directory " +
                             input_dir.string());
}

std::vector<int> parse_ks(const std::string& list) {
  std::vector<int> ks;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      require(used == item.size(), "");
      ks.push_back(k);
    } catch (const std::exception&) {
      fail(ErrorKind::kValidation, "--ks: not an integer: '" + item + "'");
    }
  }
  require(!ks.empty(), "--ks: empty list");
  return ks;
}

TextIndex obtain_index(const Corpus& corpus, const std::optional<fs::path>& path,
                       std::size_t chunk) {
  if (path) {
    require_file(*path);
    return TextIndex::load(*path, corpus);
  }
  return TextIndex::build(corpus, chunk);
}

void emit(const std::optional<fs::path>& out, const std::string& text) {
  if (out) {
    if (out->has_parent_path()) ensure_dir(out->parent_path());
    write_file(*out, text);
  } else {
    std::cout << text;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-difficulty curriculum RL engine"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all");
  unsigned threads = 1;
  app.add_option("--threads", threads, "Cap on internal parallelism")
      ->check(CLI::PositiveNumber);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  fs::path gen_spec, gen_out;
  gen->add_option("--spec", gen_spec, "SynthSpec JSON file")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // build-index
  auto* bidx = app.add_subcommand("build-index", "Build the passage TF-IDF index");
  fs::path bidx_corpus, bidx_out;
  std::size_t bidx_chunk = kDefaultChunkSize;
  bidx->add_option("--corpus", bidx_corpus, "Corpus directory")->required();
  bidx->add_option("--out", bidx_out, "Index file")->required();
  bidx->add_option("--chunk-size", bidx_chunk, "Passage length in tokens")
      ->check(CLI::PositiveNumber);

  // build-graph
  auto* bgraph = app.add_subcommand("build-graph", "Build the sample similarity graph");
  fs::path bgraph_corpus, bgraph_out;
  std::size_t bgraph_m = kDefaultTopEdges;
  bgraph->add_option("--corpus", bgraph_corpus, "Corpus directory")->required();
  bgraph->add_option("--out", bgraph_out, "Graph file")->required();
  bgraph->add_option("--top-m", bgraph_m, "Edges kept per sample")->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Run the training loop");
  fs::path train_corpus, train_out;
  std::optional<fs::path> train_config, train_index, train_graph, train_difficulty;
  std::optional<std::string> o_mode;
  std::optional<std::uint64_t> o_seed;
  std::optional<int> o_iterations, o_batch, o_rollouts, o_w, o_G, o_eval_interval;
  std::optional<double> o_tau, o_sigma, o_lambda, o_alpha;
  train->add_option("--config", train_config, "Flat JSON trainer config");
  train->add_option("--corpus", train_corpus, "Corpus directory")->required();
  train->add_option("--out", train_out, "Run output directory")->required();
  train->add_option("--index", train_index, "Prebuilt index (built in memory if absent)");
  train->add_option("--graph", train_graph, "Prebuilt graph (built in memory if absent)");
  train->add_option("--difficulty", train_difficulty,
                    "Difficulty sidecar (default <corpus>/difficulty.jsonl)");
  train->add_option("--mode", o_mode, "wiki_r1 | vanilla | data_only | sampling_only");
  train->add_option("--seed", o_seed);
  train->add_option("--iterations", o_iterations);
  train->add_option("--batch-size", o_batch);
  train->add_option("--n-rollouts", o_rollouts);
  train->add_option("--w", o_w, "Sliding window size");
  train->add_option("--tau", o_tau, "Upgrade threshold");
  train->add_option("--G", o_G, "Maximum gap level");
  train->add_option("--sigma", o_sigma);
  train->add_option("--lambda", o_lambda, "Score fusion weight");
  train->add_option("--alpha", o_alpha, "Propagation alpha");
  train->add_option("--eval-interval", o_eval_interval);

  // eval-retrieval
  auto* evr = app.add_subcommand("eval-retrieval", "Recall@K of the fused retriever");
  fs::path evr_corpus;
  std::optional<fs::path> evr_index, evr_out;
  double evr_lambda = kLambdaEvqa;
  std::string evr_ks = "1,5,10,20";
  evr->add_option("--corpus", evr_corpus, "Corpus directory")->required();
  evr->add_option("--index", evr_index, "Prebuilt index (built in memory if absent)");
  evr->add_option("--lambda", evr_lambda, "Score fusion weight");
  evr->add_option("--ks", evr_ks, "Comma-separated K values");
  evr->add_option("--out", evr_out, "CSV file (stdout if absent)");

  // report
  auto* rep = app.add_subcommand("report", "Compare training runs");
  fs::path rep_run;
  std::vector<fs::path> rep_compare;
  std::optional<fs::path> rep_out;
  rep->add_option("--run", rep_run, "Run directory")->required();
  rep->add_option("--compare", rep_compare, "Further run directories");
  rep->add_option("--out", rep_out,
                  "Directory for report.csv and summary.json (stdout if absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      require_file(gen_spec);
      const auto spec = synth_spec_from_json(read_file(gen_spec));
      const auto synth = generate_synthetic_corpus(spec);
      write_corpus_dir(gen_out, synth.corpus, &synth.base_difficulty);
      fmt::print("corpus {} articles={} samples={}\n", synth.corpus.content_hash(),
                 synth.corpus.num_articles(), synth.corpus.num_samples());
    } else if (*bidx) {
      refuse_inside(bidx_out, bidx_corpus);
      const auto corpus = load_corpus_dir(bidx_corpus);
      const auto index = TextIndex::build(corpus, bidx_chunk);
      if (bidx_out.has_parent_path()) ensure_dir(bidx_out.parent_path());
      index.save(bidx_out);
      fmt::print("index {} passages={}\n", index.content_hash(), index.num_passages());
    } else if (*bgraph) {
      refuse_inside(bgraph_out, bgraph_corpus);
      const auto corpus = load_corpus_dir(bgraph_corpus);
      const auto graph = build_graph(corpus, bgraph_m, threads);
      if (bgraph_out.has_parent_path()) ensure_dir(bgraph_out.parent_path());
      save_graph(bgraph_out, graph);
      fmt::print("graph {} nodes={}\n", graph_content_hash(graph), graph.size());
    } else if (*train) {
      refuse_inside(train_out, train_corpus);
      TrainerConfig cfg;
      if (train_config) {
        require_file(*train_config);
        cfg = config_from_json(read_file(*train_config));
      }
      if (o_mode) cfg.mode = parse_mode(*o_mode);
      if (o_seed) cfg.seed = *o_seed;
      if (o_iterations) cfg.iterations = *o_iterations;
      if (o_batch) cfg.batch_size = *o_batch;
      if (o_rollouts) cfg.n_rollouts = *o_rollouts;
      if (o_w) cfg.window = *o_w;
      if (o_tau) cfg.tau = *o_tau;
      if (o_G) cfg.max_gap = *o_G;
      if (o_sigma) cfg.sigma = *o_sigma;
      if (o_lambda) cfg.lambda = *o_lambda;
      if (o_alpha) cfg.alpha = *o_alpha;
      if (o_eval_interval) cfg.eval_interval = *o_eval_interval;
      if (app.count("--threads")) cfg.threads = static_cast<int>(threads);
      cfg.validate();

      const auto corpus = load_corpus_dir(train_corpus);
      const fs::path diff_path =
          train_difficulty.value_or(train_corpus / CorpusFiles::kDifficulty);
      require_file(diff_path);
      const auto difficulty = load_difficulty(diff_path, corpus);
      const auto index =
          obtain_index(corpus, train_index, static_cast<std::size_t>(cfg.chunk_size));
      SimilarityGraph graph;
      if (train_graph) {
        require_file(*train_graph);
        graph = load_graph(*train_graph, corpus);
      } else {
        graph = build_graph(corpus, static_cast<std::size_t>(cfg.top_m),
                            static_cast<unsigned>(cfg.threads));
      }
      const auto log = run_training(cfg, corpus, index, graph, difficulty);
      ensure_dir(train_out);
      write_metrics(log, corpus, train_out);
      const auto& last = log.records.empty() ? IterationRecord{} : log.records.back();
      fmt::print("mode={} iterations={} final_g={} cumulative_ignored={}\n",
                 mode_name(cfg.mode), log.records.size(), last.gap_level,
                 last.cumulative_ignored);
    } else if (*evr) {
      const auto ks = parse_ks(evr_ks);
      if (evr_out) refuse_inside(*evr_out, evr_corpus);
      const auto corpus = load_corpus_dir(evr_corpus);
      const auto index = obtain_index(corpus, evr_index, kDefaultChunkSize);
      const auto table = recall_at_k(corpus, index, evr_lambda, ks);
      emit(evr_out, recall_to_csv(table));
    } else if (*rep) {
      std::vector<RunMetrics> runs{load_run(rep_run)};
      for (const auto& d : rep_compare) runs.push_back(load_run(d));
      const auto report = build_report(std::move(runs));
      for (const auto& w : report.warnings) fmt::print(stderr, "warning: {}\n", w);
      if (rep_out) {
        ensure_dir(*rep_out);
        write_file(*rep_out / "report.csv", report_csv(report));
        write_file(*rep_out / "summary.json", report_summary_json(report));
      } else {
        std::cout << report_csv(report);
      }
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  }
  return 0;
}
