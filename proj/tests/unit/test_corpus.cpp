#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "retcurr/corpus.hpp"
#include "retcurr/error.hpp"
#include "retcurr/hash.hpp"
#include "retcurr/text.hpp"
#include "retcurr/tfidf.hpp"

using namespace retcurr;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kValidation;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("retcurr_test_corpus_" + name);
  fs::remove_all(p);
  return p;
}

Corpus three_articles() {
  return Corpus({fixtures::article("a", "alpha beta", fixtures::axis(2, 0)),
                 fixtures::article("b", "gamma delta", fixtures::axis(2, 1)),
                 fixtures::article("c", "epsilon", fixtures::unit({1, 1}))},
                {});
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(tokenize("Hello, World! foo-bar") ==
        std::vector<std::string>{"hello", "world", "foo", "bar"});
  CHECK(tokenize("  ").empty());
  // U+00A0 no-break space separates; U+00E9 stays inside the token.
  CHECK(tokenize("caf\xC3\xA9\xC2\xA0noir") == std::vector<std::string>{"caf\xC3\xA9", "noir"});
}

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("  Paris   France ") == "paris france");
  CHECK(normalize_answer("\tX\n") == "x");
  CHECK(normalize_answer("") == "");
}

TEST_CASE("corpus invariants") {
  SUBCASE("three articles, no samples") {
    const auto c = three_articles();
    CHECK(c.num_articles() == 3);
    CHECK(c.num_samples() == 0);
  }
  SUBCASE("duplicate article id") {
    CHECK(kind_of([] {
            Corpus({fixtures::article("a", "x", fixtures::axis(2, 0)),
                    fixtures::article("a", "y", fixtures::axis(2, 1))},
                   {});
          }) == ErrorKind::kValidation);
  }
  SUBCASE("non-unit vector") {
    CHECK(kind_of([] { Corpus({fixtures::article("a", "x", {1.0, 0.1})}, {}); }) ==
          ErrorKind::kValidation);
  }
  SUBCASE("empty text") {
    CHECK(kind_of([] { Corpus({fixtures::article("a", " ,. ", fixtures::axis(2, 0))}, {}); }) ==
          ErrorKind::kValidation);
  }
  SUBCASE("dangling gt article names the sample") {
    try {
      Corpus({fixtures::article("a", "x", fixtures::axis(2, 0))},
             {fixtures::sample("q1", "?", "y", "a", fixtures::axis(2, 0)),
              fixtures::sample("q2", "?", "y", "zzz", fixtures::axis(2, 0))});
      FAIL("expected integrity error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIntegrity);
      CHECK(std::string(e.what()).find("q2") != std::string::npos);
      CHECK(std::string(e.what()).find("q1") == std::string::npos);
    }
  }
}

TEST_CASE("parse errors carry line numbers") {
  const std::string articles =
      R"({"id":"a","title":"","text":"x","image_vec":[1,0]})"
      "\n{not json}\n";
  try {
    parse_corpus(articles, "");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("articles:2") != std::string::npos);
  }
}

TEST_CASE("synthetic corpus counts and determinism") {
  auto spec = fixtures::small_spec(3);
  spec.n_topics = 2;
  spec.articles_per_topic = 3;
  spec.samples_per_article = 2;
  const auto a = generate_synthetic_corpus(spec);
  const auto b = generate_synthetic_corpus(spec);
  CHECK(a.corpus.num_articles() == 6);
  CHECK(a.corpus.num_samples() == 12);
  CHECK(a.base_difficulty.size() == 12);
  CHECK(serialize_articles(a.corpus) == serialize_articles(b.corpus));
  CHECK(serialize_samples(a.corpus) == serialize_samples(b.corpus));
  CHECK(a.base_difficulty == b.base_difficulty);
  for (double d : a.base_difficulty) {
    CHECK(d >= spec.difficulty_lo);
    CHECK(d <= spec.difficulty_hi);
  }
  spec.seed = 4;
  CHECK(generate_synthetic_corpus(spec).corpus.content_hash() != a.corpus.content_hash());
}

TEST_CASE("synth spec validation names the field") {
  auto expect_field = [](const std::string& json, const std::string& field) {
    try {
      synth_spec_from_json(json);
      FAIL("expected validation error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kValidation);
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  expect_field(R"({"n_topics":0})", "n_topics");
  expect_field(R"({"base_difficulty_range":[0.9,0.1]})", "base_difficulty_range");
  expect_field(R"({"topic_vocab_overlap":1.5})", "topic_vocab_overlap");
  expect_field(R"({"bogus":1})", "bogus");
}

TEST_CASE("synth spec json round trip") {
  auto spec = fixtures::small_spec(11);
  spec.topic_difficulty_share = 0.25;
  const auto back = synth_spec_from_json(synth_spec_to_json(spec));
  CHECK(synth_spec_to_json(back) == synth_spec_to_json(spec));
}

TEST_CASE("intra-topic TF-IDF similarity exceeds inter-topic") {
  auto spec = fixtures::small_spec(5);
  spec.topic_vocab_overlap = 0.8;
  const auto synth = generate_synthetic_corpus(spec);
  const auto& arts = synth.corpus.articles();
  std::vector<std::vector<std::string>> docs;
  for (const auto& a : arts) docs.push_back(tokenize(a.text));
  const auto model = TfidfModel::fit(docs);
  std::vector<SparseVector> vecs;
  for (const auto& d : docs) vecs.push_back(model.transform(d));
  // Brute-force pairwise similarity from dense vectors.
  const auto n_terms = model.terms().size();
  auto dense = [&](const SparseVector& v) {
    std::vector<double> out(n_terms, 0.0);
    for (auto [id, w] : v.entries) out[id] = w;
    return out;
  };
  const auto per_topic = static_cast<std::size_t>(spec.articles_per_topic);
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < arts.size(); ++i) {
    const auto di = dense(vecs[i]);
    for (std::size_t j = i + 1; j < arts.size(); ++j) {
      const auto dj = dense(vecs[j]);
      double dot = 0.0;
      for (std::size_t t = 0; t < n_terms; ++t) dot += di[t] * dj[t];
      if (i / per_topic == j / per_topic) {
        intra += dot;
        ++n_intra;
      } else {
        inter += dot;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra > inter / n_inter);
}

TEST_CASE("difficulty shares correlate samples within an article") {
  auto spec = fixtures::small_spec(8);
  spec.n_topics = 4;
  spec.articles_per_topic = 10;
  spec.samples_per_article = 4;
  spec.article_difficulty_share = 0.9;
  const auto corr = generate_synthetic_corpus(spec);
  spec.article_difficulty_share = 0.0;
  const auto indep = generate_synthetic_corpus(spec);
  // Mean within-article variance drops when the article share dominates.
  auto within_var = [&](const DifficultySidecar& d) {
    double total = 0.0;
    const auto k = static_cast<std::size_t>(spec.samples_per_article);
    for (std::size_t a = 0; a < d.size() / k; ++a) {
      double m = 0.0;
      for (std::size_t s = 0; s < k; ++s) m += d[a * k + s];
      m /= static_cast<double>(k);
      for (std::size_t s = 0; s < k; ++s) total += (d[a * k + s] - m) * (d[a * k + s] - m);
    }
    return total / static_cast<double>(d.size());
  };
  CHECK(within_var(corr.base_difficulty) < 0.3 * within_var(indep.base_difficulty));
}

TEST_CASE("split_passages") {
  auto words = [](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += "t" + std::to_string(i) + " ";
    return s;
  };
  const auto a600 = fixtures::article("a", words(600), fixtures::axis(2, 0));
  const auto p = split_passages(a600);
  REQUIRE(p.size() == 3);
  CHECK(tokenize(p[0].text).size() == 256);
  CHECK(tokenize(p[1].text).size() == 256);
  CHECK(tokenize(p[2].text).size() == 88);
  CHECK(split_passages(fixtures::article("b", words(10), fixtures::axis(2, 0)), 256).size() == 1);
  CHECK(kDefaultChunkSize == 256);

  // Concatenated passages tokenize back to the article's tokens.
  const auto a = fixtures::article("c", "One, two; THREE four\tfive six seven", fixtures::axis(2, 0));
  std::vector<std::string> joined;
  for (const auto& ps : split_passages(a, 3)) {
    auto t = tokenize(ps.text);
    joined.insert(joined.end(), t.begin(), t.end());
  }
  CHECK(joined == tokenize(a.text));
}

TEST_CASE("write and load round trip, manifest hashes") {
  const auto synth = generate_synthetic_corpus(fixtures::small_spec(9));
  const auto dir = scratch("roundtrip");
  write_corpus_dir(dir, synth.corpus, &synth.base_difficulty);
  const auto loaded = load_corpus_dir(dir);
  CHECK(loaded == synth.corpus);
  CHECK(loaded.content_hash() == synth.corpus.content_hash());
  CHECK(load_difficulty(dir / CorpusFiles::kDifficulty, loaded) == synth.base_difficulty);

  // Independent re-hash of each file agrees with the manifest.
  const auto manifest = nlohmann::json::parse(read_file(dir / CorpusFiles::kManifest));
  for (const auto& [name, digest] : manifest.at("files").items()) {
    CHECK(sha256_file(dir / name) == digest.get<std::string>());
  }
  CHECK(manifest.at("num_samples").get<std::size_t>() == synth.corpus.num_samples());

  // Tampering with the samples is caught by the manifest.
  auto samples = read_file(dir / CorpusFiles::kSamples);
  samples.replace(samples.find("what"), 4, "WHAT");
  write_file(dir / CorpusFiles::kSamples, samples);
  CHECK(kind_of([&] { load_corpus_dir(dir); }) == ErrorKind::kHashMismatch);
  fs::remove_all(dir);
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(kind_of([] { sha256_file("/nonexistent/retcurr"); }) == ErrorKind::kIo);
}

TEST_CASE("difficulty sidecar integrity") {
  const auto synth = generate_synthetic_corpus(fixtures::small_spec(2));
  auto text = serialize_difficulty(synth.corpus, synth.base_difficulty);
  text.erase(text.find('\n') + 1);
  CHECK(kind_of([&] { parse_difficulty(text, synth.corpus); }) == ErrorKind::kIntegrity);
}
