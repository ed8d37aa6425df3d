#include "retcurr/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "retcurr/error.hpp"
#include "retcurr/hash.hpp"
#include "retcurr/text.hpp"

namespace retcurr {

using ojson = nlohmann::ordered_json;

namespace {

double l2_norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

void normalize_in_place(std::vector<double>& v) {
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
}

void check_unit(const std::vector<double>& v, std::size_t dim, const std::string& what) {
  if (v.empty()) fail(ErrorKind::kValidation, what + ": empty vector");
  if (v.size() != dim) {
    fail(ErrorKind::kValidation,
         fmt::format("{}: dimension {} differs from corpus dimension {}", what, v.size(), dim));
  }
  const double n = l2_norm(v);
  if (!(std::abs(n - 1.0) <= kUnitNormTolerance)) {
    fail(ErrorKind::kValidation, fmt::format("{}: L2 norm {} is not 1", what, n));
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

template <typename Fn>
void for_each_record(std::string_view jsonl, std::string_view source, Fn&& fn) {
  const auto lines = split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    try {
      fn(nlohmann::json::parse(lines[i]));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, fmt::format("{}:{}: {}", source, i + 1, e.what()));
    }
  }
}

std::vector<double> read_vec(const nlohmann::json& j) {
  return j.get<std::vector<double>>();
}

}  // namespace

Corpus::Corpus(std::vector<Article> articles, std::vector<VqaSample> samples)
    : articles_(std::move(articles)), samples_(std::move(samples)) {
  const std::size_t dim = articles_.empty() ? 0 : articles_.front().image_vec.size();
  for (std::size_t i = 0; i < articles_.size(); ++i) {
    const Article& a = articles_[i];
    if (a.id.empty()) fail(ErrorKind::kValidation, fmt::format("article #{} has empty id", i));
    if (!article_by_id_.emplace(a.id, i).second) {
      fail(ErrorKind::kValidation, "duplicate article id " + a.id);
    }
    if (tokenize(a.text).empty()) fail(ErrorKind::kValidation, "article " + a.id + " has empty text");
    check_unit(a.image_vec, dim, "article " + a.id + " image_vec");
  }
  std::vector<std::string> dangling;
  gt_index_.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const VqaSample& s = samples_[i];
    if (s.id.empty()) fail(ErrorKind::kValidation, fmt::format("sample #{} has empty id", i));
    if (!sample_by_id_.emplace(s.id, i).second) {
      fail(ErrorKind::kValidation, "duplicate sample id " + s.id);
    }
    check_unit(s.query_image_vec, dim == 0 ? s.query_image_vec.size() : dim,
               "sample " + s.id + " query_image_vec");
    auto it = article_by_id_.find(s.gt_article_id);
    if (it == article_by_id_.end()) {
      dangling.push_back(s.id);
      gt_index_.push_back(0);
    } else {
      gt_index_.push_back(it->second);
    }
  }
  if (!dangling.empty()) {
    std::string msg = "samples reference missing gt_article_id:";
    for (const auto& id : dangling) msg += " " + id;
    fail(ErrorKind::kIntegrity, msg);
  }
  hash_ = sha256_hex(serialize_articles(*this) + serialize_samples(*this));
}

std::size_t Corpus::article_index(std::string_view id) const {
  auto found = find_article(id);
  if (!found) fail(ErrorKind::kValidation, "unknown article id " + std::string(id));
  return *found;
}

std::optional<std::size_t> Corpus::find_article(std::string_view id) const {
  auto it = article_by_id_.find(std::string(id));
  if (it == article_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Corpus::find_sample(std::string_view id) const {
  auto it = sample_by_id_.find(std::string(id));
  if (it == sample_by_id_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Synthetic generation

void SynthSpec::validate() const {
  require(n_topics > 0, "n_topics must be > 0");
  require(articles_per_topic > 0, "articles_per_topic must be > 0");
  require(samples_per_article > 0, "samples_per_article must be > 0");
  require(vocab_size > 0, "vocab_size must be > 0");
  require(topic_vocab_overlap >= 0.0 && topic_vocab_overlap <= 1.0,
          "topic_vocab_overlap must be in [0,1]");
  require(difficulty_lo >= 0.0 && difficulty_hi <= 1.0 && difficulty_lo <= difficulty_hi,
          "base_difficulty_range must satisfy 0 <= lo <= hi <= 1");
  require(vec_dim > 0, "vec_dim must be > 0");
  require(article_min_tokens > 0 && article_min_tokens <= article_max_tokens,
          "article_min_tokens must be in (0, article_max_tokens]");
  require(article_vec_noise >= 0.0, "article_vec_noise must be >= 0");
  require(query_vec_noise >= 0.0, "query_vec_noise must be >= 0");
  require(topic_difficulty_share >= 0.0 && article_difficulty_share >= 0.0 &&
              topic_difficulty_share + article_difficulty_share <= 1.0,
          "topic_difficulty_share and article_difficulty_share must be >= 0 with sum <= 1");
}

SynthSpec synth_spec_from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("synth spec: ") + e.what());
  }
  require(j.is_object(), "synth spec must be a JSON object");
  SynthSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_topics") spec.n_topics = value.get<int>();
      else if (key == "articles_per_topic") spec.articles_per_topic = value.get<int>();
      else if (key == "samples_per_article") spec.samples_per_article = value.get<int>();
      else if (key == "vocab_size") spec.vocab_size = value.get<int>();
      else if (key == "topic_vocab_overlap") spec.topic_vocab_overlap = value.get<double>();
      else if (key == "base_difficulty_range") {
        const auto range = value.get<std::vector<double>>();
        require(range.size() == 2, "base_difficulty_range must be [lo, hi]");
        spec.difficulty_lo = range[0];
        spec.difficulty_hi = range[1];
      } else if (key == "vec_dim") spec.vec_dim = value.get<int>();
      else if (key == "seed") spec.seed = value.get<std::uint64_t>();
      else if (key == "article_min_tokens") spec.article_min_tokens = value.get<int>();
      else if (key == "article_max_tokens") spec.article_max_tokens = value.get<int>();
      else if (key == "article_vec_noise") spec.article_vec_noise = value.get<double>();
      else if (key == "query_vec_noise") spec.query_vec_noise = value.get<double>();
      else if (key == "topic_difficulty_share") spec.topic_difficulty_share = value.get<double>();
      else if (key == "article_difficulty_share") spec.article_difficulty_share = value.get<double>();
      else fail(ErrorKind::kValidation, "synth spec: unknown field " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kValidation, std::string("synth spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  ojson j;
  j["n_topics"] = spec.n_topics;
  j["articles_per_topic"] = spec.articles_per_topic;
  j["samples_per_article"] = spec.samples_per_article;
  j["vocab_size"] = spec.vocab_size;
  j["topic_vocab_overlap"] = spec.topic_vocab_overlap;
  j["base_difficulty_range"] = {spec.difficulty_lo, spec.difficulty_hi};
  j["vec_dim"] = spec.vec_dim;
  j["seed"] = spec.seed;
  j["article_min_tokens"] = spec.article_min_tokens;
  j["article_max_tokens"] = spec.article_max_tokens;
  j["article_vec_noise"] = spec.article_vec_noise;
  j["query_vec_noise"] = spec.query_vec_noise;
  j["topic_difficulty_share"] = spec.topic_difficulty_share;
  j["article_difficulty_share"] = spec.article_difficulty_share;
  return j.dump(2);
}

namespace {

std::vector<double> random_direction(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = normal(rng);
  normalize_in_place(v);
  return v;
}

// normalize(base + noise * u) for a random unit direction u.
std::vector<double> perturb(const std::vector<double>& base, double noise, std::mt19937_64& rng) {
  auto dir = random_direction(rng, static_cast<int>(base.size()));
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) out[i] = base[i] + noise * dir[i];
  normalize_in_place(out);
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  const auto vocab = static_cast<std::size_t>(spec.vocab_size);
  std::vector<std::size_t> shuffled(vocab);
  std::iota(shuffled.begin(), shuffled.end(), 0);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  // Topic pools are disjoint slices of the shuffled vocabulary while it lasts,
  // then wrap around.
  const std::size_t pool_size =
      std::max<std::size_t>(1, vocab / static_cast<std::size_t>(spec.n_topics));
  auto word = [](std::size_t w) { return fmt::format("w{}", w); };

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_word(0, vocab - 1);
  std::uniform_int_distribution<std::size_t> pool_word(0, pool_size - 1);
  std::uniform_int_distribution<int> length(spec.article_min_tokens, spec.article_max_tokens);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w_topic = std::sqrt(spec.topic_difficulty_share);
  const double w_article = std::sqrt(spec.article_difficulty_share);
  const double w_sample =
      std::sqrt(std::max(0.0, 1.0 - spec.topic_difficulty_share - spec.article_difficulty_share));
  auto difficulty = [&](double z) {
    const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));
    return spec.difficulty_lo + (spec.difficulty_hi - spec.difficulty_lo) * u;
  };

  static constexpr std::string_view kAttributes[] = {
      "color", "origin", "height", "founder", "material", "purpose", "age", "location"};

  std::vector<Article> articles;
  std::vector<VqaSample> samples;
  DifficultySidecar base;

  for (int t = 0; t < spec.n_topics; ++t) {
    const auto centroid = random_direction(rng, spec.vec_dim);
    const double z_topic = normal(rng);
    auto topic_word = [&](std::mt19937_64& g) {
      const std::size_t slot = (static_cast<std::size_t>(t) * pool_size + pool_word(g)) % vocab;
      return word(shuffled[slot]);
    };
    const std::string topic_id = fmt::format("topic-{:03d}", t);
    for (int a = 0; a < spec.articles_per_topic; ++a) {
      const std::size_t article_no = articles.size();
      const double z_article = normal(rng);
      const std::string name = fmt::format("entity{}", article_no);
      const int n_tokens = length(rng);
      std::vector<std::string> tokens;
      tokens.reserve(static_cast<std::size_t>(n_tokens));
      for (int k = 0; k < n_tokens; ++k) {
        if (k % 50 == 0) {
          tokens.push_back(name);
        } else if (unit(rng) < spec.topic_vocab_overlap) {
          tokens.push_back(topic_word(rng));
        } else {
          tokens.push_back(word(any_word(rng)));
        }
      }
      Article art;
      art.id = fmt::format("art-{:05d}", article_no);
      art.title = name + " " + topic_word(rng);
      art.text = join_tokens(tokens, 0, tokens.size());
      art.image_vec = perturb(centroid, spec.article_vec_noise, rng);

      std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
      for (int s = 0; s < spec.samples_per_article; ++s) {
        VqaSample q;
        q.id = fmt::format("q-{:06d}", samples.size());
        const auto attr = kAttributes[static_cast<std::size_t>(s) % std::size(kAttributes)];
        q.question = fmt::format("what is the {} of the {} {} shown?", attr, tokens[pick(rng)],
                                 tokens[pick(rng)]);
        q.answer = fmt::format("{} {} {}", attr, name, s);
        q.gt_article_id = art.id;
        q.query_image_vec = perturb(art.image_vec, spec.query_vec_noise, rng);
        q.topic_id = topic_id;
        samples.push_back(std::move(q));
        base.push_back(
            difficulty(w_topic * z_topic + w_article * z_article + w_sample * normal(rng)));
      }
      articles.push_back(std::move(art));
    }
  }
  return {Corpus(std::move(articles), std::move(samples)), std::move(base)};
}

std::vector<Passage> split_passages(const Article& article, std::size_t chunk_size) {
  require(chunk_size > 0, "chunk_size must be > 0");
  const auto tokens = tokenize(article.text);
  std::vector<Passage> out;
  for (std::size_t begin = 0, idx = 0; begin < tokens.size(); begin += chunk_size, ++idx) {
    const std::size_t end = std::min(tokens.size(), begin + chunk_size);
    out.push_back({article.id, idx, join_tokens(tokens, begin, end)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_articles(const Corpus& corpus) {
  std::string out;
  for (const Article& a : corpus.articles()) {
    ojson j;
    j["id"] = a.id;
    j["title"] = a.title;
    j["text"] = a.text;
    j["image_vec"] = a.image_vec;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::string serialize_samples(const Corpus& corpus) {
  std::string out;
  for (const VqaSample& s : corpus.samples()) {
    ojson j;
    j["id"] = s.id;
    j["question"] = s.question;
    j["answer"] = s.answer;
    j["gt_article_id"] = s.gt_article_id;
    j["query_image_vec"] = s.query_image_vec;
    if (s.topic_id) j["topic_id"] = *s.topic_id;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::string serialize_difficulty(const Corpus& corpus, const DifficultySidecar& difficulty) {
  require(difficulty.size() == corpus.num_samples(), "difficulty sidecar size mismatch");
  std::string out;
  for (std::size_t i = 0; i < difficulty.size(); ++i) {
    ojson j;
    j["sample_id"] = corpus.samples()[i].id;
    j["base_difficulty"] = difficulty[i];
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

Corpus parse_corpus(std::string_view articles_jsonl, std::string_view samples_jsonl) {
  std::vector<Article> articles;
  for_each_record(articles_jsonl, "articles", [&](const nlohmann::json& j) {
    Article a;
    a.id = j.at("id").get<std::string>();
    a.title = j.at("title").get<std::string>();
    a.text = j.at("text").get<std::string>();
    a.image_vec = read_vec(j.at("image_vec"));
    articles.push_back(std::move(a));
  });
  std::vector<VqaSample> samples;
  for_each_record(samples_jsonl, "samples", [&](const nlohmann::json& j) {
    VqaSample s;
    s.id = j.at("id").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.answer = j.at("answer").get<std::string>();
    s.gt_article_id = j.at("gt_article_id").get<std::string>();
    s.query_image_vec = read_vec(j.at("query_image_vec"));
    if (auto it = j.find("topic_id"); it != j.end() && !it->is_null()) {
      s.topic_id = it->get<std::string>();
    }
    samples.push_back(std::move(s));
  });
  return Corpus(std::move(articles), std::move(samples));
}

DifficultySidecar parse_difficulty(std::string_view jsonl, const Corpus& corpus) {
  DifficultySidecar out(corpus.num_samples(), -1.0);
  for_each_record(jsonl, "difficulty", [&](const nlohmann::json& j) {
    const auto id = j.at("sample_id").get<std::string>();
    const double d = j.at("base_difficulty").get<double>();
    auto idx = corpus.find_sample(id);
    if (!idx) fail(ErrorKind::kIntegrity, "difficulty sidecar names unknown sample " + id);
    require(d >= 0.0 && d <= 1.0, "base_difficulty out of [0,1] for sample " + id);
    out[*idx] = d;
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) {
      fail(ErrorKind::kIntegrity, "difficulty sidecar misses sample " + corpus.samples()[i].id);
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

Corpus load_corpus(const std::filesystem::path& articles_path,
                   const std::filesystem::path& samples_path) {
  return parse_corpus(read_file(articles_path), read_file(samples_path));
}

DifficultySidecar load_difficulty(const std::filesystem::path& path, const Corpus& corpus) {
  return parse_difficulty(read_file(path), corpus);
}

void write_corpus_dir(const std::filesystem::path& dir, const Corpus& corpus,
                      const DifficultySidecar* difficulty) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  ojson files = ojson::object();
  auto emit = [&](std::string_view name, const std::string& content) {
    write_file(dir / name, content);
    files[std::string(name)] = sha256_hex(content);
  };
  emit(CorpusFiles::kArticles, serialize_articles(corpus));
  emit(CorpusFiles::kSamples, serialize_samples(corpus));
  if (difficulty) emit(CorpusFiles::kDifficulty, serialize_difficulty(corpus, *difficulty));

  ojson manifest;
  manifest["corpus_hash"] = corpus.content_hash();
  manifest["num_articles"] = corpus.num_articles();
  manifest["num_samples"] = corpus.num_samples();
  manifest["files"] = files;
  write_file(dir / CorpusFiles::kManifest, manifest.dump(2) + "\n");
}

Corpus load_corpus_dir(const std::filesystem::path& dir) {
  Corpus corpus = load_corpus(dir / CorpusFiles::kArticles, dir / CorpusFiles::kSamples);
  const auto manifest_path = dir / CorpusFiles::kManifest;
  if (std::filesystem::exists(manifest_path)) {
    std::string recorded;
    try {
      recorded = nlohmann::json::parse(read_file(manifest_path)).at("corpus_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, manifest_path.string() + ": " + e.what());
    }
    if (recorded != corpus.content_hash()) {
      fail(ErrorKind::kHashMismatch, fmt::format("{}: corpus hash {} does not match files ({})",
                                                 manifest_path.string(), recorded,
                                                 corpus.content_hash()));
    }
  }
  return corpus;
}

}  // namespace retcurr
