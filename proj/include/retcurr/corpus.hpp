#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace retcurr {

inline constexpr std::size_t kDefaultChunkSize = 256;
inline constexpr double kUnitNormTolerance = 1e-6;

struct Article {
  std::string id;
  std::string title;
  std::string text;
  std::vector<double> image_vec;

  bool operator==(const Article&) const = default;
};

struct VqaSample {
  std::string id;
  std::string question;
  std::string answer;
  std::string gt_article_id;
  std::vector<double> query_image_vec;
  std::optional<std::string> topic_id;

  bool operator==(const VqaSample&) const = default;
};

struct Passage {
  std::string article_id;
  std::size_t index = 0;
  std::string text;
};

// Immutable knowledge base plus VQA samples. Construction validates every
// invariant (unique ids, unit vectors, referential integrity) and computes a
// content hash over the canonical serialization.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Article> articles, std::vector<VqaSample> samples);

  const std::vector<Article>& articles() const { return articles_; }
  const std::vector<VqaSample>& samples() const { return samples_; }

  std::size_t num_articles() const { return articles_.size(); }
  std::size_t num_samples() const { return samples_.size(); }

  // Throws kValidation for unknown ids.
  std::size_t article_index(std::string_view id) const;
  std::optional<std::size_t> find_article(std::string_view id) const;
  std::optional<std::size_t> find_sample(std::string_view id) const;

  // Index of the ground-truth article of sample i.
  std::size_t gt_article(std::size_t sample) const { return gt_index_[sample]; }

  const std::string& content_hash() const { return hash_; }

  bool operator==(const Corpus& other) const {
    return articles_ == other.articles_ && samples_ == other.samples_;
  }

 private:
  std::vector<Article> articles_;
  std::vector<VqaSample> samples_;
  std::unordered_map<std::string, std::size_t> article_by_id_;
  std::unordered_map<std::string, std::size_t> sample_by_id_;
  std::vector<std::size_t> gt_index_;
  std::string hash_;
};

struct SynthSpec {
  int n_topics = 4;
  int articles_per_topic = 4;
  int samples_per_article = 3;
  int vocab_size = 2000;
  double topic_vocab_overlap = 0.8;
  double difficulty_lo = 0.2;
  double difficulty_hi = 0.8;
  int vec_dim = 32;
  std::uint64_t seed = 0;

  // Generator shape knobs. Not algorithmic, only control how realistic the
  // synthetic retrieval problem is.
  int article_min_tokens = 120;
  int article_max_tokens = 420;
  double article_vec_noise = 0.6;
  double query_vec_noise = 0.45;
  // Fractions of latent-difficulty variance shared by all samples of a topic
  // and of an article. Each sample's difficulty stays marginally uniform on
  // the range (Gaussian copula).
  double topic_difficulty_share = 0.0;
  double article_difficulty_share = 0.0;

  void validate() const;
};

SynthSpec synth_spec_from_json(std::string_view json_text);
std::string synth_spec_to_json(const SynthSpec& spec);

// Latent per-sample difficulty, index-aligned with corpus samples. Only the
// simulator reads it.
using DifficultySidecar = std::vector<double>;

struct SyntheticCorpus {
  Corpus corpus;
  DifficultySidecar base_difficulty;
};

SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec);

std::vector<Passage> split_passages(const Article& article,
                                    std::size_t chunk_size = kDefaultChunkSize);

// Line-delimited JSON, one record per line.
std::string serialize_articles(const Corpus& corpus);
std::string serialize_samples(const Corpus& corpus);
std::string serialize_difficulty(const Corpus& corpus,
                                 const DifficultySidecar& difficulty);

Corpus parse_corpus(std::string_view articles_jsonl, std::string_view samples_jsonl);
DifficultySidecar parse_difficulty(std::string_view jsonl, const Corpus& corpus);

Corpus load_corpus(const std::filesystem::path& articles_path,
                   const std::filesystem::path& samples_path);
DifficultySidecar load_difficulty(const std::filesystem::path& path, const Corpus& corpus);

struct CorpusFiles {
  static constexpr std::string_view kArticles = "articles.jsonl";
  static constexpr std::string_view kSamples = "samples.jsonl";
  static constexpr std::string_view kDifficulty = "difficulty.jsonl";
  static constexpr std::string_view kManifest = "manifest.json";
};

// Writes articles/samples (and the sidecar when given) plus manifest.json
// with per-file SHA-256 and the corpus content hash.
void write_corpus_dir(const std::filesystem::path& dir, const Corpus& corpus,
                      const DifficultySidecar* difficulty);
Corpus load_corpus_dir(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace retcurr
