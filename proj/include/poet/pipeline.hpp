#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poet/aw2v.hpp"
#include "poet/corpus.hpp"
#include "poet/cvae.hpp"
#include "poet/eval.hpp"
#include "poet/intent.hpp"

namespace poet::pipeline {

struct GenerationConfig {
  int form = 5;              // characters per line, 5 or 7
  double temperature = 0.0;  // 0 = greedy argmax
  int top_k = 0;             // 0 = disabled
  int candidates_per_line = 1;
  uint64_t seed = 0;
  bool rse_filter = false;
};

struct GeneratedPoem {
  std::string query;
  intent::KeywordSet keywords;
  std::vector<corpus::Line> lines;           // 4
  std::array<double, 4> per_line_rse{};
  std::vector<std::vector<double>> z_draws;  // one latent sample per line
  uint64_t seed = 0;
};

// On-disk artifact bundle produced by ingest.
struct Artifacts {
  corpus::Vocabulary vocab;
  intent::Lexicon lexicon;
  intent::WordGraph graph;

  static Artifacts load(const std::string& dir);
};

struct RuleData {
  eval::ToneDictionary tones;
  eval::RhymeDictionary rhymes;
  eval::TonalTemplates templates = eval::TonalTemplates::standard();

  static RuleData load(const std::string& dir);  // tone.tsv, rhyme.tsv, templates.txt
};

struct IngestOptions {
  size_t vocab_size = 6000;
  size_t valid_n = 2000;
  size_t test_n = 1000;
  uint64_t seed = 7;
  std::string lexicon_path;  // empty: single-character lexicon from the vocabulary
};

struct IngestStats {
  size_t poems = 0;
  size_t quatrains = 0;
  size_t train = 0, valid = 0, test = 0;
  size_t vocab_size = 0;
  size_t graph_vertices = 0;
  bool textrank_converged = false;
};

IngestStats ingest(const std::string& corpus_path, const std::string& out_dir,
                   const IngestOptions& opts);

// Loads a split file written by ingest ("train", "valid" or "test").
std::vector<corpus::Poem> load_split(const std::string& dir, const std::string& name);

// Per-line training examples for a split, keywords chosen by TextRank score.
std::vector<cvae::ExampleIds> split_examples(const std::vector<corpus::Poem>& poems,
                                             const Artifacts& artifacts);

struct LineResult {
  corpus::Line line;
  std::vector<double> z;
};

LineResult generate_line(cvae::Model& model, const std::vector<std::string>& keyword_chars,
                         const std::vector<corpus::Line>& context, int line_index,
                         const GenerationConfig& cfg, Rng& rng);

GeneratedPoem generate_poem(cvae::Model& model, const Artifacts& artifacts,
                            const aw2v::EmbeddingMatrix& embeddings, const std::string& query,
                            const GenerationConfig& cfg, const RuleData& rules);

std::string poem_to_json(const GeneratedPoem& poem);

struct EvalReport {
  bool has_ppl = false;
  double ppl = 0, nll = 0, kl = 0, ppl_total = 0;
  bool has_bleu = false;
  std::array<double, 4> bleu{};
  bool has_rse = false;
  double rse = 0;
  double rse_ground_truth = 0;
  size_t poems_scored = 0;
};

// metric: "ppl" | "bleu" | "rse" | "all"; BLEU/RSE generate one poem per test
// quatrain from that poem's own keywords.
EvalReport evaluate_model(cvae::Model& model, const Artifacts& artifacts,
                          const aw2v::EmbeddingMatrix& embeddings,
                          const std::vector<corpus::Poem>& dataset, const std::string& metric,
                          const GenerationConfig& gen_cfg, const RuleData& rules,
                          size_t poem_limit);

std::string report_to_json(const EvalReport& report);

}  // namespace poet::pipeline
