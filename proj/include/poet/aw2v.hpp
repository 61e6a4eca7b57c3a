#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poet/corpus.hpp"

namespace poet::aw2v {

struct EmbeddingMatrix {
  std::vector<double> data;  // row-major, rows * dim
  int32_t rows = 0;
  int32_t dim = 0;

  const double* row(int32_t i) const { return data.data() + static_cast<size_t>(i) * dim; }
  double* row(int32_t i) { return data.data() + static_cast<size_t>(i) * dim; }

  void save(const std::string& path) const;
  static EmbeddingMatrix load(const std::string& path);
};

struct SgnsConfig {
  int dim = 128;
  int window = 3;
  int negatives = 5;
  int epochs = 15;
  double step_size = 0.025;          // linearly decayed
  double subsample_threshold = 1e-4; // 0 disables subsampling
  uint64_t seed = 1;
};

enum class AugmentMode { None, SlicesAll, SlicesPairOnly };

// Training sentences: every poem line, then (mode permitting) every vertical
// slice, poem order preserved.
std::vector<std::vector<std::string>> augment_corpus(const std::vector<corpus::Poem>& poems,
                                                     AugmentMode mode = AugmentMode::SlicesAll);

struct TrainResult {
  EmbeddingMatrix embeddings;
  std::vector<double> epoch_loss;  // recorded, not enforced monotone
};

TrainResult train_embeddings(const std::vector<std::vector<std::string>>& sequences,
                             const SgnsConfig& cfg, const corpus::Vocabulary& vocab);

// Loss and gradients of one skip-gram negative-sampling example. Exposed so
// the gradient can be checked against finite differences.
struct SgnsTriple {
  double loss = 0;
  std::vector<double> grad_center;
  std::vector<double> grad_context;
  std::vector<std::vector<double>> grad_negatives;
};
SgnsTriple sgns_triple(const std::vector<double>& center, const std::vector<double>& context,
                       const std::vector<std::vector<double>>& negatives);

double cosine_similarity(const double* a, const double* b, int dim);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct Neighbor {
  std::string word;
  double similarity;
};

// k nearest in-vocabulary characters by cosine, query excluded, ties by id.
std::vector<Neighbor> nearest_neighbors(const EmbeddingMatrix& emb, const corpus::Vocabulary& vocab,
                                        const std::string& word, size_t k);

}  // namespace poet::aw2v
