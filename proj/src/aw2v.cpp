#include "poet/aw2v.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace poet::aw2v {

namespace {

constexpr uint32_t kMagic = 0x56325741;  // "AW2V" little-endian
constexpr uint32_t kVersion = 1;
constexpr size_t kUnigramTableSize = 1 << 20;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(const double* a, const double* b, int dim) {
  double s = 0;
  for (int i = 0; i < dim; ++i) s += a[i] * b[i];
  return s;
}

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw Error("unexpected end of embedding file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void EmbeddingMatrix::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embedding file: " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(rows));
  write_u32(out, static_cast<uint32_t>(dim));
  for (double v : data) {
    const float f = static_cast<float>(v);
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!out) throw Error("write failed: " + path);
}

EmbeddingMatrix EmbeddingMatrix::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding file: " + path);
  if (read_u32(in) != kMagic) throw Error("bad embedding file magic: " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion) throw Error("unsupported embedding file version: " + std::to_string(version));
  EmbeddingMatrix m;
  m.rows = static_cast<int32_t>(read_u32(in));
  m.dim = static_cast<int32_t>(read_u32(in));
  m.data.resize(static_cast<size_t>(m.rows) * static_cast<size_t>(m.dim));
  for (double& v : m.data) {
    float f;
    in.read(reinterpret_cast<char*>(&f), 4);
    if (!in) throw Error("truncated embedding file: " + path);
    v = f;
  }
  return m;
}

std::vector<std::vector<std::string>> augment_corpus(const std::vector<corpus::Poem>& poems,
                                                     AugmentMode mode) {
  for (const corpus::Poem& p : poems)
    if (!p.is_quatrain()) throw Error("augment_corpus expects quatrains only");
  std::vector<std::vector<std::string>> out;
  for (const corpus::Poem& p : poems)
    for (const corpus::Line& l : p.lines) out.push_back(l.chars);
  if (mode == AugmentMode::None) return out;
  const corpus::SliceMode slice_mode =
      mode == AugmentMode::SlicesPairOnly ? corpus::SliceMode::PairOnly : corpus::SliceMode::All;
  for (const corpus::Poem& p : poems)
    for (auto& s : corpus::vertical_slices(p, slice_mode)) out.push_back(std::move(s));
  return out;
}

SgnsTriple sgns_triple(const std::vector<double>& center, const std::vector<double>& context,
                       const std::vector<std::vector<double>>& negatives) {
  const int dim = static_cast<int>(center.size());
  SgnsTriple r;
  r.grad_center.assign(center.size(), 0.0);
  r.grad_context.assign(center.size(), 0.0);
  r.grad_negatives.assign(negatives.size(), std::vector<double>(center.size(), 0.0));

  const double s_pos = sigmoid(dot(center.data(), context.data(), dim));
  r.loss = -std::log(std::max(s_pos, 1e-300));
  const double g_pos = s_pos - 1.0;  // d loss / d (u . v)
  for (int i = 0; i < dim; ++i) {
    r.grad_center[i] += g_pos * context[i];
    r.grad_context[i] += g_pos * center[i];
  }
  for (size_t n = 0; n < negatives.size(); ++n) {
    const double s_neg = sigmoid(dot(center.data(), negatives[n].data(), dim));
    r.loss += -std::log(std::max(1.0 - s_neg, 1e-300));
    const double g_neg = s_neg;
    for (int i = 0; i < dim; ++i) {
      r.grad_center[i] += g_neg * negatives[n][i];
      r.grad_negatives[n][i] += g_neg * center[i];
    }
  }
  return r;
}

TrainResult train_embeddings(const std::vector<std::vector<std::string>>& sequences,
                             const SgnsConfig& cfg, const corpus::Vocabulary& vocab) {
  if (sequences.empty()) throw Error("no training sequences");
  if (vocab.size() <= corpus::Vocabulary::kFirstContent) throw Error("empty vocabulary");
  if (cfg.dim < 1 || cfg.negatives < 1) throw Error("invalid sgns configuration");

  const int32_t nrows = vocab.size();
  const int dim = cfg.dim;

  std::vector<std::vector<int32_t>> encoded;
  encoded.reserve(sequences.size());
  std::vector<uint64_t> counts(static_cast<size_t>(nrows), 0);
  uint64_t total_tokens = 0;
  for (const auto& seq : sequences) {
    std::vector<int32_t> ids;
    ids.reserve(seq.size());
    for (const std::string& tok : seq) {
      const int32_t id = vocab.id(tok);
      ids.push_back(id);
      ++counts[static_cast<size_t>(id)];
      ++total_tokens;
    }
    encoded.push_back(std::move(ids));
  }

  // unigram^0.75 negative-sampling table
  std::vector<int32_t> table;
  {
    double norm = 0;
    for (int32_t w = corpus::Vocabulary::kFirstContent; w < nrows; ++w)
      norm += std::pow(static_cast<double>(counts[static_cast<size_t>(w)]), 0.75);
    if (norm <= 0) {
      // corpus maps entirely to UNK; fall back to a uniform table
      for (int32_t w = corpus::Vocabulary::kFirstContent; w < nrows; ++w) counts[static_cast<size_t>(w)] = 1;
      norm = static_cast<double>(nrows - corpus::Vocabulary::kFirstContent);
    }
    table.resize(kUnigramTableSize);
    int32_t w = corpus::Vocabulary::kFirstContent;
    double cum = std::pow(static_cast<double>(counts[static_cast<size_t>(w)]), 0.75) / norm;
    for (size_t i = 0; i < kUnigramTableSize; ++i) {
      table[i] = w;
      if (static_cast<double>(i) / kUnigramTableSize > cum && w < nrows - 1) {
        ++w;
        cum += std::pow(static_cast<double>(counts[static_cast<size_t>(w)]), 0.75) / norm;
      }
    }
  }

  Rng rng(cfg.seed);
  EmbeddingMatrix input;
  input.rows = nrows;
  input.dim = dim;
  input.data.resize(static_cast<size_t>(nrows) * dim);
  for (double& v : input.data) v = rng.uniform(-0.5 / dim, 0.5 / dim);
  std::vector<double> output(static_cast<size_t>(nrows) * dim, 0.0);

  const uint64_t plan = static_cast<uint64_t>(cfg.epochs) * total_tokens + 1;
  uint64_t processed = 0;
  TrainResult result;

  std::vector<double> center_grad(static_cast<size_t>(dim));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0;
    for (const auto& seq : encoded) {
      // subsample frequent tokens
      std::vector<int32_t> kept;
      kept.reserve(seq.size());
      for (int32_t id : seq) {
        ++processed;
        if (cfg.subsample_threshold > 0) {
          const double f = static_cast<double>(counts[static_cast<size_t>(id)]) / total_tokens;
          const double keep = std::sqrt(cfg.subsample_threshold / f) + cfg.subsample_threshold / f;
          if (keep < 1.0 && rng.uniform() > keep) continue;
        }
        kept.push_back(id);
      }
      const double lr =
          cfg.step_size * std::max(1e-4, 1.0 - static_cast<double>(processed) / static_cast<double>(plan));
      for (size_t ci = 0; ci < kept.size(); ++ci) {
        const int32_t center = kept[ci];
        double* u = input.row(center);
        const size_t lo = ci >= static_cast<size_t>(cfg.window) ? ci - cfg.window : 0;
        const size_t hi = std::min(kept.size(), ci + static_cast<size_t>(cfg.window) + 1);
        for (size_t oi = lo; oi < hi; ++oi) {
          if (oi == ci) continue;
          const int32_t ctx = kept[oi];
          std::fill(center_grad.begin(), center_grad.end(), 0.0);
          {
            double* v = &output[static_cast<size_t>(ctx) * dim];
            const double s = sigmoid(dot(u, v, dim));
            epoch_loss += -std::log(std::max(s, 1e-300));
            const double g = (s - 1.0) * lr;
            for (int i = 0; i < dim; ++i) {
              center_grad[i] += g * v[i];
              v[i] -= g * u[i];
            }
          }
          for (int n = 0; n < cfg.negatives; ++n) {
            const int32_t neg = table[rng.below(kUnigramTableSize)];
            if (neg == ctx) continue;
            double* v = &output[static_cast<size_t>(neg) * dim];
            const double s = sigmoid(dot(u, v, dim));
            epoch_loss += -std::log(std::max(1.0 - s, 1e-300));
            const double g = s * lr;
            for (int i = 0; i < dim; ++i) {
              center_grad[i] += g * v[i];
              v[i] -= g * u[i];
            }
          }
          for (int i = 0; i < dim; ++i) u[i] -= center_grad[i];
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  result.embeddings = std::move(input);
  return result;
}

double cosine_similarity(const double* a, const double* b, int dim) {
  const double na = std::sqrt(dot(a, a, dim));
  const double nb = std::sqrt(dot(b, b, dim));
  if (na == 0.0 || nb == 0.0) throw Error("cosine similarity of a zero vector");
  return dot(a, b, dim) / (na * nb);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine similarity dimension mismatch");
  return cosine_similarity(a.data(), b.data(), static_cast<int>(a.size()));
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingMatrix& emb, const corpus::Vocabulary& vocab,
                                        const std::string& word, size_t k) {
  if (!vocab.contains(word)) throw Error("word not in vocabulary: " + word);
  if (emb.rows != vocab.size()) throw Error("embedding/vocabulary size mismatch");
  const int32_t qid = vocab.id(word);
  struct Scored {
    int32_t id;
    double sim;
  };
  std::vector<Scored> scored;
  for (int32_t w = corpus::Vocabulary::kFirstContent; w < emb.rows; ++w) {
    if (w == qid) continue;
    scored.push_back({w, cosine_similarity(emb.row(qid), emb.row(w), emb.dim)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.id < b.id;
  });
  if (scored.size() > k) scored.resize(k);
  std::vector<Neighbor> out;
  out.reserve(scored.size());
  for (const Scored& s : scored) out.push_back({vocab.symbol(s.id), s.sim});
  return out;
}

}  // namespace poet::aw2v
