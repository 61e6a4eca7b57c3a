#include "poet/intent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace poet::intent {

namespace {

constexpr size_t kNeighborPool = 20;

constexpr char kGraphMagic[4] = {'P', 'G', 'P', 'H'};
constexpr uint8_t kGraphVersion = 1;

bool is_delimiter(const std::string& tok) {
  static const std::set<std::string> punct = {"，", "。", "！", "？", "、", "　", ",", ".", "!", "?"};
  if (punct.count(tok)) return true;
  return tok.size() == 1 && isspace(static_cast<unsigned char>(tok[0]));
}

// mean of in-vocabulary character embeddings; empty when none resolve
std::vector<double> word_embedding(const std::string& word, const aw2v::EmbeddingMatrix& emb,
                                   const corpus::Vocabulary& vocab) {
  std::vector<double> mean(static_cast<size_t>(emb.dim), 0.0);
  int n = 0;
  for (const std::string& c : utf8_split(word)) {
    if (!vocab.contains(c)) continue;
    const double* row = emb.row(vocab.id(c));
    for (int i = 0; i < emb.dim; ++i) mean[static_cast<size_t>(i)] += row[i];
    ++n;
  }
  if (n == 0) return {};
  for (double& v : mean) v /= n;
  return mean;
}

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw Error("unexpected end of graph file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ofstream& out, double v) {
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(&v), 8);
}

double read_f64(std::ifstream& in) {
  double v;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw Error("unexpected end of graph file");
  return v;
}

}  // namespace

Lexicon::Lexicon(const std::vector<std::string>& words) {
  for (const std::string& w : words) {
    if (w.empty()) continue;
    const size_t len = utf8_length(w);
    words_.emplace(w, len);
    max_len_ = std::max(max_len_, len);
  }
}

Lexicon Lexicon::load(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> words;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  return Lexicon(words);
}

Lexicon Lexicon::single_characters(const corpus::Vocabulary& vocab) {
  std::vector<std::string> words;
  for (int32_t id = corpus::Vocabulary::kFirstContent; id < vocab.size(); ++id)
    words.push_back(vocab.symbol(id));
  return Lexicon(words);
}

void Lexicon::save(const std::string& path) const {
  std::ostringstream out;
  for (const auto& [w, len] : words_) out << w << '\n';
  write_file(path, out.str());
}

std::vector<std::string> segment(const std::string& text, const Lexicon& lexicon) {
  if (lexicon.empty()) throw Error("segmentation requires a non-empty lexicon");
  const std::vector<std::string> chars = utf8_split(text);
  std::vector<std::string> out;
  size_t i = 0;
  while (i < chars.size()) {
    if (is_delimiter(chars[i])) {
      ++i;
      continue;
    }
    size_t best = 1;
    const size_t cap = std::min(lexicon.max_word_length(), chars.size() - i);
    for (size_t len = cap; len >= 2; --len) {
      bool crosses_delim = false;
      std::string candidate;
      for (size_t k = 0; k < len; ++k) {
        if (is_delimiter(chars[i + k])) {
          crosses_delim = true;
          break;
        }
        candidate += chars[i + k];
      }
      if (!crosses_delim && lexicon.contains(candidate)) {
        best = len;
        break;
      }
    }
    std::string word;
    for (size_t k = 0; k < best; ++k) word += chars[i + k];
    out.push_back(word);
    i += best;
  }
  return out;
}

int32_t WordGraph::add_vertex(const std::string& word) {
  auto it = index_.find(word);
  if (it != index_.end()) return it->second;
  const int32_t idx = static_cast<int32_t>(words_.size());
  words_.push_back(word);
  index_.emplace(word, idx);
  adj_.emplace_back();
  return idx;
}

int32_t WordGraph::find_vertex(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

void WordGraph::add_cooccurrence(const std::string& a, const std::string& b) {
  if (a == b) return;  // no self-loops
  const int32_t ia = add_vertex(a);
  const int32_t ib = add_vertex(b);
  adj_[static_cast<size_t>(ia)][ib] += 1.0;
  adj_[static_cast<size_t>(ib)][ia] += 1.0;
}

double WordGraph::edge_weight(const std::string& a, const std::string& b) const {
  const int32_t ia = find_vertex(a), ib = find_vertex(b);
  if (ia < 0 || ib < 0) return 0.0;
  auto it = adj_[static_cast<size_t>(ia)].find(ib);
  return it == adj_[static_cast<size_t>(ia)].end() ? 0.0 : it->second;
}

void WordGraph::set_scores(std::vector<double> scores, bool converged) {
  if (scores.size() != words_.size()) throw Error("score vector size mismatch");
  scores_ = std::move(scores);
  converged_ = converged;
}

double WordGraph::score(const std::string& word) const {
  const int32_t idx = find_vertex(word);
  if (idx < 0 || scores_.empty()) return 0.0;
  return scores_[static_cast<size_t>(idx)];
}

void WordGraph::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write graph file: " + path);
  out.write(kGraphMagic, 4);
  out.put(static_cast<char>(kGraphVersion));
  out.put(converged_ ? 1 : 0);
  write_u32(out, static_cast<uint32_t>(words_.size()));
  for (const std::string& w : words_) {
    write_u32(out, static_cast<uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  // CSR adjacency
  uint64_t total_edges = 0;
  for (const auto& nbrs : adj_) total_edges += nbrs.size();
  write_u32(out, static_cast<uint32_t>(total_edges >> 32));
  write_u32(out, static_cast<uint32_t>(total_edges));
  for (const auto& nbrs : adj_) {
    write_u32(out, static_cast<uint32_t>(nbrs.size()));
    for (const auto& [j, w] : nbrs) {
      write_u32(out, static_cast<uint32_t>(j));
      write_f64(out, w);
    }
  }
  const bool with_scores = !scores_.empty();
  out.put(with_scores ? 1 : 0);
  if (with_scores)
    for (double s : scores_) write_f64(out, s);
  if (!out) throw Error("write failed: " + path);
}

WordGraph WordGraph::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open graph file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || memcmp(magic, kGraphMagic, 4) != 0) throw Error("bad graph file magic: " + path);
  const int version = in.get();
  if (version != kGraphVersion) throw Error("unsupported graph file version");
  WordGraph g;
  g.converged_ = in.get() == 1;
  const uint32_t n = read_u32(in);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t len = read_u32(in);
    std::string w(len, '\0');
    in.read(w.data(), len);
    if (!in) throw Error("truncated graph file: " + path);
    g.add_vertex(w);
  }
  read_u32(in);  // edge count, high
  read_u32(in);  // edge count, low
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t deg = read_u32(in);
    for (uint32_t e = 0; e < deg; ++e) {
      const uint32_t j = read_u32(in);
      const double w = read_f64(in);
      g.adj_[i][static_cast<int32_t>(j)] = w;
    }
  }
  if (in.get() == 1) {
    g.scores_.resize(n);
    for (uint32_t i = 0; i < n; ++i) g.scores_[i] = read_f64(in);
  }
  return g;
}

WordGraph build_graph(const std::vector<std::vector<std::string>>& units, size_t window) {
  if (window < 1) throw Error("co-occurrence window must be >= 1");
  WordGraph g;
  for (const auto& unit : units) {
    for (const std::string& w : unit) g.add_vertex(w);
    for (size_t i = 0; i < unit.size(); ++i) {
      const size_t hi = std::min(unit.size(), i + window + 1);
      for (size_t j = i + 1; j < hi; ++j) g.add_cooccurrence(unit[i], unit[j]);
    }
  }
  return g;
}

TextRankResult textrank(const WordGraph& graph, const TextRankConfig& cfg) {
  const size_t n = graph.vertex_count();
  if (n == 0) throw Error("textrank requires at least one vertex");
  std::vector<double> sumw(n, 0.0);
  for (size_t j = 0; j < n; ++j)
    for (const auto& [k, w] : graph.neighbors(static_cast<int32_t>(j))) sumw[j] += w;

  TextRankResult res;
  res.scores.assign(n, cfg.initial_score);
  std::vector<double> next(n);
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    double max_delta = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& [j, w] : graph.neighbors(static_cast<int32_t>(i)))
        acc += w / sumw[static_cast<size_t>(j)] * res.scores[static_cast<size_t>(j)];
      next[i] = (1.0 - cfg.damping) + cfg.damping * acc;
      max_delta = std::max(max_delta, std::fabs(next[i] - res.scores[i]));
    }
    res.scores.swap(next);
    res.iterations = iter + 1;
    if (max_delta < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

KeywordSet extract_keywords(const std::string& query, const WordGraph& graph,
                            const aw2v::EmbeddingMatrix& emb, const corpus::Vocabulary& vocab,
                            const Lexicon& lexicon) {
  std::vector<std::string> words = segment(query, lexicon);
  {
    std::set<std::string> seen;
    std::vector<std::string> dedup;
    for (const std::string& w : words)
      if (seen.insert(w).second) dedup.push_back(w);
    words.swap(dedup);
  }
  if (words.empty()) throw Error("empty intent: query has no words");

  // rank query words by corpus score, ties by first occurrence
  std::vector<size_t> order(words.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return graph.score(words[a]) > graph.score(words[b]); });

  std::vector<std::string> chosen;
  std::set<std::string> taken(words.begin(), words.end());  // query words never re-enter via extension
  for (size_t i = 0; i < order.size() && chosen.size() < 4; ++i) chosen.push_back(words[order[i]]);

  while (chosen.size() < 4) {
    // candidate pool: top-k embedding neighbors of every chosen keyword
    std::set<int32_t> pool;
    for (const std::string& kw : chosen) {
      const std::vector<double> kv = word_embedding(kw, emb, vocab);
      if (kv.empty()) continue;
      struct Scored {
        int32_t id;
        double sim;
      };
      std::vector<Scored> sims;
      for (size_t v = 0; v < graph.vertex_count(); ++v) {
        const std::string& w = graph.word(static_cast<int32_t>(v));
        if (taken.count(w)) continue;
        const std::vector<double> wv = word_embedding(w, emb, vocab);
        if (wv.empty()) continue;
        sims.push_back({static_cast<int32_t>(v), aw2v::cosine_similarity(kv, wv)});
      }
      std::sort(sims.begin(), sims.end(), [](const Scored& a, const Scored& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
      });
      for (size_t i = 0; i < sims.size() && i < kNeighborPool; ++i) pool.insert(sims[i].id);
    }

    int32_t best = -1;
    double best_score = -1.0;
    for (int32_t v : pool) {
      const double s = graph.scores().empty() ? 0.0 : graph.scores()[static_cast<size_t>(v)];
      if (s > best_score) {
        best_score = s;
        best = v;
      }
    }
    if (best < 0) {
      // extension pool exhausted: fall back to the global score ranking
      for (size_t v = 0; v < graph.vertex_count(); ++v) {
        if (taken.count(graph.word(static_cast<int32_t>(v)))) continue;
        const double s = graph.scores().empty() ? 0.0 : graph.scores()[v];
        if (s > best_score) {
          best_score = s;
          best = static_cast<int32_t>(v);
        }
      }
    }
    if (best < 0) throw Error("keyword extension pool exhausted: corpus graph too small");
    chosen.push_back(graph.word(best));
    taken.insert(graph.word(best));
  }

  KeywordSet out;
  for (const std::string& w : chosen) {
    Keyword kw;
    kw.word = w;
    kw.chars = utf8_split(w);
    for (const std::string& c : kw.chars)
      if (!vocab.contains(c)) kw.has_oov = true;
    out.keywords.push_back(std::move(kw));
  }
  return out;
}

std::vector<std::vector<std::string>> auto_keywords(const corpus::Poem& poem, const WordGraph& graph,
                                                    const Lexicon& lexicon) {
  if (!poem.is_quatrain()) throw Error("auto keywords require a quatrain");
  std::vector<std::vector<std::string>> out;
  for (const corpus::Line& line : poem.lines) {
    const std::vector<std::string> words = segment(line.text(), lexicon);
    if (words.empty()) throw Error("line has no segmentable words");
    size_t best = 0;
    for (size_t i = 1; i < words.size(); ++i)
      if (graph.score(words[i]) > graph.score(words[best])) best = i;
    out.push_back(utf8_split(words[best]));
  }
  return out;
}

}  // namespace poet::intent
