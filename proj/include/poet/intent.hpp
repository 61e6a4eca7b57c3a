#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "poet/aw2v.hpp"
#include "poet/corpus.hpp"

namespace poet::intent {

class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::string>& words);
  static Lexicon load(const std::string& path);  // one word per line
  static Lexicon single_characters(const corpus::Vocabulary& vocab);

  bool empty() const { return words_.empty(); }
  size_t size() const { return words_.size(); }
  bool contains(const std::string& word) const { return words_.count(word) > 0; }
  size_t max_word_length() const { return max_len_; }
  void save(const std::string& path) const;
  const std::map<std::string, size_t>& words() const { return words_; }

 private:
  std::map<std::string, size_t> words_;  // word -> codepoint length
  size_t max_len_ = 0;
};

// Forward maximum matching; unmatched characters fall out as single-character
// words. Delimiters (punctuation, whitespace) never appear in the output.
std::vector<std::string> segment(const std::string& text, const Lexicon& lexicon);

// Undirected co-occurrence graph over words with accumulated pair counts.
class WordGraph {
 public:
  int32_t add_vertex(const std::string& word);
  int32_t find_vertex(const std::string& word) const;  // -1 if absent
  void add_cooccurrence(const std::string& a, const std::string& b);

  size_t vertex_count() const { return words_.size(); }
  const std::string& word(int32_t idx) const { return words_[static_cast<size_t>(idx)]; }
  double edge_weight(const std::string& a, const std::string& b) const;
  const std::map<int32_t, double>& neighbors(int32_t idx) const { return adj_[static_cast<size_t>(idx)]; }

  void set_scores(std::vector<double> scores, bool converged);
  const std::vector<double>& scores() const { return scores_; }
  double score(const std::string& word) const;  // 0 for unknown words
  bool converged() const { return converged_; }

  void save(const std::string& path) const;
  static WordGraph load(const std::string& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int32_t> index_;
  std::vector<std::map<int32_t, double>> adj_;
  std::vector<double> scores_;
  bool converged_ = false;
};

struct TextRankConfig {
  double damping = 0.85;
  double tol = 1e-6;
  int max_iter = 200;
  double initial_score = 1.0;
};

struct TextRankResult {
  std::vector<double> scores;  // indexed by vertex
  bool converged = false;
  int iterations = 0;
};

// Pairs within `window` positions of each other in a unit co-occur once.
WordGraph build_graph(const std::vector<std::vector<std::string>>& units, size_t window);

TextRankResult textrank(const WordGraph& graph, const TextRankConfig& cfg = {});

struct Keyword {
  std::string word;
  std::vector<std::string> chars;
  bool has_oov = false;  // some character maps to UNK
};

struct KeywordSet {
  std::vector<Keyword> keywords;  // exactly 4, position i drives line i+1
};

// Ranks query words by corpus TextRank score; when fewer than four, extends
// with the best-scoring corpus word among embedding neighbors of the chosen
// keywords (k=20 each), falling back to the global score ranking.
KeywordSet extract_keywords(const std::string& query, const WordGraph& graph,
                            const aw2v::EmbeddingMatrix& emb, const corpus::Vocabulary& vocab,
                            const Lexicon& lexicon);

// Highest-scoring word of each line, per the corpus-level graph.
std::vector<std::vector<std::string>> auto_keywords(const corpus::Poem& poem, const WordGraph& graph,
                                                    const Lexicon& lexicon);

}  // namespace poet::intent
