#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poet/common.hpp"

namespace poet::corpus {

// One poem line as a sequence of character tokens (UTF-8 codepoints).
struct Line {
  std::vector<std::string> chars;

  size_t length() const { return chars.size(); }
  std::string text() const;
};

struct Poem {
  std::vector<Line> lines;
  std::string title;      // empty when absent
  std::string source_id;  // stable identifier assigned at parse time

  bool is_quatrain() const;
};

// Character vocabulary with fixed special ids.
class Vocabulary {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kBos = 1;
  static constexpr int32_t kEos = 2;
  static constexpr int32_t kUnk = 3;
  static constexpr int32_t kSep = 4;
  static constexpr int32_t kFirstContent = 5;

  Vocabulary() = default;

  // Content symbols in id order (id = kFirstContent + index).
  explicit Vocabulary(std::vector<std::string> content_symbols);

  int32_t size() const { return kFirstContent + static_cast<int32_t>(content_.size()); }
  int32_t content_size() const { return static_cast<int32_t>(content_.size()); }

  // Lookup never fails: unknown symbols map to kUnk.
  int32_t id(const std::string& symbol) const;
  bool contains(const std::string& symbol) const;

  // Inverse lookup; specials yield their marker names (PAD, BOS, ...).
  const std::string& symbol(int32_t id) const;

  std::vector<int32_t> encode(const Line& line) const;

  std::string to_text() const;
  static Vocabulary from_text(const std::string& text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> content_;
  std::map<std::string, int32_t> to_id_;
};

struct DatasetSplit {
  std::vector<Poem> train, valid, test;
};

// (keyword, previous lines, target line, 1-based line index)
struct TrainingExample {
  std::vector<std::string> keyword;  // 1-3 character tokens
  std::vector<Line> context;         // lines 1..index-1
  Line target;
  int line_index = 1;  // 1..4
};

// Parses the block corpus format: poems separated by blank lines, optional
// leading "#title ..." per block, punctuation from {，。！？、} acting as an
// in-line delimiter. Throws Error with the offending block index.
std::vector<Poem> parse_corpus(const std::string& text);
std::vector<Poem> parse_corpus_file(const std::string& path);

std::vector<Poem> filter_quatrains(const std::vector<Poem>& poems);

// The `size` most frequent characters become content symbols; ties break by
// codepoint ascending.
Vocabulary build_vocabulary(const std::vector<Poem>& poems, size_t size);

DatasetSplit make_splits(const std::vector<Poem>& poems, uint64_t seed, size_t valid_n,
                         size_t test_n);

enum class SliceMode { All, PairOnly };  // PairOnly slices lines 3-4 only

// Column slices of a quatrain: sequence j = (l1[j], l2[j], l3[j], l4[j]).
std::vector<std::vector<std::string>> vertical_slices(const Poem& poem,
                                                      SliceMode mode = SliceMode::All);

std::vector<TrainingExample> make_training_examples(
    const Poem& poem, const std::vector<std::vector<std::string>>& keywords);

// Serializes poems back to the block format.
std::string format_corpus(const std::vector<Poem>& poems);

}  // namespace poet::corpus
