#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poet/corpus.hpp"
#include "poet/cvae.hpp"

namespace poet::eval {

enum class Tone { Level, Downward, Either };

class ToneDictionary {
 public:
  Tone tone(const std::string& ch) const;  // unknown -> Either
  void add(const std::string& ch, Tone t) { map_[ch] = t; }
  size_t size() const { return map_.size(); }
  static ToneDictionary load(const std::string& path);  // TSV: char \t P|Z|E

 private:
  std::map<std::string, Tone> map_;
};

class RhymeDictionary {
 public:
  std::optional<int> category(const std::string& ch) const;  // unknown never rhymes
  void add(const std::string& ch, int category) { map_[ch] = category; }
  size_t size() const { return map_.size(); }
  static RhymeDictionary load(const std::string& path);  // TSV: char \t category-id

 private:
  std::map<std::string, int> map_;
};

class TonalTemplates {
 public:
  using Rows = std::array<std::string, 4>;  // one P/Z/* string per poem line

  void add(const Rows& rows);
  const std::vector<Rows>& for_form(int form) const;
  bool has_form(int form) const { return by_form_.count(form) > 0; }

  static TonalTemplates load(const std::string& path);  // blank-line separated blocks of 4
  // The four rotations of the canonical regulated pattern, for both forms.
  static TonalTemplates standard();

 private:
  std::map<int, std::vector<Rows>> by_form_;
  static const std::vector<Rows> kEmpty;
};

// Per-line rhythm score in {0, 0.5, 1}: 0 when the length is not 5 or 7,
// +tone when the line matches some template row, +rhyme when the line-end
// obligation holds (line 2 establishes the rhyme, line 4 must match it,
// lines 1 and 3 carry no obligation).
double rhy(const corpus::Line& line, int line_index, const std::vector<corpus::Line>& poem_lines,
           const ToneDictionary& tones, const RhymeDictionary& rhymes,
           const TonalTemplates& templates);

double rse_mean(const std::vector<std::vector<corpus::Line>>& poems, const ToneDictionary& tones,
                const RhymeDictionary& rhymes, const TonalTemplates& templates);

// Corpus-level character n-gram BLEU with brevity penalty, cumulative 1..4.
std::array<double, 4> bleu(const std::vector<corpus::Line>& candidates,
                           const std::vector<std::vector<corpus::Line>>& references);

struct PplReport {
  double nll_per_char = 0;
  double kl_per_line = 0;
  double ppl = 0;             // exp(nll_per_char)
  double nll_total_per_char = 0;
  double ppl_total = 0;       // exp(nll_total_per_char)
};

PplReport report_ppl(cvae::Model& model, const std::vector<cvae::ExampleIds>& dataset);

}  // namespace poet::eval
