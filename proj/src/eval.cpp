#include "poet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace poet::eval {

namespace {

std::vector<std::array<std::string, 2>> read_tsv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::array<std::string, 2>> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(path + " line " + std::to_string(lineno) + ": expected two tab-separated fields");
    rows.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return rows;
}

}  // namespace

Tone ToneDictionary::tone(const std::string& ch) const {
  auto it = map_.find(ch);
  return it == map_.end() ? Tone::Either : it->second;
}

ToneDictionary ToneDictionary::load(const std::string& path) {
  ToneDictionary d;
  for (const auto& [ch, val] : read_tsv(path)) {
    if (val == "P")
      d.add(ch, Tone::Level);
    else if (val == "Z")
      d.add(ch, Tone::Downward);
    else if (val == "E")
      d.add(ch, Tone::Either);
    else
      throw Error("tone dictionary value must be P, Z or E: " + val);
  }
  return d;
}

std::optional<int> RhymeDictionary::category(const std::string& ch) const {
  auto it = map_.find(ch);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

RhymeDictionary RhymeDictionary::load(const std::string& path) {
  RhymeDictionary d;
  for (const auto& [ch, val] : read_tsv(path)) d.add(ch, std::stoi(val));
  return d;
}

const std::vector<TonalTemplates::Rows> TonalTemplates::kEmpty;

void TonalTemplates::add(const Rows& rows) {
  const size_t form = utf8_length(rows[0]);
  for (const std::string& r : rows) {
    if (utf8_length(r) != form) throw Error("template rows must share one length");
    for (char c : r)
      if (c != 'P' && c != 'Z' && c != '*') throw Error("template symbols must be P, Z or *");
  }
  by_form_[static_cast<int>(form)].push_back(rows);
}

const std::vector<TonalTemplates::Rows>& TonalTemplates::for_form(int form) const {
  auto it = by_form_.find(form);
  return it == by_form_.end() ? kEmpty : it->second;
}

TonalTemplates TonalTemplates::load(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> block;
  TonalTemplates t;
  auto flush = [&] {
    if (block.empty()) return;
    if (block.size() != 4) throw Error("template blocks must have exactly 4 lines: " + path);
    t.add({block[0], block[1], block[2], block[3]});
    block.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') {
      flush();
      continue;
    }
    block.push_back(line);
  }
  flush();
  return t;
}

TonalTemplates TonalTemplates::standard() {
  // canonical regulated quatrain rows and their 4 rotations
  const std::array<std::string, 4> base5 = {"*PPZZ", "*ZZPP", "*ZPPZ", "PPZZP"};
  const std::array<std::string, 4> base7 = {"*Z*PPZZ", "*P*ZZPP", "*P*ZPPZ", "*ZPPZZP"};
  TonalTemplates t;
  for (int r = 0; r < 4; ++r) {
    Rows r5, r7;
    for (int i = 0; i < 4; ++i) {
      r5[static_cast<size_t>(i)] = base5[static_cast<size_t>((i + r) % 4)];
      r7[static_cast<size_t>(i)] = base7[static_cast<size_t>((i + r) % 4)];
    }
    t.add(r5);
    t.add(r7);
  }
  return t;
}

double rhy(const corpus::Line& line, int line_index, const std::vector<corpus::Line>& poem_lines,
           const ToneDictionary& tones, const RhymeDictionary& rhymes,
           const TonalTemplates& templates) {
  if (line_index < 1 || line_index > 4) throw Error("line index must be 1..4");
  const size_t cnt = line.length();
  if (cnt != 5 && cnt != 7) return 0.0;

  bool tone_ok = false;
  for (const TonalTemplates::Rows& rows : templates.for_form(static_cast<int>(cnt))) {
    const std::vector<std::string> pattern = utf8_split(rows[static_cast<size_t>(line_index - 1)]);
    bool match = true;
    for (size_t p = 0; p < cnt; ++p) {
      if (pattern[p] == "*") continue;
      const Tone t = tones.tone(line.chars[p]);
      if (t == Tone::Either) continue;
      if (pattern[p] == "P" && t != Tone::Level) match = false;
      if (pattern[p] == "Z" && t != Tone::Downward) match = false;
      if (!match) break;
    }
    if (match) {
      tone_ok = true;
      break;
    }
  }

  bool rhyme_ok;
  if (line_index == 1 || line_index == 3) {
    rhyme_ok = true;  // no obligation
  } else if (line_index == 2) {
    rhyme_ok = rhymes.category(line.chars.back()).has_value();
  } else {
    rhyme_ok = false;
    if (poem_lines.size() >= 2 && !poem_lines[1].chars.empty()) {
      const auto established = rhymes.category(poem_lines[1].chars.back());
      const auto own = rhymes.category(line.chars.back());
      rhyme_ok = established.has_value() && own.has_value() && *established == *own;
    }
  }

  if (tone_ok && rhyme_ok) return 1.0;
  if (tone_ok || rhyme_ok) return 0.5;
  return 0.0;
}

double rse_mean(const std::vector<std::vector<corpus::Line>>& poems, const ToneDictionary& tones,
                const RhymeDictionary& rhymes, const TonalTemplates& templates) {
  size_t count = 0;
  double sum = 0;
  for (const auto& lines : poems) {
    for (size_t i = 0; i < lines.size(); ++i) {
      sum += rhy(lines[i], static_cast<int>(i) + 1, lines, tones, rhymes, templates);
      ++count;
    }
  }
  if (count == 0) throw Error("rse_mean of an empty corpus");
  return sum / static_cast<double>(count);
}

std::array<double, 4> bleu(const std::vector<corpus::Line>& candidates,
                           const std::vector<std::vector<corpus::Line>>& references) {
  if (candidates.size() != references.size())
    throw Error("bleu: candidate/reference counts differ");
  if (candidates.empty()) throw Error("bleu: empty corpus");

  constexpr int kMaxN = 4;
  std::array<double, kMaxN> clipped{}, totals{};
  size_t cand_len_sum = 0, ref_len_sum = 0;

  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i].chars;
    cand_len_sum += cand.size();

    // effective reference length: closest to candidate, ties toward shorter
    size_t best_ref = 0;
    bool first = true;
    for (const corpus::Line& ref : references[i]) {
      const size_t rl = ref.chars.size();
      if (first) {
        best_ref = rl;
        first = false;
        continue;
      }
      const auto dist = [&](size_t r) {
        return r > cand.size() ? r - cand.size() : cand.size() - r;
      };
      if (dist(rl) < dist(best_ref) || (dist(rl) == dist(best_ref) && rl < best_ref)) best_ref = rl;
    }
    ref_len_sum += best_ref;

    for (int n = 1; n <= kMaxN; ++n) {
      if (cand.size() < static_cast<size_t>(n)) continue;
      std::unordered_map<std::string, size_t> cand_counts;
      for (size_t p = 0; p + n <= cand.size(); ++p) {
        std::string gram;
        for (int q = 0; q < n; ++q) gram += cand[p + static_cast<size_t>(q)];
        ++cand_counts[gram];
      }
      std::unordered_map<std::string, size_t> max_ref_counts;
      for (const corpus::Line& ref : references[i]) {
        std::unordered_map<std::string, size_t> rc;
        for (size_t p = 0; p + n <= ref.chars.size(); ++p) {
          std::string gram;
          for (int q = 0; q < n; ++q) gram += ref.chars[p + static_cast<size_t>(q)];
          ++rc[gram];
        }
        for (const auto& [gram, cnt] : rc)
          max_ref_counts[gram] = std::max(max_ref_counts[gram], cnt);
      }
      for (const auto& [gram, cnt] : cand_counts) {
        auto it = max_ref_counts.find(gram);
        clipped[static_cast<size_t>(n - 1)] +=
            static_cast<double>(std::min(cnt, it == max_ref_counts.end() ? size_t{0} : it->second));
      }
      totals[static_cast<size_t>(n - 1)] += static_cast<double>(cand.size() - n + 1);
    }
  }

  std::array<double, kMaxN> precision{};
  for (int n = 0; n < kMaxN; ++n)
    precision[static_cast<size_t>(n)] =
        totals[static_cast<size_t>(n)] > 0 ? clipped[static_cast<size_t>(n)] / totals[static_cast<size_t>(n)] : 0.0;

  double bp = 1.0;
  if (cand_len_sum == 0)
    bp = 0.0;
  else if (cand_len_sum < ref_len_sum)
    bp = std::exp(1.0 - static_cast<double>(ref_len_sum) / static_cast<double>(cand_len_sum));

  std::array<double, kMaxN> scores{};
  for (int k = 1; k <= kMaxN; ++k) {
    double log_sum = 0;
    bool zero = false;
    for (int n = 1; n <= k; ++n) {
      if (precision[static_cast<size_t>(n - 1)] <= 0) {
        zero = true;
        break;
      }
      log_sum += std::log(precision[static_cast<size_t>(n - 1)]);
    }
    scores[static_cast<size_t>(k - 1)] = zero ? 0.0 : bp * std::exp(log_sum / k);
  }
  return scores;
}

PplReport report_ppl(cvae::Model& model, const std::vector<cvae::ExampleIds>& dataset) {
  const cvae::EvalStats es = cvae::evaluate(model, dataset);
  PplReport r;
  r.nll_per_char = es.nll_per_char;
  r.kl_per_line = es.kl_per_line;
  r.ppl = es.ppl;
  r.nll_total_per_char = es.nll_total_per_char;
  r.ppl_total = es.ppl_total;
  return r;
}

}  // namespace poet::eval
