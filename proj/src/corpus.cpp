#include "poet/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace poet::corpus {

namespace {

const std::set<std::string> kPunctuation = {"，", "。", "！", "？", "、"};

const std::vector<std::string> kSpecialNames = {"PAD", "BOS", "EOS", "UNK", "SEP"};

bool is_blank(const std::string& s) {
  for (char c : s)
    if (!isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

std::string strip(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::string Line::text() const { return join(chars, ""); }

bool Poem::is_quatrain() const {
  if (lines.size() != 4) return false;
  const size_t len = lines[0].length();
  if (len != 5 && len != 7) return false;
  for (const Line& l : lines)
    if (l.length() != len) return false;
  return true;
}

Vocabulary::Vocabulary(std::vector<std::string> content_symbols) : content_(std::move(content_symbols)) {
  for (size_t i = 0; i < content_.size(); ++i) {
    auto [it, inserted] = to_id_.emplace(content_[i], kFirstContent + static_cast<int32_t>(i));
    if (!inserted) throw Error("duplicate vocabulary symbol: " + content_[i]);
  }
}

int32_t Vocabulary::id(const std::string& symbol) const {
  auto it = to_id_.find(symbol);
  return it == to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& symbol) const { return to_id_.count(symbol) > 0; }

const std::string& Vocabulary::symbol(int32_t id) const {
  if (id < 0 || id >= size()) throw Error("vocabulary id out of range: " + std::to_string(id));
  if (id < kFirstContent) return kSpecialNames[static_cast<size_t>(id)];
  return content_[static_cast<size_t>(id - kFirstContent)];
}

std::vector<int32_t> Vocabulary::encode(const Line& line) const {
  std::vector<int32_t> ids;
  ids.reserve(line.chars.size());
  for (const std::string& c : line.chars) ids.push_back(id(c));
  return ids;
}

std::string Vocabulary::to_text() const {
  std::ostringstream out;
  for (const std::string& s : kSpecialNames) out << s << '\n';
  for (const std::string& s : content_) out << s << '\n';
  return out.str();
}

Vocabulary Vocabulary::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(line);
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.size() < kSpecialNames.size()) throw Error("vocabulary text too short");
  for (size_t i = 0; i < kSpecialNames.size(); ++i) {
    if (rows[i] != kSpecialNames[i])
      throw Error("vocabulary text missing special header line " + std::to_string(i + 1));
  }
  return Vocabulary(std::vector<std::string>(rows.begin() + kSpecialNames.size(), rows.end()));
}

void Vocabulary::save(const std::string& path) const { write_file(path, to_text()); }

Vocabulary Vocabulary::load(const std::string& path) {
  try {
    return from_text(read_file(path));
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + ": " + path);
  }
}

std::vector<Poem> parse_corpus(const std::string& text) {
  std::vector<std::vector<std::string>> blocks;
  {
    std::istringstream in(text);
    std::string raw;
    std::vector<std::string> current;
    while (std::getline(in, raw)) {
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      if (is_blank(raw)) {
        if (!current.empty()) blocks.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(raw);
      }
    }
    if (!current.empty()) blocks.push_back(std::move(current));
  }

  std::vector<Poem> poems;
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    Poem poem;
    poem.source_id = "block:" + std::to_string(bi);
    size_t first = 0;
    if (blocks[bi][0].rfind("#title", 0) == 0) {
      poem.title = strip(blocks[bi][0].substr(6));
      first = 1;
    }
    for (size_t li = first; li < blocks[bi].size(); ++li) {
      std::vector<std::string> tokens;
      try {
        tokens = utf8_split(blocks[bi][li]);
      } catch (const Error& e) {
        throw Error("block " + std::to_string(bi) + ": " + e.what());
      }
      // punctuation closes the current line; anything after it starts a new one
      Line cur;
      for (const std::string& tok : tokens) {
        if (kPunctuation.count(tok)) {
          if (!cur.chars.empty()) poem.lines.push_back(std::move(cur));
          cur = Line{};
        } else if (tok.size() == 1 && isspace(static_cast<unsigned char>(tok[0]))) {
          continue;
        } else {
          cur.chars.push_back(tok);
        }
      }
      if (!cur.chars.empty()) poem.lines.push_back(std::move(cur));
    }
    if (poem.lines.empty())
      throw Error("block " + std::to_string(bi) + ": no poem lines after title/punctuation handling");
    poems.push_back(std::move(poem));
  }
  return poems;
}

std::vector<Poem> parse_corpus_file(const std::string& path) { return parse_corpus(read_file(path)); }

std::vector<Poem> filter_quatrains(const std::vector<Poem>& poems) {
  std::vector<Poem> out;
  for (const Poem& p : poems)
    if (p.is_quatrain()) out.push_back(p);
  return out;
}

Vocabulary build_vocabulary(const std::vector<Poem>& poems, size_t size) {
  if (size < 1) throw Error("vocabulary size must be >= 1");
  std::unordered_map<std::string, uint64_t> counts;
  for (const Poem& p : poems)
    for (const Line& l : p.lines)
      for (const std::string& c : l.chars) ++counts[c];

  std::vector<std::pair<std::string, uint64_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return utf8_codepoint(a.first) < utf8_codepoint(b.first);
  });
  if (items.size() > size) items.resize(size);

  std::vector<std::string> symbols;
  symbols.reserve(items.size());
  for (auto& [sym, cnt] : items) symbols.push_back(sym);
  return Vocabulary(std::move(symbols));
}

DatasetSplit make_splits(const std::vector<Poem>& poems, uint64_t seed, size_t valid_n, size_t test_n) {
  if (valid_n + test_n >= poems.size())
    throw Error("not enough poems for the requested validation/test sizes");
  std::vector<size_t> order(poems.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<size_t> valid_ids(order.begin(), order.begin() + valid_n);
  std::vector<size_t> test_ids(order.begin() + valid_n, order.begin() + valid_n + test_n);
  std::sort(valid_ids.begin(), valid_ids.end());
  std::sort(test_ids.begin(), test_ids.end());

  std::vector<bool> held(poems.size(), false);
  DatasetSplit split;
  for (size_t i : valid_ids) {
    split.valid.push_back(poems[i]);
    held[i] = true;
  }
  for (size_t i : test_ids) {
    split.test.push_back(poems[i]);
    held[i] = true;
  }
  for (size_t i = 0; i < poems.size(); ++i)
    if (!held[i]) split.train.push_back(poems[i]);
  return split;
}

std::vector<std::vector<std::string>> vertical_slices(const Poem& poem, SliceMode mode) {
  if (!poem.is_quatrain()) throw Error("vertical slices require a quatrain");
  const size_t len = poem.lines[0].length();
  const size_t first_line = mode == SliceMode::PairOnly ? 2 : 0;
  std::vector<std::vector<std::string>> slices(len);
  for (size_t j = 0; j < len; ++j) {
    for (size_t i = first_line; i < 4; ++i) slices[j].push_back(poem.lines[i].chars[j]);
  }
  return slices;
}

std::vector<TrainingExample> make_training_examples(
    const Poem& poem, const std::vector<std::vector<std::string>>& keywords) {
  if (!poem.is_quatrain()) throw Error("training examples require a quatrain");
  if (keywords.size() != 4) throw Error("expected exactly 4 keywords, got " + std::to_string(keywords.size()));
  std::vector<TrainingExample> out;
  for (int i = 0; i < 4; ++i) {
    TrainingExample ex;
    ex.keyword = keywords[static_cast<size_t>(i)];
    ex.context.assign(poem.lines.begin(), poem.lines.begin() + i);
    ex.target = poem.lines[static_cast<size_t>(i)];
    ex.line_index = i + 1;
    out.push_back(std::move(ex));
  }
  return out;
}

std::string format_corpus(const std::vector<Poem>& poems) {
  std::ostringstream out;
  for (size_t i = 0; i < poems.size(); ++i) {
    if (i) out << '\n';
    if (!poems[i].title.empty()) out << "#title " << poems[i].title << '\n';
    for (const Line& l : poems[i].lines) out << l.text() << '\n';
  }
  return out.str();
}

}  // namespace poet::corpus
