#pragma once

// Synthetic corpora shared across the test suites.

#include <string>
#include <vector>

#include "poet/common.hpp"
#include "poet/corpus.hpp"

namespace fixtures {

inline const std::vector<std::string>& char_pool() {
  static const std::vector<std::string> pool = {
      "山", "水", "风", "花", "雪", "月", "春", "秋", "江", "天",
      "人", "日", "云", "雨", "夜", "松", "竹", "石", "鸟", "飞",
      "霜", "寒", "深", "空", "明", "孤", "远", "青", "白", "黄",
      "绿", "红", "长", "短", "高", "低", "东", "西", "南", "北"};
  return pool;
}

inline poet::corpus::Line line(const std::string& text) {
  poet::corpus::Line l;
  l.chars = poet::utf8_split(text);
  return l;
}

inline poet::corpus::Poem quatrain(const std::vector<std::string>& lines,
                                   const std::string& source_id = "fixture") {
  poet::corpus::Poem p;
  p.source_id = source_id;
  for (const std::string& s : lines) p.lines.push_back(line(s));
  return p;
}

inline std::vector<poet::corpus::Poem> random_quatrains(size_t n, size_t form, uint64_t seed) {
  poet::Rng rng(seed);
  const auto& pool = char_pool();
  std::vector<poet::corpus::Poem> out;
  for (size_t i = 0; i < n; ++i) {
    poet::corpus::Poem p;
    p.source_id = "rand:" + std::to_string(i);
    for (int li = 0; li < 4; ++li) {
      poet::corpus::Line l;
      for (size_t c = 0; c < form; ++c) l.chars.push_back(pool[rng.below(pool.size())]);
      p.lines.push_back(l);
    }
    out.push_back(p);
  }
  return out;
}

inline std::string corpus_text(const std::vector<poet::corpus::Poem>& poems) {
  return poet::corpus::format_corpus(poems);
}

}  // namespace fixtures
