#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "poet/corpus.hpp"

using namespace poet;
using namespace poet::corpus;

TEST_CASE("parse_corpus handles empty input") { CHECK(parse_corpus("").empty()); }

TEST_CASE("parse_corpus reads one quatrain block") {
  const auto poems = parse_corpus("春眠不觉晓\n处处闻啼鸟\n夜来风雨声\n花落知多少\n");
  REQUIRE(poems.size() == 1);
  CHECK(poems[0].is_quatrain());
  CHECK(poems[0].lines.size() == 4);
  CHECK(poems[0].lines[0].length() == 5);
}

TEST_CASE("parse_corpus keeps non-quatrain blocks as poems") {
  const auto poems = parse_corpus("山水风花雪\n山水风花雪\n山水风花雪月\n山水风花雪\n");
  REQUIRE(poems.size() == 1);
  CHECK(poems[0].lines.size() == 4);
  CHECK_FALSE(poems[0].is_quatrain());  // 5,5,6,5
}

TEST_CASE("parse_corpus strips punctuation and splits on it") {
  const auto poems = parse_corpus("千山鸟飞绝，万径人踪灭。\n孤舟蓑笠翁，独钓寒江雪。\n");
  REQUIRE(poems.size() == 1);
  CHECK(poems[0].lines.size() == 4);
  CHECK(poems[0].is_quatrain());
  CHECK(poems[0].lines[0].text() == "千山鸟飞绝");
}

TEST_CASE("parse_corpus reads titles and separates blocks on blank lines") {
  const auto poems = parse_corpus(
      "#title 静夜思\n床前明月光\n疑是地上霜\n举头望明月\n低头思故乡\n\n#title 其二\n白日依山尽\n");
  REQUIRE(poems.size() == 2);
  CHECK(poems[0].title == "静夜思");
  CHECK(poems[1].title == "其二");
  CHECK(poems[0].source_id != poems[1].source_id);
}

TEST_CASE("parse_corpus reports the offending block on bad bytes") {
  std::string bad = "山水风花雪\n\n";
  bad += static_cast<char>(0xFF);
  bad += "\n";
  CHECK_THROWS_WITH_AS(parse_corpus(bad), doctest::Contains("block 1"), Error);
}

TEST_CASE("filter_quatrains") {
  SUBCASE("empty") { CHECK(filter_quatrains({}).empty()); }

  SUBCASE("drops an eight-line poem") {
    auto q = fixtures::quatrain({"山水风花雪", "月春秋江天", "人日云雨夜", "松竹石鸟飞"});
    Poem long_poem;
    for (int i = 0; i < 8; ++i) long_poem.lines.push_back(fixtures::line("山水风花雪"));
    const auto out = filter_quatrains({q, long_poem});
    REQUIRE(out.size() == 1);
    CHECK(out[0].lines[0].text() == "山水风花雪");
  }

  SUBCASE("matches an independent per-poem predicate scan") {
    Rng rng(42);
    std::vector<Poem> mixed;
    for (int i = 0; i < 60; ++i) {
      Poem p;
      p.source_id = "m:" + std::to_string(i);
      const size_t nlines = 1 + rng.below(6);
      for (size_t l = 0; l < nlines; ++l) {
        Line line;
        const size_t len = 4 + rng.below(5);
        for (size_t c = 0; c < len; ++c)
          line.chars.push_back(fixtures::char_pool()[rng.below(40)]);
        p.lines.push_back(line);
      }
      mixed.push_back(p);
    }
    mixed.push_back(fixtures::quatrain({"山水风花雪", "月春秋江天", "人日云雨夜", "松竹石鸟飞"}));

    // oracle: hand-rolled predicate, no reuse of is_quatrain()
    size_t expected = 0;
    for (const Poem& p : mixed) {
      if (p.lines.size() != 4) continue;
      std::set<size_t> lens;
      for (const Line& l : p.lines) lens.insert(l.length());
      if (lens.size() == 1 && (*lens.begin() == 5 || *lens.begin() == 7)) ++expected;
    }
    const auto out = filter_quatrains(mixed);
    CHECK(out.size() == expected);

    // idempotence
    CHECK(filter_quatrains(out).size() == out.size());
  }
}

TEST_CASE("build_vocabulary") {
  SUBCASE("single repeated character") {
    auto p = fixtures::quatrain({"山山山山山", "山山山山山", "山山山山山", "山山山山山"});
    const Vocabulary v = build_vocabulary({p}, 1);
    CHECK(v.size() == 6);
    CHECK(v.id("山") == 5);
    CHECK(v.id("水") == Vocabulary::kUnk);
  }

  SUBCASE("frequency order wins") {
    Poem p;
    p.lines.push_back(fixtures::line("山山山水水"));
    const Vocabulary v = build_vocabulary({p}, 1);
    CHECK(v.contains("山"));
    CHECK_FALSE(v.contains("水"));
  }

  SUBCASE("ids match a count-then-sort oracle") {
    Rng rng(7);
    Poem p;
    for (int l = 0; l < 6; ++l) {
      Line line;
      for (int c = 0; c < 7; ++c) line.chars.push_back(fixtures::char_pool()[rng.below(15)]);
      p.lines.push_back(line);
    }
    // oracle: independent count + sort by (count desc, codepoint asc)
    std::map<std::string, int> counts;
    for (const Line& l : p.lines)
      for (const auto& c : l.chars) counts[c]++;
    std::vector<std::pair<std::string, int>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return utf8_codepoint(a.first) < utf8_codepoint(b.first);
    });
    const size_t size = std::min<size_t>(10, items.size());
    const Vocabulary v = build_vocabulary({p}, 10);
    for (size_t i = 0; i < size; ++i)
      CHECK(v.id(items[i].first) == Vocabulary::kFirstContent + static_cast<int32_t>(i));
  }

  SUBCASE("lookup round-trips for in-vocab symbols") {
    const auto poems = fixtures::random_quatrains(20, 5, 3);
    const Vocabulary v = build_vocabulary(poems, 30);
    for (int32_t id = Vocabulary::kFirstContent; id < v.size(); ++id)
      CHECK(v.id(v.symbol(id)) == id);
  }
}

TEST_CASE("vocabulary file format and round trip") {
  const auto poems = fixtures::random_quatrains(10, 5, 11);
  const Vocabulary v = build_vocabulary(poems, 12);
  const std::string text = v.to_text();
  CHECK(text.rfind("PAD\nBOS\nEOS\nUNK\nSEP\n", 0) == 0);
  const Vocabulary u = Vocabulary::from_text(text);
  CHECK(u.size() == v.size());
  for (int32_t id = 0; id < v.size(); ++id) CHECK(u.symbol(id) == v.symbol(id));
}

TEST_CASE("make_splits") {
  const auto poems = fixtures::random_quatrains(10, 5, 5);

  SUBCASE("sizes") {
    const DatasetSplit s = make_splits(poems, 1, 2, 1);
    CHECK(s.train.size() == 7);
    CHECK(s.valid.size() == 2);
    CHECK(s.test.size() == 1);
  }

  SUBCASE("same seed twice is identical") {
    const DatasetSplit a = make_splits(poems, 9, 2, 1);
    const DatasetSplit b = make_splits(poems, 9, 2, 1);
    for (size_t i = 0; i < a.valid.size(); ++i)
      CHECK(a.valid[i].source_id == b.valid[i].source_id);
    for (size_t i = 0; i < a.test.size(); ++i) CHECK(a.test[i].source_id == b.test[i].source_id);
  }

  SUBCASE("different seeds differ and partitions hold") {
    const auto many = fixtures::random_quatrains(100, 5, 6);
    const DatasetSplit a = make_splits(many, 1, 20, 10);
    const DatasetSplit b = make_splits(many, 2, 20, 10);
    auto ids = [](const std::vector<Poem>& ps) {
      std::set<std::string> s;
      for (const Poem& p : ps) s.insert(p.source_id);
      return s;
    };
    CHECK(ids(a.valid) != ids(b.valid));

    // set-membership oracle: pairwise disjoint, union = input
    const auto tr = ids(a.train), va = ids(a.valid), te = ids(a.test);
    std::set<std::string> all;
    all.insert(tr.begin(), tr.end());
    all.insert(va.begin(), va.end());
    all.insert(te.begin(), te.end());
    CHECK(all.size() == many.size());
    CHECK(tr.size() + va.size() + te.size() == many.size());
  }

  SUBCASE("insufficient poems is an error") { CHECK_THROWS_AS(make_splits(poems, 1, 8, 2), Error); }
}

TEST_CASE("vertical_slices") {
  SUBCASE("five-character quatrain yields five sequences of four") {
    const auto p = fixtures::quatrain({"山水风花雪", "月春秋江天", "人日云雨夜", "松竹石鸟飞"});
    const auto slices = vertical_slices(p);
    REQUIRE(slices.size() == 5);
    for (const auto& s : slices) CHECK(s.size() == 4);
  }

  SUBCASE("seven-character quatrain yields seven sequences") {
    const auto p = fixtures::random_quatrains(1, 7, 1)[0];
    CHECK(vertical_slices(p).size() == 7);
  }

  SUBCASE("first slice is the first column") {
    const auto p = fixtures::quatrain({"ABCDE", "FGHIJ", "KLMNO", "PQRST"});
    const auto slices = vertical_slices(p);
    CHECK(slices[0] == std::vector<std::string>{"A", "F", "K", "P"});
  }

  SUBCASE("column-wise read-back reconstructs the poem") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = fixtures::random_quatrains(1, seed % 2 ? 5 : 7, seed)[0];
      const auto slices = vertical_slices(p);
      for (size_t li = 0; li < 4; ++li)
        for (size_t c = 0; c < p.lines[li].length(); ++c)
          CHECK(slices[c][li] == p.lines[li].chars[c]);
    }
  }

  SUBCASE("pair-only mode slices lines three and four") {
    const auto p = fixtures::quatrain({"ABCDE", "FGHIJ", "KLMNO", "PQRST"});
    const auto slices = vertical_slices(p, SliceMode::PairOnly);
    REQUIRE(slices.size() == 5);
    CHECK(slices[0] == std::vector<std::string>{"K", "P"});
  }

  SUBCASE("non-quatrain is an error") {
    Poem p;
    p.lines.push_back(fixtures::line("山水风花雪"));
    CHECK_THROWS_AS(vertical_slices(p), Error);
  }
}

TEST_CASE("make_training_examples") {
  const auto p = fixtures::quatrain({"山水风花雪", "月春秋江天", "人日云雨夜", "松竹石鸟飞"});
  const std::vector<std::vector<std::string>> keywords = {{"山"}, {"月", "春"}, {"人"}, {"松"}};

  SUBCASE("contexts grow with the line index") {
    const auto exs = make_training_examples(p, keywords);
    REQUIRE(exs.size() == 4);
    CHECK(exs[0].context.empty());
    CHECK(exs[3].context.size() == 3);
    CHECK(exs[3].context[0].text() == "山水风花雪");
    CHECK(exs[3].context[2].text() == "人日云雨夜");
    CHECK(exs[1].keyword == std::vector<std::string>{"月", "春"});
  }

  SUBCASE("concatenating contexts and targets reconstructs the poem") {
    const auto exs = make_training_examples(p, keywords);
    for (int i = 0; i < 4; ++i) {
      std::vector<std::string> rebuilt;
      for (const Line& l : exs[static_cast<size_t>(i)].context) rebuilt.push_back(l.text());
      rebuilt.push_back(exs[static_cast<size_t>(i)].target.text());
      for (int li = 0; li <= i; ++li)
        CHECK(rebuilt[static_cast<size_t>(li)] == p.lines[static_cast<size_t>(li)].text());
    }
  }

  SUBCASE("keyword count must be four") {
    CHECK_THROWS_AS(make_training_examples(p, {{"山"}, {"月"}}), Error);
  }
}
