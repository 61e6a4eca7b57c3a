#include "poet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

namespace poet::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr size_t kWholeLineWindow = 64;  // lines are at most 7 tokens

std::vector<int32_t> sample_banned_tokens(bool allow_eos) {
  std::vector<int32_t> banned = {corpus::Vocabulary::kPad, corpus::Vocabulary::kBos,
                                 corpus::Vocabulary::kUnk, corpus::Vocabulary::kSep};
  if (!allow_eos) banned.push_back(corpus::Vocabulary::kEos);
  return banned;
}

int32_t pick_token(const std::vector<nn::real_t>& logits, const GenerationConfig& cfg, Rng& rng,
                   bool allow_eos) {
  const std::vector<int32_t> banned = sample_banned_tokens(allow_eos);
  auto is_banned = [&](int32_t id) {
    return std::find(banned.begin(), banned.end(), id) != banned.end();
  };

  if (cfg.temperature <= 0.0) {
    int32_t best = -1;
    for (int32_t i = 0; i < static_cast<int32_t>(logits.size()); ++i) {
      if (is_banned(i)) continue;
      if (best < 0 || logits[static_cast<size_t>(i)] > logits[static_cast<size_t>(best)]) best = i;
    }
    if (best < 0) throw Error("no sampleable token");
    return best;
  }

  struct Entry {
    int32_t id;
    double logit;
  };
  std::vector<Entry> entries;
  for (int32_t i = 0; i < static_cast<int32_t>(logits.size()); ++i)
    if (!is_banned(i)) entries.push_back({i, logits[static_cast<size_t>(i)] / cfg.temperature});
  if (entries.empty()) throw Error("no sampleable token");
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.logit != b.logit) return a.logit > b.logit;
    return a.id < b.id;
  });
  if (cfg.top_k > 0 && entries.size() > static_cast<size_t>(cfg.top_k))
    entries.resize(static_cast<size_t>(cfg.top_k));

  double mx = entries[0].logit;
  double z = 0;
  for (const Entry& e : entries) z += std::exp(e.logit - mx);
  double r = rng.uniform() * z;
  for (const Entry& e : entries) {
    r -= std::exp(e.logit - mx);
    if (r <= 0) return e.id;
  }
  return entries.back().id;
}

json round6(double v) {
  // stable textual form for reproducible reports
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << v;
  return json::parse(ss.str());
}

}  // namespace

Artifacts Artifacts::load(const std::string& dir) {
  Artifacts a;
  a.vocab = corpus::Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  a.lexicon = intent::Lexicon::load((fs::path(dir) / "lexicon.txt").string());
  a.graph = intent::WordGraph::load((fs::path(dir) / "graph.bin").string());
  return a;
}

RuleData RuleData::load(const std::string& dir) {
  RuleData r;
  r.tones = eval::ToneDictionary::load((fs::path(dir) / "tone.tsv").string());
  r.rhymes = eval::RhymeDictionary::load((fs::path(dir) / "rhyme.tsv").string());
  r.templates = eval::TonalTemplates::load((fs::path(dir) / "templates.txt").string());
  return r;
}

IngestStats ingest(const std::string& corpus_path, const std::string& out_dir,
                   const IngestOptions& opts) {
  const std::vector<corpus::Poem> poems = corpus::parse_corpus_file(corpus_path);
  const std::vector<corpus::Poem> quatrains = corpus::filter_quatrains(poems);
  if (quatrains.empty()) throw Error("corpus contains no quatrains");

  const corpus::Vocabulary vocab = corpus::build_vocabulary(quatrains, opts.vocab_size);
  const corpus::DatasetSplit split =
      corpus::make_splits(quatrains, opts.seed, opts.valid_n, opts.test_n);

  intent::Lexicon lexicon = opts.lexicon_path.empty()
                                ? intent::Lexicon::single_characters(vocab)
                                : intent::Lexicon::load(opts.lexicon_path);

  std::vector<std::vector<std::string>> units;
  for (const corpus::Poem& p : split.train)
    for (const corpus::Line& l : p.lines) units.push_back(intent::segment(l.text(), lexicon));
  intent::WordGraph graph = intent::build_graph(units, kWholeLineWindow);
  const intent::TextRankResult tr = intent::textrank(graph);
  graph.set_scores(tr.scores, tr.converged);

  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "train.txt").string(), corpus::format_corpus(split.train));
  write_file((fs::path(out_dir) / "valid.txt").string(), corpus::format_corpus(split.valid));
  write_file((fs::path(out_dir) / "test.txt").string(), corpus::format_corpus(split.test));
  vocab.save((fs::path(out_dir) / "vocab.txt").string());
  lexicon.save((fs::path(out_dir) / "lexicon.txt").string());
  graph.save((fs::path(out_dir) / "graph.bin").string());

  IngestStats stats;
  stats.poems = poems.size();
  stats.quatrains = quatrains.size();
  stats.train = split.train.size();
  stats.valid = split.valid.size();
  stats.test = split.test.size();
  stats.vocab_size = static_cast<size_t>(vocab.size());
  stats.graph_vertices = graph.vertex_count();
  stats.textrank_converged = tr.converged;

  json meta;
  meta["poems"] = stats.poems;
  meta["quatrains"] = stats.quatrains;
  meta["train"] = stats.train;
  meta["valid"] = stats.valid;
  meta["test"] = stats.test;
  meta["vocab_size"] = stats.vocab_size;
  meta["graph_vertices"] = stats.graph_vertices;
  meta["textrank_converged"] = stats.textrank_converged;
  meta["seed"] = opts.seed;
  write_file((fs::path(out_dir) / "meta.json").string(), meta.dump(2) + "\n");
  return stats;
}

std::vector<corpus::Poem> load_split(const std::string& dir, const std::string& name) {
  return corpus::parse_corpus_file((fs::path(dir) / (name + ".txt")).string());
}

std::vector<cvae::ExampleIds> split_examples(const std::vector<corpus::Poem>& poems,
                                             const Artifacts& artifacts) {
  std::vector<cvae::ExampleIds> out;
  for (const corpus::Poem& p : poems) {
    const auto keywords = intent::auto_keywords(p, artifacts.graph, artifacts.lexicon);
    for (const corpus::TrainingExample& ex : corpus::make_training_examples(p, keywords))
      out.push_back(cvae::encode_example(ex, artifacts.vocab));
  }
  return out;
}

LineResult generate_line(cvae::Model& model, const std::vector<std::string>& keyword_chars,
                         const std::vector<corpus::Line>& context, int line_index,
                         const GenerationConfig& cfg, Rng& rng) {
  if (context.size() > 3) throw Error("context may hold at most 3 lines");
  if (cfg.form != 5 && cfg.form != 7) throw Error("form must be 5 or 7");
  const corpus::Vocabulary& vocab = model.vocab();

  std::vector<int32_t> kw_ids;
  for (const std::string& c : keyword_chars) kw_ids.push_back(vocab.id(c));
  if (kw_ids.empty()) throw Error("empty keyword");
  std::vector<std::vector<int32_t>> ctx_ids;
  for (const corpus::Line& l : context) ctx_ids.push_back(vocab.encode(l));

  constexpr int kMaxRetries = 5;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    const bool final_attempt = attempt == kMaxRetries;
    nn::Tape tape;
    nn::Tape::Var* c = model.condition(tape, kw_ids, ctx_ids, line_index, false, nullptr);
    auto [mu_p, lv_p] = model.prior(tape, c);
    std::vector<double> eps(static_cast<size_t>(model.config().latent));
    for (double& v : eps) v = rng.normal();
    nn::Tape::Var* z = tape.reparameterize(mu_p, lv_p, eps);

    cvae::Model::DecodeState state = model.decode_begin(tape, z, c);
    std::vector<int32_t> tokens;
    int32_t prev = corpus::Vocabulary::kBos;
    bool ended_early = false;
    GenerationConfig step_cfg = cfg;
    if (final_attempt) step_cfg.temperature = 0.0;  // complete greedily
    while (static_cast<int>(tokens.size()) < cfg.form) {
      nn::Tape::Var* logits = model.decode_step(tape, state, prev, false, nullptr);
      const bool allow_eos = !final_attempt;
      const int32_t id = pick_token(logits->v, step_cfg, rng, allow_eos);
      if (id == corpus::Vocabulary::kEos) {
        ended_early = true;
        break;
      }
      tokens.push_back(id);
      prev = id;
    }
    if (ended_early && !final_attempt) continue;  // resample z and retry

    LineResult result;
    result.z = z->v;
    for (int32_t id : tokens) result.line.chars.push_back(vocab.symbol(id));
    return result;
  }
  throw Error("line generation failed");  // unreachable: final attempt cannot end early
}

GeneratedPoem generate_poem(cvae::Model& model, const Artifacts& artifacts,
                            const aw2v::EmbeddingMatrix& embeddings, const std::string& query,
                            const GenerationConfig& cfg, const RuleData& rules) {
  GeneratedPoem poem;
  poem.query = query;
  poem.seed = cfg.seed;
  poem.keywords =
      intent::extract_keywords(query, artifacts.graph, embeddings, artifacts.vocab, artifacts.lexicon);

  Rng rng(cfg.seed);
  for (int i = 1; i <= 4; ++i) {
    const intent::Keyword& kw = poem.keywords.keywords[static_cast<size_t>(i - 1)];
    const int n_cand = cfg.rse_filter ? std::max(1, cfg.candidates_per_line) : 1;
    LineResult best;
    double best_score = -1.0;
    for (int k = 0; k < n_cand; ++k) {
      LineResult cand = generate_line(model, kw.chars, poem.lines, i, cfg, rng);
      double score = 0.0;
      if (cfg.rse_filter) {
        std::vector<corpus::Line> hypothetical = poem.lines;
        hypothetical.push_back(cand.line);
        score = eval::rhy(cand.line, i, hypothetical, rules.tones, rules.rhymes, rules.templates);
      }
      if (score > best_score) {  // strict: ties keep the first generated
        best_score = score;
        best = std::move(cand);
      }
    }
    poem.lines.push_back(best.line);
    poem.z_draws.push_back(best.z);
  }

  for (int i = 0; i < 4; ++i)
    poem.per_line_rse[static_cast<size_t>(i)] =
        eval::rhy(poem.lines[static_cast<size_t>(i)], i + 1, poem.lines, rules.tones, rules.rhymes,
                  rules.templates);
  return poem;
}

std::string poem_to_json(const GeneratedPoem& poem) {
  json j;
  j["query"] = poem.query;
  json kws = json::array();
  for (const intent::Keyword& k : poem.keywords.keywords) kws.push_back(k.word);
  j["keywords"] = kws;
  json lines = json::array();
  for (const corpus::Line& l : poem.lines) lines.push_back(l.text());
  j["lines"] = lines;
  json rse = json::array();
  for (double r : poem.per_line_rse) rse.push_back(r);
  j["rse"] = rse;
  j["seed"] = poem.seed;
  return j.dump();
}

EvalReport evaluate_model(cvae::Model& model, const Artifacts& artifacts,
                          const aw2v::EmbeddingMatrix& embeddings,
                          const std::vector<corpus::Poem>& dataset, const std::string& metric,
                          const GenerationConfig& gen_cfg, const RuleData& rules,
                          size_t poem_limit) {
  if (metric != "ppl" && metric != "bleu" && metric != "rse" && metric != "all")
    throw Error("metric must be one of ppl, bleu, rse, all");
  if (dataset.empty()) throw Error("empty evaluation dataset");

  EvalReport report;
  std::vector<corpus::Poem> poems = dataset;
  if (poem_limit > 0 && poems.size() > poem_limit) poems.resize(poem_limit);
  report.poems_scored = poems.size();

  if (metric == "ppl" || metric == "all") {
    const auto examples = split_examples(poems, artifacts);
    const eval::PplReport ppl = eval::report_ppl(model, examples);
    report.has_ppl = true;
    report.ppl = ppl.ppl;
    report.nll = ppl.nll_per_char;
    report.kl = ppl.kl_per_line;
    report.ppl_total = ppl.ppl_total;
  }

  if (metric == "bleu" || metric == "rse" || metric == "all") {
    std::vector<corpus::Line> candidates;
    std::vector<std::vector<corpus::Line>> references;
    std::vector<std::vector<corpus::Line>> generated;
    std::vector<std::vector<corpus::Line>> truth;
    Rng seeder(gen_cfg.seed);
    for (const corpus::Poem& p : poems) {
      const auto keywords = intent::auto_keywords(p, artifacts.graph, artifacts.lexicon);
      GenerationConfig cfg = gen_cfg;
      cfg.form = static_cast<int>(p.lines[0].length());
      cfg.seed = seeder.raw();
      Rng rng(cfg.seed);
      std::vector<corpus::Line> lines;
      for (int i = 1; i <= 4; ++i) {
        std::vector<std::string> kw_chars = keywords[static_cast<size_t>(i - 1)];
        lines.push_back(generate_line(model, kw_chars, lines, i, cfg, rng).line);
      }
      for (int i = 0; i < 4; ++i) {
        candidates.push_back(lines[static_cast<size_t>(i)]);
        references.push_back({p.lines[static_cast<size_t>(i)]});
      }
      generated.push_back(lines);
      truth.push_back(p.lines);
    }
    if (metric == "bleu" || metric == "all") {
      report.has_bleu = true;
      report.bleu = eval::bleu(candidates, references);
    }
    if (metric == "rse" || metric == "all") {
      report.has_rse = true;
      report.rse = eval::rse_mean(generated, rules.tones, rules.rhymes, rules.templates);
      report.rse_ground_truth = eval::rse_mean(truth, rules.tones, rules.rhymes, rules.templates);
    }
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["poems"] = report.poems_scored;
  if (report.has_ppl) {
    j["ppl"] = round6(report.ppl);
    j["nll"] = round6(report.nll);
    j["kl"] = round6(report.kl);
    j["ppl_incl_kl"] = round6(report.ppl_total);
  }
  if (report.has_bleu) {
    json b = json::array();
    for (double v : report.bleu) b.push_back(round6(v));
    j["bleu"] = b;
  }
  if (report.has_rse) {
    j["rse"] = round6(report.rse);
    j["rse_ground_truth"] = round6(report.rse_ground_truth);
  }
  return j.dump();
}

}  // namespace poet::pipeline
