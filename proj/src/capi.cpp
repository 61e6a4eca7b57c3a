#include "poet/poet.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "poet/diagnostics.hpp"
#include "poet/pipeline.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const poet::Error& e) {
    return fail(POET_ERR_RUNTIME, e.what());
  } catch (const std::exception& e) {
    return fail(POET_ERR_RUNTIME, e.what());
  }
}

}  // namespace

struct poet_embeddings {
  poet::aw2v::EmbeddingMatrix matrix;
  poet::corpus::Vocabulary vocab;
};

struct poet_intent {
  poet::pipeline::Artifacts artifacts;
};

struct poet_model {
  poet::cvae::Model model;
  poet::pipeline::Artifacts artifacts;
  poet::aw2v::EmbeddingMatrix embeddings;
  poet::pipeline::RuleData rules;
  std::string artifacts_dir;
};

extern "C" {

const char* poet_last_error(void) { return g_last_error.c_str(); }

void poet_string_free(char* s) { std::free(s); }

int poet_ingest(const char* corpus_path, const char* out_dir, const poet_ingest_options* options,
                char** stats_json) {
  if (!corpus_path || !out_dir) return fail(POET_ERR_INVALID_ARGUMENT, "corpus path and output directory are required");
  return guarded([&] {
    poet::pipeline::IngestOptions opts;
    if (options) {
      if (options->vocab_size) opts.vocab_size = options->vocab_size;
      opts.valid_n = options->valid_n;
      opts.test_n = options->test_n;
      opts.seed = options->seed;
      if (options->lexicon_path) opts.lexicon_path = options->lexicon_path;
    }
    const poet::pipeline::IngestStats stats = poet::pipeline::ingest(corpus_path, out_dir, opts);
    json j;
    j["poems"] = stats.poems;
    j["quatrains"] = stats.quatrains;
    j["train"] = stats.train;
    j["valid"] = stats.valid;
    j["test"] = stats.test;
    j["vocab_size"] = stats.vocab_size;
    j["graph_vertices"] = stats.graph_vertices;
    j["textrank_converged"] = stats.textrank_converged;
    set_out(stats_json, j.dump());
    return static_cast<int>(POET_OK);
  });
}

int poet_train_aw2v(const char* artifacts_dir, const char* out_path,
                    const poet_aw2v_options* options) {
  if (!artifacts_dir || !out_path) return fail(POET_ERR_INVALID_ARGUMENT, "artifacts directory and output path are required");
  return guarded([&] {
    poet::aw2v::SgnsConfig cfg;
    poet::aw2v::AugmentMode mode = poet::aw2v::AugmentMode::SlicesAll;
    if (options) {
      if (options->dim) cfg.dim = options->dim;
      if (options->window) cfg.window = options->window;
      if (options->negatives) cfg.negatives = options->negatives;
      if (options->epochs) cfg.epochs = options->epochs;
      if (options->step_size > 0) cfg.step_size = options->step_size;
      cfg.subsample_threshold = options->subsample < 0 ? 1e-4 : options->subsample;
      cfg.seed = options->seed;
      if (options->slices == 0) mode = poet::aw2v::AugmentMode::None;
      if (options->slices == 2) mode = poet::aw2v::AugmentMode::SlicesPairOnly;
    }
    const auto vocab =
        poet::corpus::Vocabulary::load((std::filesystem::path(artifacts_dir) / "vocab.txt").string());
    const auto poems = poet::pipeline::load_split(artifacts_dir, "train");
    const auto sequences = poet::aw2v::augment_corpus(poet::corpus::filter_quatrains(poems), mode);
    poet::aw2v::TrainResult result = poet::aw2v::train_embeddings(sequences, cfg, vocab);
    result.embeddings.save(out_path);
    return static_cast<int>(POET_OK);
  });
}

int poet_embeddings_open(const char* emb_path, const char* vocab_path, poet_embeddings** out) {
  if (!emb_path || !vocab_path || !out)
    return fail(POET_ERR_INVALID_ARGUMENT, "embedding path, vocabulary path and out handle are required");
  return guarded([&] {
    auto handle = std::make_unique<poet_embeddings>();
    handle->matrix = poet::aw2v::EmbeddingMatrix::load(emb_path);
    handle->vocab = poet::corpus::Vocabulary::load(vocab_path);
    if (handle->matrix.rows != handle->vocab.size())
      throw poet::Error("embedding matrix does not match vocabulary size");
    *out = handle.release();
    return static_cast<int>(POET_OK);
  });
}

void poet_embeddings_close(poet_embeddings* handle) { delete handle; }

int poet_similar(const poet_embeddings* handle, const char* word, uint32_t k, char** out_json) {
  if (!handle || !word || !out_json)
    return fail(POET_ERR_INVALID_ARGUMENT, "handle, word and out_json are required");
  return guarded([&] {
    const auto neighbors = poet::aw2v::nearest_neighbors(handle->matrix, handle->vocab, word, k);
    json j = json::array();
    for (const auto& n : neighbors) {
      json e;
      e["word"] = n.word;
      e["similarity"] = n.similarity;
      j.push_back(e);
    }
    set_out(out_json, j.dump());
    return static_cast<int>(POET_OK);
  });
}

int poet_intent_open(const char* artifacts_dir, poet_intent** out) {
  if (!artifacts_dir || !out) return fail(POET_ERR_INVALID_ARGUMENT, "artifacts directory and out handle are required");
  return guarded([&] {
    auto handle = std::make_unique<poet_intent>();
    handle->artifacts = poet::pipeline::Artifacts::load(artifacts_dir);
    *out = handle.release();
    return static_cast<int>(POET_OK);
  });
}

void poet_intent_close(poet_intent* handle) { delete handle; }

int poet_keywords(const poet_intent* handle, const poet_embeddings* embeddings, const char* query,
                  char** out_json) {
  if (!handle || !embeddings || !query || !out_json)
    return fail(POET_ERR_INVALID_ARGUMENT, "handle, embeddings, query and out_json are required");
  return guarded([&] {
    const poet::intent::KeywordSet ks = poet::intent::extract_keywords(
        query, handle->artifacts.graph, embeddings->matrix, handle->artifacts.vocab,
        handle->artifacts.lexicon);
    json j = json::array();
    for (const auto& k : ks.keywords) j.push_back(k.word);
    set_out(out_json, j.dump());
    return static_cast<int>(POET_OK);
  });
}

int poet_train_cvae(const char* artifacts_dir, const char* emb_path, const char* config_path,
                    const char* out_path, const char* decoder, char** summary_json) {
  if (!artifacts_dir || !emb_path || !out_path)
    return fail(POET_ERR_INVALID_ARGUMENT, "artifacts directory, embedding path and output path are required");
  return guarded([&] {
    poet::cvae::Config cfg =
        config_path ? poet::cvae::Config::parse_file(config_path) : poet::cvae::Config{};
    if (decoder) {
      const std::string d = decoder;
      if (d == "hybrid")
        cfg.hybrid = true;
      else if (d == "rnn-only")
        cfg.hybrid = false;
      else
        throw poet::Error("decoder must be hybrid or rnn-only");
    }
    const poet::pipeline::Artifacts artifacts = poet::pipeline::Artifacts::load(artifacts_dir);
    const poet::aw2v::EmbeddingMatrix emb = poet::aw2v::EmbeddingMatrix::load(emb_path);
    if (emb.rows != artifacts.vocab.size())
      throw poet::Error("embedding matrix does not match the ingested vocabulary");
    cfg.embed_dim = emb.dim;

    const auto train_poems = poet::pipeline::load_split(artifacts_dir, "train");
    const auto valid_poems = poet::pipeline::load_split(artifacts_dir, "valid");
    const auto train_examples = poet::pipeline::split_examples(train_poems, artifacts);
    const auto valid_examples = poet::pipeline::split_examples(valid_poems, artifacts);

    poet::cvae::TrainResult result =
        poet::cvae::train(cfg, artifacts.vocab, emb, train_examples, valid_examples);
    result.model->save(out_path);

    json j;
    j["epochs_run"] = result.epochs_run;
    j["best_epoch"] = result.best_epoch;
    j["early_stopped"] = result.early_stopped;
    j["diverged"] = result.diverged;
    json hist = json::array();
    for (const auto& e : result.history) {
      json h;
      h["train_total"] = e.train_total;
      h["train_recon"] = e.train_recon;
      h["train_kl"] = e.train_kl;
      h["train_dcnn"] = e.train_dcnn;
      h["valid_ppl"] = e.valid_ppl;
      h["valid_kl"] = e.valid_kl;
      hist.push_back(h);
    }
    j["history"] = hist;
    set_out(summary_json, j.dump());
    return result.diverged ? fail(POET_ERR_RUNTIME, "training diverged; last good checkpoint saved")
                           : static_cast<int>(POET_OK);
  });
}

int poet_model_open(const char* checkpoint_path, const char* artifacts_dir, const char* emb_path,
                    const char* data_dir, poet_model** out) {
  if (!checkpoint_path || !artifacts_dir || !emb_path || !out)
    return fail(POET_ERR_INVALID_ARGUMENT, "checkpoint, artifacts directory, embedding path and out handle are required");
  return guarded([&] {
    poet::cvae::Model model = poet::cvae::Model::load(checkpoint_path);
    poet::pipeline::Artifacts artifacts = poet::pipeline::Artifacts::load(artifacts_dir);
    if (model.vocab().size() != artifacts.vocab.size())
      throw poet::Error("checkpoint vocabulary does not match the artifacts directory");
    poet::aw2v::EmbeddingMatrix emb = poet::aw2v::EmbeddingMatrix::load(emb_path);
    if (emb.rows != artifacts.vocab.size())
      throw poet::Error("embedding matrix does not match the artifacts vocabulary");
    poet::pipeline::RuleData rules;
    if (data_dir) rules = poet::pipeline::RuleData::load(data_dir);
    auto handle = new poet_model{std::move(model), std::move(artifacts), std::move(emb),
                                 std::move(rules), artifacts_dir};
    *out = handle;
    return static_cast<int>(POET_OK);
  });
}

void poet_model_close(poet_model* handle) { delete handle; }

int poet_generate(poet_model* handle, const char* query, const poet_generate_options* options,
                  char** out_json) {
  if (!handle || !query || !out_json)
    return fail(POET_ERR_INVALID_ARGUMENT, "handle, query and out_json are required");
  return guarded([&] {
    poet::pipeline::GenerationConfig cfg;
    if (options) {
      if (options->form) cfg.form = options->form;
      cfg.temperature = options->temperature;
      cfg.top_k = options->top_k;
      if (options->candidates_per_line) cfg.candidates_per_line = options->candidates_per_line;
      cfg.seed = options->seed;
      cfg.rse_filter = options->rse_filter != 0;
    }
    const poet::pipeline::GeneratedPoem poem = poet::pipeline::generate_poem(
        handle->model, handle->artifacts, handle->embeddings, query, cfg, handle->rules);
    set_out(out_json, poet::pipeline::poem_to_json(poem));
    return static_cast<int>(POET_OK);
  });
}

int poet_eval(poet_model* handle, const char* metric, const char* split, uint32_t poem_limit,
              uint64_t seed, char** out_json) {
  if (!handle || !metric || !split || !out_json)
    return fail(POET_ERR_INVALID_ARGUMENT, "handle, metric, split and out_json are required");
  return guarded([&] {
    const auto poems = poet::pipeline::load_split(handle->artifacts_dir, split);
    poet::pipeline::GenerationConfig cfg;
    cfg.seed = seed;
    const poet::pipeline::EvalReport report = poet::pipeline::evaluate_model(
        handle->model, handle->artifacts, handle->embeddings, poems, metric, cfg, handle->rules,
        poem_limit);
    set_out(out_json, poet::pipeline::report_to_json(report));
    return static_cast<int>(POET_OK);
  });
}

int poet_gradcheck(int32_t seeds_per_layer, uint64_t seed, char** out_json) {
  return guarded([&] {
    if (seeds_per_layer <= 0) seeds_per_layer = 5;
    const auto checks = poet::diagnostics::gradcheck_suite(seeds_per_layer, seed ? seed : 1234);
    bool all_pass = true;
    json j = json::array();
    for (const auto& c : checks) {
      json e;
      e["name"] = c.name;
      e["max_rel_err"] = c.max_rel_err;
      e["seeds"] = c.seeds;
      e["pass"] = c.pass;
      j.push_back(e);
      all_pass = all_pass && c.pass;
    }
    set_out(out_json, j.dump());
    return all_pass ? static_cast<int>(POET_OK)
                    : fail(POET_ERR_RUNTIME, "gradient check failed for at least one layer");
  });
}

}  // extern "C"
