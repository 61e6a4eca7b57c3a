// Command-line front end. Everything goes through the C API in poet/poet.h;
// nlohmann/json is used only to pretty-print returned JSON.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "poet/poet.h"

using nlohmann::json;

namespace {

struct StringOut {
  char* ptr = nullptr;
  ~StringOut() { poet_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

int report_failure(int code) {
  std::cerr << "error: " << poet_last_error() << "\n";
  (void)code;
  return 1;
}

std::string default_emb_path(const std::string& artifacts) {
  return (std::filesystem::path(artifacts) / "aw2v.bin").string();
}

std::string default_vocab_path(const std::string& artifacts) {
  return (std::filesystem::path(artifacts) / "vocab.txt").string();
}

const char* resolve_data_dir(std::string& data_dir) {
  if (data_dir == "none") return nullptr;
  if (!data_dir.empty()) return data_dir.c_str();
  if (std::filesystem::exists("data/tone.tsv")) {
    data_dir = "data";
    return data_dir.c_str();
  }
  return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage Chinese quatrain generator: keyword extraction plus a "
               "conditional variational autoencoder with a hybrid decoder"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a corpus and write training artifacts");
  std::string in_corpus, in_out, in_lexicon;
  uint32_t in_vocab = 6000, in_valid = 2000, in_test = 1000;
  uint64_t in_seed = 7;
  ingest->add_option("--corpus", in_corpus, "Corpus file")->required();
  ingest->add_option("--out", in_out, "Artifacts output directory")->required();
  ingest->add_option("--vocab-size", in_vocab, "Content vocabulary size");
  ingest->add_option("--valid", in_valid, "Validation poems");
  ingest->add_option("--test", in_test, "Test poems");
  ingest->add_option("--seed", in_seed, "Split shuffle seed");
  ingest->add_option("--lexicon", in_lexicon, "Word list for segmentation (default: characters)");

  // keywords
  auto* keywords = app.add_subcommand("keywords", "Extract four keywords from a query");
  std::string kw_query, kw_artifacts = "artifacts", kw_emb;
  keywords->add_option("--query", kw_query, "Input text")->required();
  keywords->add_option("--artifacts", kw_artifacts, "Artifacts directory");
  keywords->add_option("--emb", kw_emb, "Embedding file (default <artifacts>/aw2v.bin)");

  // train-aw2v
  auto* taw = app.add_subcommand("train-aw2v", "Train character embeddings with slice augmentation");
  std::string taw_corpus, taw_out, taw_slices = "all";
  bool taw_noslices = false;
  poet_aw2v_options taw_opts{};
  taw_opts.subsample = -1;
  taw->add_option("--corpus", taw_corpus, "Artifacts directory from ingest")->required();
  taw->add_option("--out", taw_out, "Embedding output file")->required();
  taw->add_flag("--no-slices", taw_noslices, "Train on plain lines only");
  taw->add_option("--slices", taw_slices, "all | pairs | none");
  taw->add_option("--dim", taw_opts.dim, "Embedding dimension (default 128)");
  taw->add_option("--window", taw_opts.window, "Context window (default 3)");
  taw->add_option("--negatives", taw_opts.negatives, "Negative samples (default 5)");
  taw->add_option("--epochs", taw_opts.epochs, "Epochs (default 15)");
  taw->add_option("--step", taw_opts.step_size, "Initial step size (default 0.025)");
  taw->add_option("--subsample", taw_opts.subsample, "Subsample threshold (default 1e-4)");
  taw->add_option("--seed", taw_opts.seed, "Seed");

  // train-cvae
  auto* tcv = app.add_subcommand("train-cvae", "Train the quatrain model");
  std::string tcv_corpus, tcv_emb, tcv_config, tcv_out, tcv_decoder;
  tcv->add_option("--corpus", tcv_corpus, "Artifacts directory from ingest")->required();
  tcv->add_option("--emb", tcv_emb, "Embedding file")->required();
  tcv->add_option("--config", tcv_config, "key=value training configuration");
  tcv->add_option("--out", tcv_out, "Checkpoint output file")->required();
  tcv->add_option("--decoder", tcv_decoder, "hybrid | rnn-only")
      ->check(CLI::IsMember({"hybrid", "rnn-only"}));

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a quatrain for a query");
  std::string gen_model, gen_query, gen_artifacts = "artifacts", gen_emb, gen_data;
  poet_generate_options gen_opts{};
  bool gen_json = false, gen_filter = false;
  gen->add_option("--model", gen_model, "Checkpoint file")->required();
  gen->add_option("--query", gen_query, "Writing intent")->required();
  gen->add_option("--form", gen_opts.form, "Characters per line: 5 or 7")
      ->check(CLI::IsMember({5, 7}));
  gen->add_option("--temp", gen_opts.temperature, "Sampling temperature (0 = greedy)");
  gen->add_option("--top-k", gen_opts.top_k, "Top-k sampling cutoff (0 = off)");
  gen->add_option("--candidates", gen_opts.candidates_per_line, "Candidates per line");
  gen->add_option("--seed", gen_opts.seed, "Seed");
  gen->add_flag("--rse-filter", gen_filter, "Keep the best rhythm-scoring candidate per line");
  gen->add_flag("--json", gen_json, "Emit one JSON object");
  gen->add_option("--artifacts", gen_artifacts, "Artifacts directory");
  gen->add_option("--emb", gen_emb, "Embedding file (default <artifacts>/aw2v.bin)");
  gen->add_option("--data", gen_data, "Tone/rhyme/template directory ('none' disables)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string ev_model, ev_corpus, ev_metric = "all", ev_split = "test", ev_emb, ev_data;
  uint32_t ev_limit = 0;
  uint64_t ev_seed = 0;
  ev->add_option("--model", ev_model, "Checkpoint file")->required();
  ev->add_option("--corpus", ev_corpus, "Artifacts directory from ingest")->required();
  ev->add_option("--metric", ev_metric, "rse | bleu | ppl | all")
      ->check(CLI::IsMember({"rse", "bleu", "ppl", "all"}));
  ev->add_option("--split", ev_split, "train | valid | test")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  ev->add_option("--limit", ev_limit, "Evaluate at most N poems (0 = all)");
  ev->add_option("--seed", ev_seed, "Generation seed for BLEU/RSE");
  ev->add_option("--emb", ev_emb, "Embedding file (default <corpus>/aw2v.bin)");
  ev->add_option("--data", ev_data, "Tone/rhyme/template directory ('none' disables)");

  // similar
  auto* sim = app.add_subcommand("similar", "Nearest neighbours of a character");
  std::string sim_emb, sim_word, sim_vocab, sim_artifacts = "artifacts";
  uint32_t sim_k = 10;
  sim->add_option("--emb", sim_emb, "Embedding file")->required();
  sim->add_option("--word", sim_word, "Query character")->required();
  sim->add_option("-k,--k", sim_k, "Neighbour count");
  sim->add_option("--vocab", sim_vocab, "Vocabulary file (default <artifacts>/vocab.txt)");
  sim->add_option("--artifacts", sim_artifacts, "Artifacts directory");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  int32_t gc_seeds = 5;
  uint64_t gc_seed = 1234;
  gc->add_option("--seeds", gc_seeds, "Random shapes per layer");
  gc->add_option("--seed", gc_seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  if (*ingest) {
    poet_ingest_options opts{};
    opts.vocab_size = in_vocab;
    opts.valid_n = in_valid;
    opts.test_n = in_test;
    opts.seed = in_seed;
    opts.lexicon_path = in_lexicon.empty() ? nullptr : in_lexicon.c_str();
    StringOut stats;
    if (poet_ingest(in_corpus.c_str(), in_out.c_str(), &opts, &stats.ptr) != POET_OK)
      return report_failure(1);
    std::cout << stats.str() << "\n";
    return 0;
  }

  if (*keywords) {
    if (kw_emb.empty()) kw_emb = default_emb_path(kw_artifacts);
    poet_intent* intent = nullptr;
    poet_embeddings* emb = nullptr;
    if (poet_intent_open(kw_artifacts.c_str(), &intent) != POET_OK) return report_failure(1);
    std::unique_ptr<poet_intent, decltype(&poet_intent_close)> intent_guard(intent, poet_intent_close);
    if (poet_embeddings_open(kw_emb.c_str(), default_vocab_path(kw_artifacts).c_str(), &emb) != POET_OK)
      return report_failure(1);
    std::unique_ptr<poet_embeddings, decltype(&poet_embeddings_close)> emb_guard(emb, poet_embeddings_close);
    StringOut out;
    if (poet_keywords(intent, emb, kw_query.c_str(), &out.ptr) != POET_OK) return report_failure(1);
    std::cout << out.str() << "\n";
    return 0;
  }

  if (*taw) {
    if (taw_noslices) taw_slices = "none";
    if (taw_slices == "all")
      taw_opts.slices = 1;
    else if (taw_slices == "pairs")
      taw_opts.slices = 2;
    else if (taw_slices == "none")
      taw_opts.slices = 0;
    else {
      std::cerr << "error: --slices must be all, pairs or none\n";
      return 2;
    }
    if (poet_train_aw2v(taw_corpus.c_str(), taw_out.c_str(), &taw_opts) != POET_OK)
      return report_failure(1);
    std::cout << "embeddings written to " << taw_out << "\n";
    return 0;
  }

  if (*tcv) {
    StringOut summary;
    if (poet_train_cvae(tcv_corpus.c_str(), tcv_emb.c_str(),
                        tcv_config.empty() ? nullptr : tcv_config.c_str(), tcv_out.c_str(),
                        tcv_decoder.empty() ? nullptr : tcv_decoder.c_str(),
                        &summary.ptr) != POET_OK)
      return report_failure(1);
    std::cout << summary.str() << "\n";
    return 0;
  }

  if (*gen) {
    if (gen_emb.empty()) gen_emb = default_emb_path(gen_artifacts);
    gen_opts.rse_filter = gen_filter ? 1 : 0;
    poet_model* model = nullptr;
    if (poet_model_open(gen_model.c_str(), gen_artifacts.c_str(), gen_emb.c_str(),
                        resolve_data_dir(gen_data), &model) != POET_OK)
      return report_failure(1);
    std::unique_ptr<poet_model, decltype(&poet_model_close)> guard(model, poet_model_close);
    StringOut out;
    if (poet_generate(model, gen_query.c_str(), &gen_opts, &out.ptr) != POET_OK)
      return report_failure(1);
    if (gen_json) {
      std::cout << out.str() << "\n";
    } else {
      const json j = json::parse(out.str());
      std::cout << "query:    " << j["query"].get<std::string>() << "\n";
      std::cout << "keywords:";
      for (const auto& k : j["keywords"]) std::cout << ' ' << k.get<std::string>();
      std::cout << "\n\n";
      for (size_t i = 0; i < j["lines"].size(); ++i)
        std::cout << "  " << j["lines"][i].get<std::string>() << "    (rhythm "
                  << j["rse"][i].get<double>() << ")\n";
    }
    return 0;
  }

  if (*ev) {
    if (ev_emb.empty()) ev_emb = default_emb_path(ev_corpus);
    poet_model* model = nullptr;
    if (poet_model_open(ev_model.c_str(), ev_corpus.c_str(), ev_emb.c_str(),
                        resolve_data_dir(ev_data), &model) != POET_OK)
      return report_failure(1);
    std::unique_ptr<poet_model, decltype(&poet_model_close)> guard(model, poet_model_close);
    StringOut out;
    if (poet_eval(model, ev_metric.c_str(), ev_split.c_str(), ev_limit, ev_seed, &out.ptr) != POET_OK)
      return report_failure(1);
    std::cout << out.str() << "\n";
    return 0;
  }

  if (*sim) {
    if (sim_vocab.empty()) sim_vocab = default_vocab_path(sim_artifacts);
    poet_embeddings* emb = nullptr;
    if (poet_embeddings_open(sim_emb.c_str(), sim_vocab.c_str(), &emb) != POET_OK)
      return report_failure(1);
    std::unique_ptr<poet_embeddings, decltype(&poet_embeddings_close)> guard(emb, poet_embeddings_close);
    StringOut out;
    if (poet_similar(emb, sim_word.c_str(), sim_k, &out.ptr) != POET_OK) return report_failure(1);
    const json j = json::parse(out.str());
    for (const auto& e : j)
      std::printf("%s\t%.4f\n", e["word"].get<std::string>().c_str(), e["similarity"].get<double>());
    return 0;
  }

  if (*gc) {
    StringOut out;
    const int rc = poet_gradcheck(gc_seeds, gc_seed, &out.ptr);
    if (out.ptr) {
      const json j = json::parse(out.str());
      for (const auto& e : j)
        std::printf("%-24s max_rel_err %.3e  %s\n", e["name"].get<std::string>().c_str(),
                    e["max_rel_err"].get<double>(), e["pass"].get<bool>() ? "PASS" : "FAIL");
    }
    if (rc != POET_OK) return report_failure(1);
    return 0;
  }

  return 2;
}
