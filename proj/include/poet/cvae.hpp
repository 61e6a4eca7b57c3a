#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poet/aw2v.hpp"
#include "poet/corpus.hpp"
#include "poet/nn.hpp"

namespace poet::cvae {

struct Config {
  int embed_dim = 128;
  int hidden = 128;
  int layers = 4;  // encoder and decoder stacks
  int ctx_layers = 1;
  int latent = 64;
  std::array<int, 3> dcnn_maps = {256, 128, 64};
  double alpha = 0.6;
  double rate = 0.001;  // AdaDelta global rate multiplier
  double dropout = 0.2;
  int batch = 64;
  int anneal_steps = 5000;
  int patience = 3;
  int max_epochs = 30;
  uint64_t seed = 1;
  bool context_in_c = true;
  bool hybrid = true;  // false: plain RNN-decoder ablation

  int condition_dim() const { return embed_dim + (context_in_c ? 2 * hidden : 0) + 4; }

  std::string serialize() const;
  static Config parse(const std::string& text);          // key=value lines
  static Config parse_file(const std::string& path);
};

// Token-id view of a training example.
struct ExampleIds {
  std::vector<int32_t> keyword;
  std::vector<std::vector<int32_t>> context;  // per previous line
  std::vector<int32_t> target;                // without EOS
  int line_index = 1;                         // 1..4
};

ExampleIds encode_example(const corpus::TrainingExample& ex, const corpus::Vocabulary& vocab);

struct LossBreakdown {
  double recon_nll = 0;  // per-character mean, RNN head
  double kl = 0;         // per-line mean
  double dcnn_nll = 0;   // per-character mean, deCNN head
  double beta = 0;
  double alpha = 0;
  double total = 0;
};

double anneal_weight(int64_t step, int64_t ramp_steps);

class Model {
 public:
  // Fresh model; embedding rows come from the trained AW2V matrix.
  Model(const Config& cfg, corpus::Vocabulary vocab, const aw2v::EmbeddingMatrix& emb);
  // Restore from checkpointed parameters.
  Model(const Config& cfg, corpus::Vocabulary vocab, nn::ParameterStore params);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const Config& config() const { return cfg_; }
  const corpus::Vocabulary& vocab() const { return vocab_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  void save(const std::string& path) const;
  static Model load(const std::string& path);

  // --- graph builders (shared by training, evaluation and generation) ---

  nn::Tape::Var* encode(nn::Tape& tape, const ExampleIds& ex, bool train, Rng* rng);

  nn::Tape::Var* condition(nn::Tape& tape, const std::vector<int32_t>& keyword,
                           const std::vector<std::vector<int32_t>>& context, int line_index,
                           bool train, Rng* rng);

  std::pair<nn::Tape::Var*, nn::Tape::Var*> recognize(nn::Tape& tape, nn::Tape::Var* h,
                                                      nn::Tape::Var* c);
  std::pair<nn::Tape::Var*, nn::Tape::Var*> prior(nn::Tape& tape, nn::Tape::Var* c);

  struct DecodeState {
    std::vector<std::pair<nn::Tape::Var*, nn::Tape::Var*>> hc;  // per layer
    nn::Tape::Var* features = nullptr;  // (maps[2], 15) when hybrid
    int position = 0;
  };

  DecodeState decode_begin(nn::Tape& tape, nn::Tape::Var* z, nn::Tape::Var* c);
  // One autoregressive step; prev_token is BOS for the first position.
  nn::Tape::Var* decode_step(nn::Tape& tape, DecodeState& state, int32_t prev_token, bool train,
                             Rng* rng);
  // Token-independent head on the deconvolution features, position t.
  nn::Tape::Var* dcnn_logits(nn::Tape& tape, const DecodeState& state, int t);

  struct DecodeOutputs {
    std::vector<nn::Tape::Var*> rnn_logits;   // T entries
    std::vector<nn::Tape::Var*> dcnn_logits;  // T entries when hybrid, else empty
  };

  // Teacher-forced decode over target+EOS (T in {6,8}).
  DecodeOutputs decode_hybrid(nn::Tape& tape, nn::Tape::Var* z, nn::Tape::Var* c,
                              const std::vector<int32_t>& teacher_with_eos, bool train, Rng* rng);

  struct BatchLoss {
    LossBreakdown breakdown;
    nn::Tape::Var* total = nullptr;
  };

  // eps: one standard-normal draw per example (latent dims); empty entries mean 0.
  BatchLoss loss(nn::Tape& tape, const std::vector<ExampleIds>& batch, double beta,
                 const std::vector<std::vector<double>>& eps, bool train, Rng* rng);

 private:
  void build_params(Rng& rng, const aw2v::EmbeddingMatrix* emb);
  nn::Tape::Var* embed_tokens_mean(nn::Tape& tape, const std::vector<int32_t>& ids);

  Config cfg_;
  corpus::Vocabulary vocab_;
  nn::ParameterStore params_;
  nn::BrnnParams enc_, ctx_;
  std::vector<nn::LstmParams> dec_;
  void wire_layer_views();
};

struct EpochStats {
  double train_total = 0, train_recon = 0, train_kl = 0, train_dcnn = 0;
  double valid_ppl = 0, valid_kl = 0;
};

struct TrainResult {
  std::optional<Model> model;  // best validation checkpoint (last good one on divergence)
  std::vector<EpochStats> history;
  int best_epoch = -1;  // 0-based
  int epochs_run = 0;
  bool diverged = false;
  bool early_stopped = false;
};

TrainResult train(const Config& cfg, const corpus::Vocabulary& vocab,
                  const aw2v::EmbeddingMatrix& emb, const std::vector<ExampleIds>& train_examples,
                  const std::vector<ExampleIds>& valid_examples);

struct EvalStats {
  double nll_per_char = 0;   // reconstruction, RNN head, posterior mean z
  double kl_per_line = 0;
  double ppl = 0;            // exp(nll_per_char), exact
  double nll_total_per_char = 0;  // (recon + kl) mass over characters
  double ppl_total = 0;
  size_t examples = 0;
};

EvalStats evaluate(Model& model, const std::vector<ExampleIds>& examples);

}  // namespace poet::cvae
