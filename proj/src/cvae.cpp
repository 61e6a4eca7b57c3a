#include "poet/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace poet::cvae {

using nn::Tape;

namespace {

constexpr int kDeconvKernel = 3;
constexpr int kDeconvStride = 2;
constexpr int kDeconvLayers = 3;
constexpr double kLogVarClamp = 10.0;

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: bad boolean for " + key + ": " + v);
}

}  // namespace

std::string Config::serialize() const {
  std::ostringstream out;
  out << "embed=" << embed_dim << '\n';
  out << "hidden=" << hidden << '\n';
  out << "layers=" << layers << '\n';
  out << "ctx_layers=" << ctx_layers << '\n';
  out << "latent=" << latent << '\n';
  out << "dcnn_maps=" << dcnn_maps[0] << ',' << dcnn_maps[1] << ',' << dcnn_maps[2] << '\n';
  out << "alpha=" << alpha << '\n';
  out << "rate=" << rate << '\n';
  out << "dropout=" << dropout << '\n';
  out << "batch=" << batch << '\n';
  out << "anneal_steps=" << anneal_steps << '\n';
  out << "patience=" << patience << '\n';
  out << "epochs=" << max_epochs << '\n';
  out << "seed=" << seed << '\n';
  out << "context_in_c=" << (context_in_c ? "true" : "false") << '\n';
  out << "decoder=" << (hybrid ? "hybrid" : "rnn-only") << '\n';
  return out.str();
}

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    try {
      if (key == "embed")
        cfg.embed_dim = std::stoi(val);
      else if (key == "hidden")
        cfg.hidden = std::stoi(val);
      else if (key == "layers")
        cfg.layers = std::stoi(val);
      else if (key == "ctx_layers")
        cfg.ctx_layers = std::stoi(val);
      else if (key == "latent")
        cfg.latent = std::stoi(val);
      else if (key == "dcnn_maps") {
        std::istringstream ms(val);
        std::string tok;
        for (int i = 0; i < 3; ++i) {
          if (!std::getline(ms, tok, ',')) throw Error("expected three comma-separated map counts");
          cfg.dcnn_maps[static_cast<size_t>(i)] = std::stoi(tok);
        }
      } else if (key == "alpha")
        cfg.alpha = std::stod(val);
      else if (key == "rate")
        cfg.rate = std::stod(val);
      else if (key == "dropout")
        cfg.dropout = std::stod(val);
      else if (key == "batch")
        cfg.batch = std::stoi(val);
      else if (key == "anneal_steps")
        cfg.anneal_steps = std::stoi(val);
      else if (key == "patience")
        cfg.patience = std::stoi(val);
      else if (key == "epochs")
        cfg.max_epochs = std::stoi(val);
      else if (key == "seed")
        cfg.seed = std::stoull(val);
      else if (key == "context_in_c")
        cfg.context_in_c = parse_bool(val, key);
      else if (key == "decoder") {
        if (val == "hybrid")
          cfg.hybrid = true;
        else if (val == "rnn-only")
          cfg.hybrid = false;
        else
          throw Error("decoder must be hybrid or rnn-only");
      } else
        throw Error("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw Error("config line " + std::to_string(lineno) + ": bad value for " + key);
    }
  }
  if (cfg.hidden < 1 || cfg.layers < 1 || cfg.latent < 1 || cfg.batch < 1 || cfg.anneal_steps < 1)
    throw Error("config: hidden/layers/latent/batch/anneal_steps must be positive");
  if (cfg.dropout < 0 || cfg.dropout >= 1) throw Error("config: dropout must be in [0,1)");
  return cfg;
}

Config Config::parse_file(const std::string& path) { return parse(read_file(path)); }

ExampleIds encode_example(const corpus::TrainingExample& ex, const corpus::Vocabulary& vocab) {
  if (ex.line_index < 1 || ex.line_index > 4) throw Error("line index must be 1..4");
  if (ex.context.size() != static_cast<size_t>(ex.line_index - 1))
    throw Error("context must hold exactly line_index-1 lines");
  ExampleIds out;
  for (const std::string& c : ex.keyword) out.keyword.push_back(vocab.id(c));
  if (out.keyword.empty()) throw Error("empty keyword");
  for (const corpus::Line& l : ex.context) out.context.push_back(vocab.encode(l));
  out.target = vocab.encode(ex.target);
  out.line_index = ex.line_index;
  return out;
}

double anneal_weight(int64_t step, int64_t ramp_steps) {
  if (ramp_steps < 1) throw Error("anneal ramp must be >= 1");
  if (step <= 0) return 0.0;
  if (step >= ramp_steps) return 1.0;
  return static_cast<double>(step) / static_cast<double>(ramp_steps);
}

Model::Model(const Config& cfg, corpus::Vocabulary vocab, const aw2v::EmbeddingMatrix& emb)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  if (emb.rows != vocab_.size())
    throw Error("embedding matrix rows do not match vocabulary size");
  if (emb.dim != cfg_.embed_dim)
    throw Error("embedding matrix dimension does not match config embed dim");
  Rng rng(cfg_.seed);
  build_params(rng, &emb);
  wire_layer_views();
}

Model::Model(const Config& cfg, corpus::Vocabulary vocab, nn::ParameterStore params)
    : cfg_(cfg), vocab_(std::move(vocab)), params_(std::move(params)) {
  wire_layer_views();
}

void Model::build_params(Rng& rng, const aw2v::EmbeddingMatrix* emb) {
  const int V = vocab_.size();
  const int E = cfg_.embed_dim;
  const int H = cfg_.hidden;
  const int L = cfg_.latent;
  const int C = cfg_.condition_dim();

  nn::Tensor& embed = params_.create("emb", {V, E}, rng);
  if (emb) {
    for (int r = 0; r < V; ++r)
      for (int d = 0; d < E; ++d)
        embed.v[static_cast<size_t>(r) * E + d] = emb->row(r)[d];
  }

  nn::brnn_init(params_, "enc", E, H, cfg_.layers, rng);
  if (cfg_.context_in_c) nn::brnn_init(params_, "ctx", E, H, cfg_.ctx_layers, rng);

  params_.create("rec.W", {2 * L, 2 * H + C}, rng);
  params_.create("rec.b", {2 * L}, rng);
  params_.create("prior.W1", {H, C}, rng);
  params_.create("prior.b1", {H}, rng);
  params_.create("prior.W2", {2 * L, H}, rng);
  params_.create("prior.b2", {2 * L}, rng);

  params_.create("dec.init.W", {cfg_.layers * 2 * H, L + C}, rng);
  params_.create("dec.init.b", {cfg_.layers * 2 * H}, rng);
  int in_dim = E + (cfg_.hybrid ? cfg_.dcnn_maps[2] : 0);
  for (int k = 0; k < cfg_.layers; ++k) {
    nn::lstm_init(params_, "dec.l" + std::to_string(k), in_dim, H, rng);
    in_dim = H;
  }
  params_.create("dec.out.W", {V, H}, rng);
  params_.create("dec.out.b", {V}, rng);

  if (cfg_.hybrid) {
    const auto& m = cfg_.dcnn_maps;
    params_.create("dcnn.seed.W", {m[0], L + C}, rng);
    params_.create("dcnn.seed.b", {m[0]}, rng);
    const int in_ch[kDeconvLayers] = {m[0], m[0], m[1]};
    const int out_ch[kDeconvLayers] = {m[0], m[1], m[2]};
    for (int k = 0; k < kDeconvLayers; ++k) {
      params_.create("dcnn.l" + std::to_string(k) + ".K", {in_ch[k], out_ch[k], kDeconvKernel}, rng);
      params_.create("dcnn.l" + std::to_string(k) + ".b", {out_ch[k]}, rng);
    }
    params_.create("dcnn.out.W", {V, m[2]}, rng);
    params_.create("dcnn.out.b", {V}, rng);
  }
}

void Model::wire_layer_views() {
  const int H = cfg_.hidden;
  auto lstm_view = [&](const std::string& prefix, int) {
    nn::LstmParams p;
    p.Wx = &params_.at(prefix + ".Wx");
    p.Wh = &params_.at(prefix + ".Wh");
    p.b = &params_.at(prefix + ".b");
    p.hidden = H;
    return p;
  };
  enc_ = nn::BrnnParams{};
  enc_.hidden = H;
  for (int k = 0; k < cfg_.layers; ++k) {
    const std::string base = "enc.l" + std::to_string(k);
    enc_.layers.emplace_back(lstm_view(base + ".fw", H), lstm_view(base + ".bw", H));
  }
  ctx_ = nn::BrnnParams{};
  ctx_.hidden = H;
  if (cfg_.context_in_c) {
    for (int k = 0; k < cfg_.ctx_layers; ++k) {
      const std::string base = "ctx.l" + std::to_string(k);
      ctx_.layers.emplace_back(lstm_view(base + ".fw", H), lstm_view(base + ".bw", H));
    }
  }
  dec_.clear();
  for (int k = 0; k < cfg_.layers; ++k) dec_.push_back(lstm_view("dec.l" + std::to_string(k), H));
}

void Model::save(const std::string& path) const {
  std::string header = cfg_.serialize();
  header += "[vocab]\n";
  header += vocab_.to_text();
  nn::save_checkpoint(params_, path, header);
}

Model Model::load(const std::string& path) {
  auto [params, header] = nn::load_checkpoint(path);
  const size_t split = header.find("[vocab]\n");
  if (split == std::string::npos) throw Error("checkpoint header missing vocabulary: " + path);
  const Config cfg = Config::parse(header.substr(0, split));
  corpus::Vocabulary vocab = corpus::Vocabulary::from_text(header.substr(split + 8));
  if (!params.has("emb") || params.at("emb").shape[0] != vocab.size())
    throw Error("checkpoint/vocabulary mismatch: " + path);
  return Model(cfg, std::move(vocab), std::move(params));
}

Tape::Var* Model::embed_tokens_mean(Tape& tape, const std::vector<int32_t>& ids) {
  std::vector<int> idx(ids.begin(), ids.end());
  return tape.row_mean(tape.param(params_.at("emb")), idx);
}

Tape::Var* Model::encode(Tape& tape, const ExampleIds& ex, bool train, Rng* rng) {
  const size_t target_len = ex.target.size();
  if (target_len != 5 && target_len != 7)
    throw Error("encoder target line must have 5 or 7 characters");
  std::vector<int32_t> seq = ex.keyword;
  seq.push_back(corpus::Vocabulary::kSep);
  for (size_t i = 0; i < ex.context.size(); ++i) {
    seq.insert(seq.end(), ex.context[i].begin(), ex.context[i].end());
    if (i + 1 < ex.context.size()) seq.push_back(corpus::Vocabulary::kSep);
  }
  seq.push_back(corpus::Vocabulary::kSep);
  seq.insert(seq.end(), ex.target.begin(), ex.target.end());

  Tape::Var* emb = tape.param(params_.at("emb"));
  std::vector<Tape::Var*> vecs;
  vecs.reserve(seq.size());
  for (int32_t id : seq) vecs.push_back(tape.row(emb, id));
  return nn::brnn_encode(tape, vecs, enc_, cfg_.dropout, rng, train);
}

Tape::Var* Model::condition(Tape& tape, const std::vector<int32_t>& keyword,
                            const std::vector<std::vector<int32_t>>& context, int line_index,
                            bool train, Rng* rng) {
  if (line_index < 1 || line_index > 4) throw Error("line index must be 1..4");
  if ((line_index == 1) != context.empty())
    throw Error("context must be empty exactly for the first line");
  std::vector<Tape::Var*> parts;
  parts.push_back(embed_tokens_mean(tape, keyword));
  if (cfg_.context_in_c) {
    if (context.empty()) {
      parts.push_back(tape.zeros({2 * cfg_.hidden}));
    } else {
      std::vector<int32_t> seq;
      for (size_t i = 0; i < context.size(); ++i) {
        seq.insert(seq.end(), context[i].begin(), context[i].end());
        if (i + 1 < context.size()) seq.push_back(corpus::Vocabulary::kSep);
      }
      Tape::Var* emb = tape.param(params_.at("emb"));
      std::vector<Tape::Var*> vecs;
      for (int32_t id : seq) vecs.push_back(tape.row(emb, id));
      parts.push_back(nn::brnn_encode(tape, vecs, ctx_, cfg_.dropout, rng, train));
    }
  }
  std::vector<nn::real_t> onehot(4, 0.0);
  onehot[static_cast<size_t>(line_index - 1)] = 1.0;
  parts.push_back(tape.input({4}, onehot));
  return tape.concat(parts);
}

std::pair<Tape::Var*, Tape::Var*> Model::recognize(Tape& tape, Tape::Var* h, Tape::Var* c) {
  Tape::Var* joint = tape.concat({h, c});
  Tape::Var* out =
      tape.affine(tape.param(params_.at("rec.W")), joint, tape.param(params_.at("rec.b")));
  Tape::Var* mu = tape.slice(out, 0, cfg_.latent);
  Tape::Var* lv = tape.clamp(tape.slice(out, cfg_.latent, cfg_.latent), -kLogVarClamp, kLogVarClamp);
  return {mu, lv};
}

std::pair<Tape::Var*, Tape::Var*> Model::prior(Tape& tape, Tape::Var* c) {
  Tape::Var* hid =
      tape.tanh(tape.affine(tape.param(params_.at("prior.W1")), c, tape.param(params_.at("prior.b1"))));
  Tape::Var* out =
      tape.affine(tape.param(params_.at("prior.W2")), hid, tape.param(params_.at("prior.b2")));
  Tape::Var* mu = tape.slice(out, 0, cfg_.latent);
  Tape::Var* lv = tape.clamp(tape.slice(out, cfg_.latent, cfg_.latent), -kLogVarClamp, kLogVarClamp);
  return {mu, lv};
}

Model::DecodeState Model::decode_begin(Tape& tape, Tape::Var* z, Tape::Var* c) {
  DecodeState state;
  Tape::Var* zc = tape.concat({z, c});
  Tape::Var* s0 =
      tape.affine(tape.param(params_.at("dec.init.W")), zc, tape.param(params_.at("dec.init.b")));
  const int H = cfg_.hidden;
  for (int k = 0; k < cfg_.layers; ++k)
    state.hc.emplace_back(tape.slice(s0, k * 2 * H, H), tape.slice(s0, k * 2 * H + H, H));

  if (cfg_.hybrid) {
    Tape::Var* seed = tape.affine(tape.param(params_.at("dcnn.seed.W")), zc,
                                  tape.param(params_.at("dcnn.seed.b")));
    Tape::Var* feat = tape.reshape(seed, {cfg_.dcnn_maps[0], 1});
    for (int k = 0; k < kDeconvLayers; ++k) {
      const std::string base = "dcnn.l" + std::to_string(k);
      feat = tape.deconv1d(feat, tape.param(params_.at(base + ".K")), kDeconvStride);
      feat = tape.channel_bias(feat, tape.param(params_.at(base + ".b")));
      feat = tape.relu(feat);
    }
    state.features = feat;  // (maps[2], 15)
  }
  return state;
}

Tape::Var* Model::decode_step(Tape& tape, DecodeState& state, int32_t prev_token, bool train,
                              Rng* rng) {
  Tape::Var* emb = tape.param(params_.at("emb"));
  Tape::Var* x = tape.row(emb, prev_token);
  if (cfg_.hybrid) {
    if (state.position >= state.features->shape[1])
      throw Error("decode position exceeds deconvolution output length");
    x = tape.concat({x, tape.col(state.features, state.position)});
  }
  Tape::Var* stream = x;
  Tape::Var* top = nullptr;
  for (int k = 0; k < cfg_.layers; ++k) {
    Tape::Var* in = (train && rng) ? tape.dropout(stream, cfg_.dropout, *rng, train) : stream;
    auto [h, cstate] = nn::lstm_step(tape, in, state.hc[static_cast<size_t>(k)].first,
                                     state.hc[static_cast<size_t>(k)].second, dec_[static_cast<size_t>(k)]);
    state.hc[static_cast<size_t>(k)] = {h, cstate};
    top = h;
    stream = (stream->shape == h->shape) ? tape.add(h, stream) : h;
  }
  ++state.position;
  return tape.affine(tape.param(params_.at("dec.out.W")), top, tape.param(params_.at("dec.out.b")));
}

Tape::Var* Model::dcnn_logits(Tape& tape, const DecodeState& state, int t) {
  if (!cfg_.hybrid) throw Error("deconvolution head requires the hybrid decoder");
  Tape::Var* column = tape.col(state.features, t);
  return tape.affine(tape.param(params_.at("dcnn.out.W")), column,
                     tape.param(params_.at("dcnn.out.b")));
}

Model::DecodeOutputs Model::decode_hybrid(Tape& tape, Tape::Var* z, Tape::Var* c,
                                          const std::vector<int32_t>& teacher_with_eos, bool train,
                                          Rng* rng) {
  const int T = static_cast<int>(teacher_with_eos.size());
  if (T != 6 && T != 8) throw Error("decoder target length must be 6 or 8 including EOS");
  DecodeState state = decode_begin(tape, z, c);
  DecodeOutputs out;
  for (int t = 0; t < T; ++t) {
    const int32_t prev =
        t == 0 ? corpus::Vocabulary::kBos : teacher_with_eos[static_cast<size_t>(t - 1)];
    out.rnn_logits.push_back(decode_step(tape, state, prev, train, rng));
  }
  if (cfg_.hybrid)
    for (int t = 0; t < T; ++t) out.dcnn_logits.push_back(dcnn_logits(tape, state, t));
  return out;
}

Model::BatchLoss Model::loss(Tape& tape, const std::vector<ExampleIds>& batch, double beta,
                             const std::vector<std::vector<double>>& eps, bool train, Rng* rng) {
  if (batch.empty()) throw Error("empty batch");
  if (beta < 0.0 || beta > 1.0) throw Error("beta must be in [0,1]");
  if (eps.size() != batch.size()) throw Error("one eps draw per example required");

  std::vector<Tape::Var*> recon_terms, kl_terms, dcnn_terms;
  for (size_t e = 0; e < batch.size(); ++e) {
    const ExampleIds& ex = batch[e];
    Tape::Var* h = encode(tape, ex, train, rng);
    Tape::Var* c = condition(tape, ex.keyword, ex.context, ex.line_index, train, rng);
    auto [mu_q, lv_q] = recognize(tape, h, c);
    auto [mu_p, lv_p] = prior(tape, c);
    std::vector<double> draw = eps[e];
    if (draw.empty()) draw.assign(static_cast<size_t>(cfg_.latent), 0.0);
    Tape::Var* z = tape.reparameterize(mu_q, lv_q, draw);

    std::vector<int32_t> teacher = ex.target;
    teacher.push_back(corpus::Vocabulary::kEos);
    DecodeOutputs dec = decode_hybrid(tape, z, c, teacher, train, rng);

    const int T = static_cast<int>(teacher.size());
    std::vector<Tape::Var*> ces, dces;
    for (int t = 0; t < T; ++t) {
      ces.push_back(tape.softmax_cross_entropy(dec.rnn_logits[static_cast<size_t>(t)],
                                               teacher[static_cast<size_t>(t)]));
      if (cfg_.hybrid)
        dces.push_back(tape.softmax_cross_entropy(dec.dcnn_logits[static_cast<size_t>(t)],
                                                  teacher[static_cast<size_t>(t)]));
    }
    const std::vector<nn::real_t> inv_t(static_cast<size_t>(T), 1.0 / T);
    recon_terms.push_back(tape.weighted_sum(ces, inv_t));
    if (cfg_.hybrid) dcnn_terms.push_back(tape.weighted_sum(dces, inv_t));
    kl_terms.push_back(tape.kl_gauss(mu_q, lv_q, mu_p, lv_p));
  }

  const std::vector<nn::real_t> inv_b(batch.size(), 1.0 / static_cast<double>(batch.size()));
  Tape::Var* recon = tape.weighted_sum(recon_terms, inv_b);
  Tape::Var* kl = tape.weighted_sum(kl_terms, inv_b);
  Tape::Var* dcnn = cfg_.hybrid ? tape.weighted_sum(dcnn_terms, inv_b) : tape.input({1}, {0.0});
  Tape::Var* total = tape.weighted_sum({recon, kl, dcnn}, {1.0, beta, cfg_.alpha});

  BatchLoss out;
  out.total = total;
  out.breakdown.recon_nll = recon->v[0];
  out.breakdown.kl = kl->v[0];
  out.breakdown.dcnn_nll = dcnn->v[0];
  out.breakdown.beta = beta;
  out.breakdown.alpha = cfg_.alpha;
  out.breakdown.total = total->v[0];
  return out;
}

TrainResult train(const Config& cfg, const corpus::Vocabulary& vocab,
                  const aw2v::EmbeddingMatrix& emb, const std::vector<ExampleIds>& train_examples,
                  const std::vector<ExampleIds>& valid_examples) {
  if (train_examples.empty()) throw Error("no training examples");
  Model model(cfg, vocab, emb);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);  // training stream, distinct from init
  nn::AdaDelta opt(cfg.rate);

  TrainResult result;
  nn::ParameterStore last_good = model.params();
  nn::ParameterStore best;
  double best_ppl = std::numeric_limits<double>::infinity();
  int since_best = 0;
  int64_t step = 0;

  std::vector<size_t> order(train_examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats;
    double recon_sum = 0, kl_sum = 0, dcnn_sum = 0, total_sum = 0;
    size_t counted = 0;
    try {
      for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
        const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
        std::vector<ExampleIds> batch;
        batch.reserve(end - start);
        for (size_t i = start; i < end; ++i) batch.push_back(train_examples[order[i]]);
        std::vector<std::vector<double>> eps(batch.size());
        for (auto& d : eps) {
          d.resize(static_cast<size_t>(cfg.latent));
          for (double& v : d) v = rng.normal();
        }
        const double beta = anneal_weight(step, cfg.anneal_steps);

        nn::Tape tape;
        Model::BatchLoss bl = model.loss(tape, batch, beta, eps, true, &rng);
        tape.backward(bl.total);
        opt.step(model.params());
        model.params().zero_grad();
        ++step;

        recon_sum += bl.breakdown.recon_nll * static_cast<double>(batch.size());
        kl_sum += bl.breakdown.kl * static_cast<double>(batch.size());
        dcnn_sum += bl.breakdown.dcnn_nll * static_cast<double>(batch.size());
        total_sum += bl.breakdown.total * static_cast<double>(batch.size());
        counted += batch.size();
      }
    } catch (const Error&) {
      result.diverged = true;
      break;
    }
    stats.train_recon = recon_sum / static_cast<double>(counted);
    stats.train_kl = kl_sum / static_cast<double>(counted);
    stats.train_dcnn = dcnn_sum / static_cast<double>(counted);
    stats.train_total = total_sum / static_cast<double>(counted);

    last_good = model.params();
    result.epochs_run = epoch + 1;

    if (!valid_examples.empty()) {
      const EvalStats es = evaluate(model, valid_examples);
      stats.valid_ppl = es.ppl;
      stats.valid_kl = es.kl_per_line;
      result.history.push_back(stats);
      if (es.ppl < best_ppl) {
        best_ppl = es.ppl;
        best = model.params();
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    } else {
      result.history.push_back(stats);
    }
  }

  nn::ParameterStore final_params;
  if (result.diverged) {
    final_params = std::move(last_good);
  } else if (result.best_epoch >= 0) {
    final_params = std::move(best);
  } else {
    final_params = model.params();
  }
  result.model.emplace(cfg, vocab, std::move(final_params));
  return result;
}

EvalStats evaluate(Model& model, const std::vector<ExampleIds>& examples) {
  if (examples.empty()) throw Error("no evaluation examples");
  double ce_sum = 0, kl_sum = 0;
  size_t char_count = 0;
  for (const ExampleIds& ex : examples) {
    nn::Tape tape;
    Model::BatchLoss bl = model.loss(tape, {ex}, 1.0, {{}}, false, nullptr);
    const size_t T = ex.target.size() + 1;
    ce_sum += bl.breakdown.recon_nll * static_cast<double>(T);
    kl_sum += bl.breakdown.kl;
    char_count += T;
  }
  EvalStats out;
  out.examples = examples.size();
  out.nll_per_char = ce_sum / static_cast<double>(char_count);
  out.kl_per_line = kl_sum / static_cast<double>(examples.size());
  out.ppl = std::exp(out.nll_per_char);
  out.nll_total_per_char = (ce_sum + kl_sum) / static_cast<double>(char_count);
  out.ppl_total = std::exp(out.nll_total_per_char);
  return out;
}

}  // namespace poet::cvae
