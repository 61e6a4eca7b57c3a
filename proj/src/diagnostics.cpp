#include "poet/diagnostics.hpp"

#include <cmath>
#include <functional>

#include "poet/cvae.hpp"

namespace poet::diagnostics {

using nn::ParameterStore;
using nn::Tape;

namespace {

constexpr double kTolerance = 1e-4;
constexpr double kEps = 1e-5;

// build() constructs the graph, runs backward and returns the loss; losses are
// scalarized through a softmax so every output coordinate carries gradient.
double run_check(ParameterStore& store, const std::function<nn::real_t(Tape&)>& build) {
  auto eval = [&](bool) {
    Tape tape;
    return build(tape);
  };
  const nn::GradCheckReport r = nn::grad_check(store, eval, kEps, 4, 99);
  return r.max_rel_err;
}

LayerCheck check_affine(int seeds, uint64_t seed) {
  LayerCheck c{"affine", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + static_cast<uint64_t>(s));
    const int m = 2 + static_cast<int>(rng.below(5));
    const int n = 2 + static_cast<int>(rng.below(5));
    ParameterStore store;
    store.init_low = -0.8;
    store.init_high = 0.8;
    store.create("W", {m, n}, rng);
    store.create("b", {m}, rng);
    store.create("x", {n}, rng);
    std::vector<nn::real_t> proj(static_cast<size_t>(m));
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          Tape::Var* y = tape.affine(tape.param(store.at("W")), tape.param(store.at("x")),
                                     tape.param(store.at("b")));
          Tape::Var* loss = tape.softmax_cross_entropy(tape.mul(y, tape.input({m}, proj)), 0);
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_lstm(int seeds, uint64_t seed) {
  LayerCheck c{"lstm_step", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + 1000 + static_cast<uint64_t>(s));
    const int in_dim = 2 + static_cast<int>(rng.below(4));
    const int hidden = 2 + static_cast<int>(rng.below(4));
    ParameterStore store;
    store.init_low = -0.5;
    store.init_high = 0.5;
    nn::lstm_init(store, "cell", in_dim, hidden, rng);
    store.create("x", {in_dim}, rng);
    store.create("h0", {hidden}, rng);
    store.create("c0", {hidden}, rng);
    std::vector<nn::real_t> proj(static_cast<size_t>(2 * hidden));
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          nn::LstmParams p{&store.at("cell.Wx"), &store.at("cell.Wh"), &store.at("cell.b"), hidden};
          auto [h, cc] = nn::lstm_step(tape, tape.param(store.at("x")), tape.param(store.at("h0")),
                                       tape.param(store.at("c0")), p);
          Tape::Var* both = tape.concat({h, cc});
          Tape::Var* loss =
              tape.softmax_cross_entropy(tape.mul(both, tape.input({2 * hidden}, proj)), 1);
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_brnn(int seeds, uint64_t seed) {
  LayerCheck c{"brnn_encode", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + 2000 + static_cast<uint64_t>(s));
    const int in_dim = 2 + static_cast<int>(rng.below(3));
    const int hidden = 2 + static_cast<int>(rng.below(3));
    const int T = 2 + static_cast<int>(rng.below(4));
    ParameterStore store;
    store.init_low = -0.5;
    store.init_high = 0.5;
    nn::BrnnParams brnn = nn::brnn_init(store, "enc", in_dim, hidden, 2, rng);
    for (int t = 0; t < T; ++t) store.create("x" + std::to_string(t), {in_dim}, rng);
    std::vector<nn::real_t> proj(static_cast<size_t>(2 * hidden));
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          std::vector<Tape::Var*> seq;
          for (int t = 0; t < T; ++t) seq.push_back(tape.param(store.at("x" + std::to_string(t))));
          Tape::Var* h = nn::brnn_encode(tape, seq, brnn, 0.0, nullptr, false);
          Tape::Var* loss =
              tape.softmax_cross_entropy(tape.mul(h, tape.input({2 * hidden}, proj)), 0);
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_deconv(int seeds, uint64_t seed) {
  LayerCheck c{"deconv1d", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + 3000 + static_cast<uint64_t>(s));
    const int c_in = 1 + static_cast<int>(rng.below(3));
    const int c_out = 1 + static_cast<int>(rng.below(3));
    const int l_in = 1 + static_cast<int>(rng.below(4));
    const int K = 2 + static_cast<int>(rng.below(3));
    const int stride = 1 + static_cast<int>(rng.below(3));
    ParameterStore store;
    store.init_low = -0.8;
    store.init_high = 0.8;
    store.create("x", {c_in, l_in}, rng);
    store.create("k", {c_in, c_out, K}, rng);
    store.create("b", {c_out}, rng);
    const int l_out = (l_in - 1) * stride + K;
    std::vector<nn::real_t> proj(static_cast<size_t>(c_out * l_out));
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          Tape::Var* y = tape.deconv1d(tape.param(store.at("x")), tape.param(store.at("k")), stride);
          y = tape.relu(tape.channel_bias(y, tape.param(store.at("b"))));
          Tape::Var* flat = tape.reshape(y, {c_out * l_out});
          Tape::Var* loss = tape.softmax_cross_entropy(
              tape.mul(flat, tape.input({c_out * l_out}, proj)), 0);
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_softmax_ce(int seeds, uint64_t seed) {
  LayerCheck c{"softmax_cross_entropy", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + 4000 + static_cast<uint64_t>(s));
    const int n = 3 + static_cast<int>(rng.below(8));
    ParameterStore store;
    store.init_low = -2.0;
    store.init_high = 2.0;
    store.create("logits", {n}, rng);
    const int target = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          Tape::Var* loss = tape.softmax_cross_entropy(tape.param(store.at("logits")), target);
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_embedding(int seeds, uint64_t seed) {
  LayerCheck c{"embedding_lookup", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + 5000 + static_cast<uint64_t>(s));
    const int rows = 4 + static_cast<int>(rng.below(5));
    const int dim = 2 + static_cast<int>(rng.below(4));
    ParameterStore store;
    store.init_low = -1.0;
    store.init_high = 1.0;
    store.create("emb", {rows, dim}, rng);
    std::vector<int> ids = {static_cast<int>(rng.below(static_cast<uint64_t>(rows))),
                            static_cast<int>(rng.below(static_cast<uint64_t>(rows))),
                            static_cast<int>(rng.below(static_cast<uint64_t>(rows)))};
    std::vector<nn::real_t> proj(static_cast<size_t>(dim));
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          Tape::Var* m = tape.param(store.at("emb"));
          Tape::Var* mean = tape.row_mean(m, ids);
          Tape::Var* one = tape.row(m, ids[0]);
          Tape::Var* loss = tape.softmax_cross_entropy(
              tape.mul(tape.add(mean, one), tape.input({dim}, proj)), 0);
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_latent_ops(int seeds, uint64_t seed) {
  LayerCheck c{"reparameterize_kl", 0, seeds, false};
  for (int s = 0; s < seeds; ++s) {
    Rng rng(seed + 6000 + static_cast<uint64_t>(s));
    const int d = 2 + static_cast<int>(rng.below(5));
    ParameterStore store;
    store.init_low = -0.7;
    store.init_high = 0.7;
    store.create("mu_q", {d}, rng);
    store.create("lv_q", {d}, rng);
    store.create("mu_p", {d}, rng);
    store.create("lv_p", {d}, rng);
    std::vector<double> eps(static_cast<size_t>(d));
    for (auto& v : eps) v = rng.normal();
    std::vector<nn::real_t> proj(static_cast<size_t>(d));
    for (auto& v : proj) v = rng.uniform(-1.0, 1.0);
    c.max_rel_err = std::max(
        c.max_rel_err, run_check(store, [&](Tape& tape) {
          Tape::Var* mu_q = tape.param(store.at("mu_q"));
          Tape::Var* lv_q = tape.clamp(tape.param(store.at("lv_q")), -10, 10);
          Tape::Var* mu_p = tape.param(store.at("mu_p"));
          Tape::Var* lv_p = tape.clamp(tape.param(store.at("lv_p")), -10, 10);
          Tape::Var* z = tape.reparameterize(mu_q, lv_q, eps);
          Tape::Var* kl = tape.kl_gauss(mu_q, lv_q, mu_p, lv_p);
          Tape::Var* zce = tape.softmax_cross_entropy(tape.mul(z, tape.input({d}, proj)), 0);
          Tape::Var* loss = tape.weighted_sum({zce, kl}, {1.0, 0.5});
          tape.backward(loss);
          return loss->v[0];
        }));
  }
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

LayerCheck check_full_loss(uint64_t seed) {
  LayerCheck c{"cvae_hd_full_loss", 0, 1, false};
  cvae::Config cfg;
  cfg.embed_dim = 4;
  cfg.hidden = 3;
  cfg.layers = 2;
  cfg.ctx_layers = 1;
  cfg.latent = 3;
  cfg.dcnn_maps = {5, 4, 3};
  cfg.dropout = 0.0;
  cfg.seed = seed;

  std::vector<std::string> symbols;
  for (int i = 0; i < 8; ++i) symbols.push_back(std::string(1, static_cast<char>('a' + i)));
  corpus::Vocabulary vocab(symbols);

  aw2v::EmbeddingMatrix emb;
  emb.rows = vocab.size();
  emb.dim = cfg.embed_dim;
  emb.data.resize(static_cast<size_t>(emb.rows) * emb.dim);
  Rng erng(seed + 17);
  for (double& v : emb.data) v = erng.uniform(-0.3, 0.3);

  cvae::Model model(cfg, vocab, emb);

  std::vector<cvae::ExampleIds> batch(2);
  batch[0].keyword = {5, 6};
  batch[0].target = {5, 6, 7, 8, 9};
  batch[0].line_index = 1;
  batch[1].keyword = {7};
  batch[1].context = {{5, 6, 7, 8, 9}, {6, 7, 8, 9, 10}};
  batch[1].target = {9, 8, 7, 6, 5};
  batch[1].line_index = 3;

  std::vector<std::vector<double>> eps(2, std::vector<double>(static_cast<size_t>(cfg.latent)));
  Rng nrng(seed + 23);
  for (auto& e : eps)
    for (double& v : e) v = nrng.normal();

  auto eval = [&](bool) {
    nn::Tape tape;
    cvae::Model::BatchLoss bl = model.loss(tape, batch, 0.7, eps, false, nullptr);
    tape.backward(bl.total);
    return bl.total->v[0];
  };
  const nn::GradCheckReport r = nn::grad_check(model.params(), eval, kEps, 3, seed + 31);
  c.max_rel_err = r.max_rel_err;
  c.pass = c.max_rel_err <= kTolerance;
  return c;
}

}  // namespace

std::vector<LayerCheck> gradcheck_suite(int seeds_per_layer, uint64_t seed) {
  std::vector<LayerCheck> out;
  out.push_back(check_affine(seeds_per_layer, seed));
  out.push_back(check_lstm(seeds_per_layer, seed));
  out.push_back(check_brnn(seeds_per_layer, seed));
  out.push_back(check_deconv(seeds_per_layer, seed));
  out.push_back(check_softmax_ce(seeds_per_layer, seed));
  out.push_back(check_embedding(seeds_per_layer, seed));
  out.push_back(check_latent_ops(seeds_per_layer, seed));
  out.push_back(check_full_loss(seed));
  return out;
}

}  // namespace poet::diagnostics
