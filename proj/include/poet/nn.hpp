#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "poet/common.hpp"

namespace poet::nn {

using real_t = double;

struct Tensor {
  std::vector<int> shape;
  std::vector<real_t> v;  // values
  std::vector<real_t> g;  // gradient accumulator, same length as v

  size_t size() const { return v.size(); }
};

class ParameterStore {
 public:
  real_t init_low = -0.08;
  real_t init_high = 0.08;

  Tensor& create(const std::string& name, std::vector<int> shape, Rng& rng);
  Tensor& create(const std::string& name, std::vector<int> shape, Rng& rng, real_t lo, real_t hi);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return params.count(name) > 0; }
  void zero_grad();
  size_t parameter_count() const;

  std::map<std::string, Tensor> params;  // ordered: deterministic iteration
};

// Dynamic reverse-mode tape. Every op validates shapes and rejects non-finite
// outputs. A tape instance is confined to one thread.
class Tape {
 public:
  struct Var {
    std::vector<int> shape;
    std::vector<real_t> v;
    std::vector<real_t> g;
    size_t size() const { return v.size(); }
  };

  Var* input(std::vector<int> shape, std::vector<real_t> values);
  Var* zeros(std::vector<int> shape);
  Var* param(Tensor& t);  // backward accumulates into t.g

  Var* add(Var* a, Var* b);
  Var* mul(Var* a, Var* b);  // elementwise
  Var* weighted_sum(const std::vector<Var*>& xs, const std::vector<real_t>& coeffs);
  Var* concat(const std::vector<Var*>& parts);  // rank-1 inputs
  Var* slice(Var* x, int offset, int len);      // rank-1
  Var* reshape(Var* x, std::vector<int> shape);  // size-preserving view
  Var* row(Var* m, int index);                  // (R,D) -> (D)
  Var* rows(Var* m, const std::vector<int>& ids);      // (R,D) -> (n,D)
  Var* row_mean(Var* m, const std::vector<int>& ids);  // (R,D) -> (D)
  Var* affine(Var* W, Var* x, Var* b);  // W:(m,n), x:(n), b:(m) or nullptr
  Var* sigmoid(Var* x);
  Var* tanh(Var* x);
  Var* relu(Var* x);
  Var* dropout(Var* x, real_t rate, Rng& rng, bool train);
  Var* clamp(Var* x, real_t lo, real_t hi);
  Var* col(Var* m, int j);                    // (C,L) -> (C)
  Var* deconv1d(Var* x, Var* kernel, int stride);  // x:(Cin,Lin), k:(Cin,Cout,K)
  Var* channel_bias(Var* y, Var* b);          // (C,L) + (C)
  Var* softmax_cross_entropy(Var* logits, int target);  // -> scalar
  Var* reparameterize(Var* mu, Var* log_var, const std::vector<real_t>& eps);
  Var* kl_gauss(Var* mu_q, Var* lv_q, Var* mu_p, Var* lv_p);  // -> scalar

  void backward(Var* loss);
  size_t node_count() const { return vars_.size(); }

 private:
  Var* fresh(std::vector<int> shape);
  void guard_finite(const Var* x, const char* op) const;

  std::deque<Var> vars_;
  std::vector<std::function<void()>> back_;
  std::unordered_map<const Tensor*, Var*> bound_;
};

// --- layers ---------------------------------------------------------------

struct LstmParams {
  Tensor* Wx = nullptr;  // (4h, in)
  Tensor* Wh = nullptr;  // (4h, h)
  Tensor* b = nullptr;   // (4h)
  int hidden = 0;
};

LstmParams lstm_init(ParameterStore& store, const std::string& prefix, int input_dim, int hidden,
                     Rng& rng);

// Standard gates (input, forget, output, candidate); zero initial states are
// supplied by the caller.
std::pair<Tape::Var*, Tape::Var*> lstm_step(Tape& tape, Tape::Var* x, Tape::Var* h_prev,
                                            Tape::Var* c_prev, const LstmParams& p);

struct BrnnParams {
  std::vector<std::pair<LstmParams, LstmParams>> layers;  // forward, backward
  int hidden = 0;
};

BrnnParams brnn_init(ParameterStore& store, const std::string& prefix, int input_dim, int hidden,
                     int layers, Rng& rng);

// Stacked bidirectional LSTM with residual additions between equal-width
// layers; returns [forward last state ; backward last state] of the top
// layer (dimension 2*hidden). Dropout applies to each layer's inputs.
Tape::Var* brnn_encode(Tape& tape, const std::vector<Tape::Var*>& seq, const BrnnParams& p,
                       real_t dropout, Rng* rng, bool train);

// --- optimizer --------------------------------------------------------------

class AdaDelta {
 public:
  explicit AdaDelta(real_t rate, real_t rho = 0.95, real_t eps = 1e-6)
      : rate_(rate), rho_(rho), eps_(eps) {}

  void step(ParameterStore& store);

  real_t rate() const { return rate_; }

 private:
  real_t rate_, rho_, eps_;
  std::map<std::string, std::pair<std::vector<real_t>, std::vector<real_t>>> acc_;  // E[g^2], E[dx^2]
};

// --- gradient checking ------------------------------------------------------

struct GradCheckReport {
  real_t max_rel_err = 0;
  std::string worst_param;
  int coords_checked = 0;
};

// `eval(true)` must rebuild the computation, run backward into the store's
// gradients and return the loss; `eval(false)` only needs the loss value.
// The computation must be deterministic (dropout off, noise frozen).
GradCheckReport grad_check(ParameterStore& store, const std::function<real_t(bool)>& eval,
                           real_t eps, int coords_per_param, uint64_t seed);

// --- checkpoints --------------------------------------------------------------

void save_checkpoint(const ParameterStore& store, const std::string& path,
                     const std::string& header);
std::pair<ParameterStore, std::string> load_checkpoint(const std::string& path);

}  // namespace poet::nn
