#include "poet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace poet::nn {

namespace {

size_t shape_size(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error("negative tensor dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Tensor& ParameterStore::create(const std::string& name, std::vector<int> shape, Rng& rng) {
  return create(name, std::move(shape), rng, init_low, init_high);
}

Tensor& ParameterStore::create(const std::string& name, std::vector<int> shape, Rng& rng,
                               real_t lo, real_t hi) {
  if (params.count(name)) throw Error("duplicate parameter: " + name);
  Tensor t;
  const size_t n = shape_size(shape);
  t.shape = std::move(shape);
  t.v.resize(n);
  t.g.assign(n, 0.0);
  for (real_t& x : t.v) x = rng.uniform(lo, hi);
  return params.emplace(name, std::move(t)).first->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : params) std::fill(t.g.begin(), t.g.end(), 0.0);
}

size_t ParameterStore::parameter_count() const {
  size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

// --- Tape -------------------------------------------------------------------

Tape::Var* Tape::fresh(std::vector<int> shape) {
  vars_.emplace_back();
  Var& v = vars_.back();
  const size_t n = shape_size(shape);
  v.shape = std::move(shape);
  v.v.resize(n);
  v.g.assign(n, 0.0);
  return &v;
}

void Tape::guard_finite(const Var* x, const char* op) const {
  for (real_t val : x->v)
    if (!std::isfinite(val)) throw Error(std::string("non-finite value produced by ") + op);
}

Tape::Var* Tape::input(std::vector<int> shape, std::vector<real_t> values) {
  if (shape_size(shape) != values.size()) throw Error("input shape/value size mismatch");
  Var* v = fresh(std::move(shape));
  v->v = std::move(values);
  guard_finite(v, "input");
  return v;
}

Tape::Var* Tape::zeros(std::vector<int> shape) { return fresh(std::move(shape)); }

Tape::Var* Tape::param(Tensor& t) {
  auto it = bound_.find(&t);
  if (it != bound_.end()) return it->second;
  Var* v = fresh(t.shape);
  v->v = t.v;
  bound_.emplace(&t, v);
  Tensor* tp = &t;
  back_.push_back([v, tp] {
    for (size_t i = 0; i < v->g.size(); ++i) tp->g[i] += v->g[i];
  });
  return v;
}

Tape::Var* Tape::add(Var* a, Var* b) {
  if (a->shape != b->shape) throw Error("add: shape mismatch");
  Var* out = fresh(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] + b->v[i];
  guard_finite(out, "add");
  back_.push_back([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->g[i] += out->g[i];
      b->g[i] += out->g[i];
    }
  });
  return out;
}

Tape::Var* Tape::mul(Var* a, Var* b) {
  if (a->shape != b->shape) throw Error("mul: shape mismatch");
  Var* out = fresh(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->v[i] = a->v[i] * b->v[i];
  guard_finite(out, "mul");
  back_.push_back([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->g[i] += out->g[i] * b->v[i];
      b->g[i] += out->g[i] * a->v[i];
    }
  });
  return out;
}

Tape::Var* Tape::weighted_sum(const std::vector<Var*>& xs, const std::vector<real_t>& coeffs) {
  if (xs.empty() || xs.size() != coeffs.size()) throw Error("weighted_sum: arity mismatch");
  for (Var* x : xs)
    if (x->shape != xs[0]->shape) throw Error("weighted_sum: shape mismatch");
  Var* out = fresh(xs[0]->shape);
  for (size_t k = 0; k < xs.size(); ++k)
    for (size_t i = 0; i < out->size(); ++i) out->v[i] += coeffs[k] * xs[k]->v[i];
  guard_finite(out, "weighted_sum");
  std::vector<Var*> inputs = xs;
  std::vector<real_t> cs = coeffs;
  back_.push_back([inputs, cs, out] {
    for (size_t k = 0; k < inputs.size(); ++k)
      for (size_t i = 0; i < out->size(); ++i) inputs[k]->g[i] += cs[k] * out->g[i];
  });
  return out;
}

Tape::Var* Tape::concat(const std::vector<Var*>& parts) {
  int total = 0;
  for (Var* p : parts) {
    if (p->shape.size() != 1) throw Error("concat: rank-1 inputs required");
    total += p->shape[0];
  }
  Var* out = fresh({total});
  size_t off = 0;
  for (Var* p : parts) {
    std::copy(p->v.begin(), p->v.end(), out->v.begin() + static_cast<ptrdiff_t>(off));
    off += p->size();
  }
  std::vector<Var*> inputs = parts;
  back_.push_back([inputs, out] {
    size_t off = 0;
    for (Var* p : inputs) {
      for (size_t i = 0; i < p->size(); ++i) p->g[i] += out->g[off + i];
      off += p->size();
    }
  });
  return out;
}

Tape::Var* Tape::reshape(Var* x, std::vector<int> shape) {
  if (shape_size(shape) != x->size()) throw Error("reshape: size mismatch");
  Var* out = fresh(std::move(shape));
  out->v = x->v;
  back_.push_back([x, out] {
    for (size_t i = 0; i < x->size(); ++i) x->g[i] += out->g[i];
  });
  return out;
}

Tape::Var* Tape::slice(Var* x, int offset, int len) {
  if (x->shape.size() != 1) throw Error("slice: rank-1 input required");
  if (offset < 0 || len < 0 || offset + len > x->shape[0]) throw Error("slice: out of range");
  Var* out = fresh({len});
  std::copy(x->v.begin() + offset, x->v.begin() + offset + len, out->v.begin());
  back_.push_back([x, out, offset] {
    for (size_t i = 0; i < out->size(); ++i) x->g[static_cast<size_t>(offset) + i] += out->g[i];
  });
  return out;
}

Tape::Var* Tape::row(Var* m, int index) {
  if (m->shape.size() != 2) throw Error("row: rank-2 input required");
  const int rows_n = m->shape[0], dim = m->shape[1];
  if (index < 0 || index >= rows_n) throw Error("row: index out of range");
  Var* out = fresh({dim});
  const size_t base = static_cast<size_t>(index) * dim;
  std::copy(m->v.begin() + base, m->v.begin() + base + dim, out->v.begin());
  back_.push_back([m, out, base] {
    for (size_t i = 0; i < out->size(); ++i) m->g[base + i] += out->g[i];
  });
  return out;
}

Tape::Var* Tape::rows(Var* m, const std::vector<int>& ids) {
  if (m->shape.size() != 2) throw Error("rows: rank-2 input required");
  const int rows_n = m->shape[0], dim = m->shape[1];
  Var* out = fresh({static_cast<int>(ids.size()), dim});
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= rows_n) throw Error("rows: index out of range");
    const size_t src = static_cast<size_t>(ids[r]) * dim;
    std::copy(m->v.begin() + src, m->v.begin() + src + dim, out->v.begin() + r * dim);
  }
  std::vector<int> idv = ids;
  back_.push_back([m, out, idv, dim] {
    for (size_t r = 0; r < idv.size(); ++r) {
      const size_t src = static_cast<size_t>(idv[r]) * dim;
      for (int i = 0; i < dim; ++i) m->g[src + i] += out->g[r * dim + i];
    }
  });
  return out;
}

Tape::Var* Tape::row_mean(Var* m, const std::vector<int>& ids) {
  if (m->shape.size() != 2) throw Error("row_mean: rank-2 input required");
  if (ids.empty()) throw Error("row_mean: empty id list");
  const int rows_n = m->shape[0], dim = m->shape[1];
  Var* out = fresh({dim});
  for (int id : ids) {
    if (id < 0 || id >= rows_n) throw Error("row_mean: index out of range");
    const size_t src = static_cast<size_t>(id) * dim;
    for (int i = 0; i < dim; ++i) out->v[static_cast<size_t>(i)] += m->v[src + i];
  }
  const real_t inv = 1.0 / static_cast<real_t>(ids.size());
  for (real_t& v : out->v) v *= inv;
  std::vector<int> idv = ids;
  back_.push_back([m, out, idv, dim, inv] {
    for (int id : idv) {
      const size_t dst = static_cast<size_t>(id) * dim;
      for (int i = 0; i < dim; ++i) m->g[dst + i] += inv * out->g[static_cast<size_t>(i)];
    }
  });
  return out;
}

Tape::Var* Tape::affine(Var* W, Var* x, Var* b) {
  if (W->shape.size() != 2 || x->shape.size() != 1) throw Error("affine: W must be (m,n), x (n)");
  const int m = W->shape[0], n = W->shape[1];
  if (x->shape[0] != n) throw Error("affine: inner dimension mismatch");
  if (b && (b->shape.size() != 1 || b->shape[0] != m)) throw Error("affine: bias shape mismatch");
  Var* out = fresh({m});
  for (int i = 0; i < m; ++i) {
    const real_t* wrow = &W->v[static_cast<size_t>(i) * n];
    real_t s = b ? b->v[static_cast<size_t>(i)] : 0.0;
    for (int j = 0; j < n; ++j) s += wrow[j] * x->v[static_cast<size_t>(j)];
    out->v[static_cast<size_t>(i)] = s;
  }
  guard_finite(out, "affine");
  back_.push_back([W, x, b, out, m, n] {
    for (int i = 0; i < m; ++i) {
      const real_t go = out->g[static_cast<size_t>(i)];
      if (go == 0.0) continue;
      real_t* gw = &W->g[static_cast<size_t>(i) * n];
      const real_t* wrow = &W->v[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) {
        gw[j] += go * x->v[static_cast<size_t>(j)];
        x->g[static_cast<size_t>(j)] += go * wrow[j];
      }
      if (b) b->g[static_cast<size_t>(i)] += go;
    }
  });
  return out;
}

Tape::Var* Tape::sigmoid(Var* x) {
  Var* out = fresh(x->shape);
  for (size_t i = 0; i < x->size(); ++i) out->v[i] = 1.0 / (1.0 + std::exp(-x->v[i]));
  guard_finite(out, "sigmoid");
  back_.push_back([x, out] {
    for (size_t i = 0; i < x->size(); ++i) x->g[i] += out->g[i] * out->v[i] * (1.0 - out->v[i]);
  });
  return out;
}

Tape::Var* Tape::tanh(Var* x) {
  Var* out = fresh(x->shape);
  for (size_t i = 0; i < x->size(); ++i) out->v[i] = std::tanh(x->v[i]);
  guard_finite(out, "tanh");
  back_.push_back([x, out] {
    for (size_t i = 0; i < x->size(); ++i) x->g[i] += out->g[i] * (1.0 - out->v[i] * out->v[i]);
  });
  return out;
}

Tape::Var* Tape::relu(Var* x) {
  Var* out = fresh(x->shape);
  for (size_t i = 0; i < x->size(); ++i) out->v[i] = x->v[i] > 0 ? x->v[i] : 0.0;
  guard_finite(out, "relu");
  back_.push_back([x, out] {
    for (size_t i = 0; i < x->size(); ++i)
      if (x->v[i] > 0) x->g[i] += out->g[i];
  });
  return out;
}

Tape::Var* Tape::dropout(Var* x, real_t rate, Rng& rng, bool train) {
  if (!train || rate <= 0.0) return x;
  if (rate >= 1.0) throw Error("dropout rate must be < 1");
  Var* out = fresh(x->shape);
  std::vector<real_t> mask(x->size());
  const real_t keep_scale = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < x->size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out->v[i] = x->v[i] * mask[i];
  }
  back_.push_back([x, out, mask = std::move(mask)] {
    for (size_t i = 0; i < x->size(); ++i) x->g[i] += out->g[i] * mask[i];
  });
  return out;
}

Tape::Var* Tape::clamp(Var* x, real_t lo, real_t hi) {
  Var* out = fresh(x->shape);
  for (size_t i = 0; i < x->size(); ++i) out->v[i] = std::min(std::max(x->v[i], lo), hi);
  guard_finite(out, "clamp");
  back_.push_back([x, out, lo, hi] {
    for (size_t i = 0; i < x->size(); ++i)
      if (x->v[i] >= lo && x->v[i] <= hi) x->g[i] += out->g[i];
  });
  return out;
}

Tape::Var* Tape::col(Var* m, int j) {
  if (m->shape.size() != 2) throw Error("col: rank-2 input required");
  const int C = m->shape[0], L = m->shape[1];
  if (j < 0 || j >= L) throw Error("col: index out of range");
  Var* out = fresh({C});
  for (int c = 0; c < C; ++c) out->v[static_cast<size_t>(c)] = m->v[static_cast<size_t>(c) * L + j];
  back_.push_back([m, out, j, C, L] {
    for (int c = 0; c < C; ++c) m->g[static_cast<size_t>(c) * L + j] += out->g[static_cast<size_t>(c)];
  });
  return out;
}

Tape::Var* Tape::deconv1d(Var* x, Var* kernel, int stride) {
  if (x->shape.size() != 2 || kernel->shape.size() != 3)
    throw Error("deconv1d: x must be (Cin,Lin) and kernel (Cin,Cout,K)");
  const int c_in = x->shape[0], l_in = x->shape[1];
  const int k_cin = kernel->shape[0], c_out = kernel->shape[1], K = kernel->shape[2];
  if (k_cin != c_in) throw Error("deconv1d: channel mismatch");
  if (K < 1 || stride < 1) throw Error("deconv1d: kernel size and stride must be >= 1");
  const int l_out = (l_in - 1) * stride + K;
  Var* out = fresh({c_out, l_out});
  for (int ci = 0; ci < c_in; ++ci) {
    for (int t = 0; t < l_in; ++t) {
      const real_t xv = x->v[static_cast<size_t>(ci) * l_in + t];
      if (xv == 0.0) continue;
      const size_t kbase = static_cast<size_t>(ci) * c_out * K;
      for (int co = 0; co < c_out; ++co) {
        const real_t* kk = &kernel->v[kbase + static_cast<size_t>(co) * K];
        real_t* orow = &out->v[static_cast<size_t>(co) * l_out + static_cast<size_t>(t) * stride];
        for (int q = 0; q < K; ++q) orow[q] += xv * kk[q];
      }
    }
  }
  guard_finite(out, "deconv1d");
  back_.push_back([x, kernel, out, c_in, l_in, c_out, K, stride, l_out] {
    for (int ci = 0; ci < c_in; ++ci) {
      const size_t kbase = static_cast<size_t>(ci) * c_out * K;
      for (int t = 0; t < l_in; ++t) {
        const real_t xv = x->v[static_cast<size_t>(ci) * l_in + t];
        real_t gx = 0.0;
        for (int co = 0; co < c_out; ++co) {
          const real_t* kk = &kernel->v[kbase + static_cast<size_t>(co) * K];
          real_t* gk = &kernel->g[kbase + static_cast<size_t>(co) * K];
          const real_t* gout = &out->g[static_cast<size_t>(co) * l_out + static_cast<size_t>(t) * stride];
          for (int q = 0; q < K; ++q) {
            gx += gout[q] * kk[q];
            gk[q] += gout[q] * xv;
          }
        }
        x->g[static_cast<size_t>(ci) * l_in + t] += gx;
      }
    }
  });
  return out;
}

Tape::Var* Tape::channel_bias(Var* y, Var* b) {
  if (y->shape.size() != 2 || b->shape.size() != 1 || b->shape[0] != y->shape[0])
    throw Error("channel_bias: shape mismatch");
  const int C = y->shape[0], L = y->shape[1];
  Var* out = fresh(y->shape);
  for (int c = 0; c < C; ++c)
    for (int l = 0; l < L; ++l)
      out->v[static_cast<size_t>(c) * L + l] = y->v[static_cast<size_t>(c) * L + l] + b->v[static_cast<size_t>(c)];
  guard_finite(out, "channel_bias");
  back_.push_back([y, b, out, C, L] {
    for (int c = 0; c < C; ++c) {
      real_t acc = 0.0;
      for (int l = 0; l < L; ++l) {
        const real_t go = out->g[static_cast<size_t>(c) * L + l];
        y->g[static_cast<size_t>(c) * L + l] += go;
        acc += go;
      }
      b->g[static_cast<size_t>(c)] += acc;
    }
  });
  return out;
}

Tape::Var* Tape::softmax_cross_entropy(Var* logits, int target) {
  if (logits->shape.size() != 1) throw Error("softmax_cross_entropy: rank-1 logits required");
  const int n = logits->shape[0];
  if (target < 0 || target >= n) throw Error("softmax_cross_entropy: target out of range");
  real_t mx = logits->v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits->v[static_cast<size_t>(i)]);
  std::vector<real_t> probs(static_cast<size_t>(n));
  real_t z = 0.0;
  for (int i = 0; i < n; ++i) {
    probs[static_cast<size_t>(i)] = std::exp(logits->v[static_cast<size_t>(i)] - mx);
    z += probs[static_cast<size_t>(i)];
  }
  for (real_t& p : probs) p /= z;
  Var* out = fresh({1});
  out->v[0] = std::log(z) + mx - logits->v[static_cast<size_t>(target)];
  guard_finite(out, "softmax_cross_entropy");
  back_.push_back([logits, out, target, probs = std::move(probs)] {
    const real_t go = out->g[0];
    for (size_t i = 0; i < probs.size(); ++i)
      logits->g[i] += go * (probs[i] - (static_cast<int>(i) == target ? 1.0 : 0.0));
  });
  return out;
}

Tape::Var* Tape::reparameterize(Var* mu, Var* log_var, const std::vector<real_t>& eps) {
  if (mu->shape != log_var->shape || mu->size() != eps.size())
    throw Error("reparameterize: shape mismatch");
  Var* out = fresh(mu->shape);
  for (size_t i = 0; i < out->size(); ++i)
    out->v[i] = mu->v[i] + std::exp(0.5 * log_var->v[i]) * eps[i];
  guard_finite(out, "reparameterize");
  back_.push_back([mu, log_var, out, eps] {
    for (size_t i = 0; i < out->size(); ++i) {
      mu->g[i] += out->g[i];
      log_var->g[i] += out->g[i] * 0.5 * std::exp(0.5 * log_var->v[i]) * eps[i];
    }
  });
  return out;
}

Tape::Var* Tape::kl_gauss(Var* mu_q, Var* lv_q, Var* mu_p, Var* lv_p) {
  if (mu_q->shape != lv_q->shape || mu_q->shape != mu_p->shape || mu_q->shape != lv_p->shape)
    throw Error("kl_gauss: shape mismatch");
  Var* out = fresh({1});
  real_t acc = 0.0;
  for (size_t i = 0; i < mu_q->size(); ++i) {
    const real_t dmu = mu_q->v[i] - mu_p->v[i];
    acc += 0.5 * (lv_p->v[i] - lv_q->v[i] +
                  (std::exp(lv_q->v[i]) + dmu * dmu) / std::exp(lv_p->v[i]) - 1.0);
  }
  out->v[0] = acc;
  guard_finite(out, "kl_gauss");
  back_.push_back([mu_q, lv_q, mu_p, lv_p, out] {
    const real_t go = out->g[0];
    for (size_t i = 0; i < mu_q->size(); ++i) {
      const real_t dmu = mu_q->v[i] - mu_p->v[i];
      const real_t inv_vp = std::exp(-lv_p->v[i]);
      const real_t ratio = std::exp(lv_q->v[i]) * inv_vp;
      mu_q->g[i] += go * dmu * inv_vp;
      mu_p->g[i] -= go * dmu * inv_vp;
      lv_q->g[i] += go * 0.5 * (ratio - 1.0);
      lv_p->g[i] += go * 0.5 * (1.0 - ratio - dmu * dmu * inv_vp);
    }
  });
  return out;
}

void Tape::backward(Var* loss) {
  if (loss->size() != 1) throw Error("backward requires a scalar loss");
  loss->g[0] = 1.0;
  for (auto it = back_.rbegin(); it != back_.rend(); ++it) (*it)();
}

// --- layers -------------------------------------------------------------

LstmParams lstm_init(ParameterStore& store, const std::string& prefix, int input_dim, int hidden,
                     Rng& rng) {
  LstmParams p;
  p.Wx = &store.create(prefix + ".Wx", {4 * hidden, input_dim}, rng);
  p.Wh = &store.create(prefix + ".Wh", {4 * hidden, hidden}, rng);
  p.b = &store.create(prefix + ".b", {4 * hidden}, rng);
  p.hidden = hidden;
  return p;
}

std::pair<Tape::Var*, Tape::Var*> lstm_step(Tape& tape, Tape::Var* x, Tape::Var* h_prev,
                                            Tape::Var* c_prev, const LstmParams& p) {
  const int h = p.hidden;
  Tape::Var* gates = tape.add(tape.affine(tape.param(*p.Wx), x, tape.param(*p.b)),
                              tape.affine(tape.param(*p.Wh), h_prev, nullptr));
  Tape::Var* i_gate = tape.sigmoid(tape.slice(gates, 0, h));
  Tape::Var* f_gate = tape.sigmoid(tape.slice(gates, h, h));
  Tape::Var* o_gate = tape.sigmoid(tape.slice(gates, 2 * h, h));
  Tape::Var* cand = tape.tanh(tape.slice(gates, 3 * h, h));
  Tape::Var* c_t = tape.add(tape.mul(f_gate, c_prev), tape.mul(i_gate, cand));
  Tape::Var* h_t = tape.mul(o_gate, tape.tanh(c_t));
  return {h_t, c_t};
}

BrnnParams brnn_init(ParameterStore& store, const std::string& prefix, int input_dim, int hidden,
                     int layers, Rng& rng) {
  BrnnParams p;
  p.hidden = hidden;
  int in_dim = input_dim;
  for (int k = 0; k < layers; ++k) {
    const std::string base = prefix + ".l" + std::to_string(k);
    p.layers.emplace_back(lstm_init(store, base + ".fw", in_dim, hidden, rng),
                          lstm_init(store, base + ".bw", in_dim, hidden, rng));
    in_dim = 2 * hidden;
  }
  return p;
}

Tape::Var* brnn_encode(Tape& tape, const std::vector<Tape::Var*>& seq, const BrnnParams& p,
                       real_t dropout, Rng* rng, bool train) {
  if (seq.empty()) throw Error("brnn_encode: empty sequence");
  const int h = p.hidden;
  const size_t T = seq.size();
  std::vector<Tape::Var*> stream = seq;
  Tape::Var* top_fw_last = nullptr;
  Tape::Var* top_bw_last = nullptr;
  for (const auto& [fw, bw] : p.layers) {
    std::vector<Tape::Var*> in(T);
    for (size_t t = 0; t < T; ++t)
      in[t] = (train && rng) ? tape.dropout(stream[t], dropout, *rng, train) : stream[t];

    std::vector<Tape::Var*> fw_h(T), bw_h(T);
    Tape::Var* hh = tape.zeros({h});
    Tape::Var* cc = tape.zeros({h});
    for (size_t t = 0; t < T; ++t) {
      std::tie(hh, cc) = lstm_step(tape, in[t], hh, cc, fw);
      fw_h[t] = hh;
    }
    top_fw_last = fw_h[T - 1];
    hh = tape.zeros({h});
    cc = tape.zeros({h});
    for (size_t t = T; t-- > 0;) {
      std::tie(hh, cc) = lstm_step(tape, in[t], hh, cc, bw);
      bw_h[t] = hh;
    }
    top_bw_last = bw_h[0];

    std::vector<Tape::Var*> out(T);
    for (size_t t = 0; t < T; ++t) {
      out[t] = tape.concat({fw_h[t], bw_h[t]});
      if (stream[t]->shape == out[t]->shape) out[t] = tape.add(out[t], stream[t]);
    }
    stream = std::move(out);
  }
  return tape.concat({top_fw_last, top_bw_last});
}

// --- AdaDelta ----------------------------------------------------------------

void AdaDelta::step(ParameterStore& store) {
  for (auto& [name, t] : store.params) {
    auto& [eg2, edx2] = acc_[name];
    if (eg2.empty()) {
      eg2.assign(t.size(), 0.0);
      edx2.assign(t.size(), 0.0);
    }
    for (size_t i = 0; i < t.size(); ++i) {
      const real_t g = t.g[i];
      eg2[i] = rho_ * eg2[i] + (1.0 - rho_) * g * g;
      const real_t dx = -rate_ * (std::sqrt(edx2[i] + eps_) / std::sqrt(eg2[i] + eps_)) * g;
      if (!std::isfinite(dx)) throw Error("non-finite AdaDelta update for " + name);
      edx2[i] = rho_ * edx2[i] + (1.0 - rho_) * dx * dx;
      t.v[i] += dx;
    }
  }
}

// --- gradient checking ---------------------------------------------------------

GradCheckReport grad_check(ParameterStore& store, const std::function<real_t(bool)>& eval,
                           real_t eps, int coords_per_param, uint64_t seed) {
  store.zero_grad();
  eval(true);
  std::map<std::string, std::vector<real_t>> analytic;
  for (const auto& [name, t] : store.params) analytic[name] = t.g;

  Rng rng(seed);
  GradCheckReport report;
  for (auto& [name, t] : store.params) {
    const size_t n = t.size();
    std::vector<size_t> coords;
    if (static_cast<size_t>(coords_per_param) >= n) {
      coords.resize(n);
      for (size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (int k = 0; k < coords_per_param; ++k) coords.push_back(static_cast<size_t>(rng.below(n)));
    }
    for (size_t i : coords) {
      const real_t saved = t.v[i];
      t.v[i] = saved + eps;
      const real_t f_plus = eval(false);
      t.v[i] = saved - eps;
      const real_t f_minus = eval(false);
      t.v[i] = saved;
      const real_t numeric = (f_plus - f_minus) / (2.0 * eps);
      const real_t a = analytic[name][i];
      const real_t rel =
          std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

// --- checkpoints ----------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'P', 'C', 'K', 'P'};
constexpr uint8_t kCkptVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v));
  buf.push_back(static_cast<char>(v >> 8));
  buf.push_back(static_cast<char>(v >> 16));
  buf.push_back(static_cast<char>(v >> 24));
}

uint32_t get_u32(const std::string& buf, size_t& pos) {
  if (pos + 4 > buf.size()) throw Error("truncated checkpoint");
  const unsigned char* b = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  pos += 4;
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::string& path,
                     const std::string& header) {
  std::string buf;
  buf.append(kCkptMagic, 4);
  buf.push_back(static_cast<char>(kCkptVersion));
  put_u32(buf, static_cast<uint32_t>(header.size()));
  buf.append(header);
  put_u32(buf, static_cast<uint32_t>(store.params.size()));
  for (const auto& [name, t] : store.params) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    buf.push_back(static_cast<char>(t.shape.size()));
    for (int d : t.shape) put_u32(buf, static_cast<uint32_t>(d));
    for (real_t v : t.v) {
      const float f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(buf, bits);
    }
  }
  const uint64_t checksum = fnv1a64(buf);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(checksum >> (8 * i)));
  write_file(path, buf);
}

std::pair<ParameterStore, std::string> load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 17) throw Error("checkpoint too short: " + path);
  const std::string body = buf.substr(0, buf.size() - 8);
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<uint64_t>(static_cast<unsigned char>(buf[buf.size() - 8 + i])) << (8 * i);
  if (fnv1a64(body) != stored) throw Error("checkpoint checksum mismatch: " + path);

  size_t pos = 0;
  if (memcmp(body.data(), kCkptMagic, 4) != 0) throw Error("bad checkpoint magic: " + path);
  pos = 4;
  if (static_cast<uint8_t>(body[pos++]) != kCkptVersion) throw Error("unsupported checkpoint version");
  const uint32_t header_len = get_u32(body, pos);
  if (pos + header_len > body.size()) throw Error("truncated checkpoint header");
  std::string header = body.substr(pos, header_len);
  pos += header_len;
  const uint32_t count = get_u32(body, pos);
  ParameterStore store;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(body, pos);
    if (pos + name_len > body.size()) throw Error("truncated checkpoint");
    std::string name = body.substr(pos, name_len);
    pos += name_len;
    if (pos >= body.size()) throw Error("truncated checkpoint");
    const int rank = static_cast<unsigned char>(body[pos++]);
    Tensor t;
    size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      const int d = static_cast<int>(get_u32(body, pos));
      t.shape.push_back(d);
      n *= static_cast<size_t>(d);
    }
    t.v.resize(n);
    t.g.assign(n, 0.0);
    for (size_t j = 0; j < n; ++j) {
      const uint32_t bits = get_u32(body, pos);
      float f;
      std::memcpy(&f, &bits, 4);
      t.v[j] = f;
    }
    store.params.emplace(std::move(name), std::move(t));
  }
  return {std::move(store), std::move(header)};
}

}  // namespace poet::nn
