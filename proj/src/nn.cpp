#include "s2s/nn.hpp"

#include <algorithm>
#include <cmath>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"
#include "s2s/stream.hpp"

namespace s2s::nn {

void init_uniform(Parameter& p, int fan_in, std::uint64_t root_seed) {
  require(fan_in >= 1, "init_uniform: fan_in must be >= 1 for ", p.name);
  Rng rng(derive_seed(root_seed, p.name));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < p.value.numel(); ++i) p.value[i] = rng.uniform(-bound, bound);
}

std::int64_t param_count(const std::vector<Parameter*>& params) {
  std::int64_t n = 0;
  for (const Parameter* p : params) n += p->value.numel();
  return n;
}

void sgd_step(const std::vector<Parameter*>& params, double lr) {
  for (Parameter* p : params) {
    if (p->trainable) {
      for (std::int64_t i = 0; i < p->value.numel(); ++i) p->value[i] -= lr * p->grad[i];
    }
    p->zero_grad();
  }
}

void addmv_rowmajor(const double* x, const double* w, int in, int out, double* y) {
  for (int i = 0; i < in; ++i) {
    double xi = x[i];
    const double* wrow = w + static_cast<std::size_t>(i) * out;
    for (int o = 0; o < out; ++o) y[o] += xi * wrow[o];
  }
}

void softmax_row(double* v, int n) {
  double m = v[0];
  for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - m);
    sum += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= sum;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

int argmax_row(const double* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(const std::string& prefix, int in, int out, std::uint64_t root_seed) {
  w = Parameter(prefix + ".w", Tensor::zeros({in, out}));
  b = Parameter(prefix + ".b", Tensor::zeros({out}));
  init_uniform(w, in, root_seed);
  init_uniform(b, in, root_seed);
}

Tensor Linear::forward(const Tensor& x) {
  require(x.rank() == 2 && x.dim(1) == in_dim(), "Linear ", w.name, ": expected shape [T, ",
          in_dim(), "], got ", x.shape_str());
  int t = x.dim(0);
  Tensor y({t, out_dim()});
  for (int r = 0; r < t; ++r) {
    double* yr = y.row(r);
    for (int o = 0; o < out_dim(); ++o) yr[o] = b.value[o];
    addmv_rowmajor(x.row(r), w.value.data(), in_dim(), out_dim(), yr);
  }
  x_cache_ = x;
  has_cache_ = true;
  return y;
}

void Linear::forward_row(const double* x, double* y) const {
  for (int o = 0; o < out_dim(); ++o) y[o] = b.value[o];
  addmv_rowmajor(x, w.value.data(), in_dim(), out_dim(), y);
}

Tensor Linear::backward(const Tensor& dy) {
  ensure(has_cache_, "Linear ", w.name, ": backward before forward");
  int t = x_cache_.dim(0);
  check_shape(dy, {t, out_dim()}, "Linear backward " + w.name);
  Tensor dx({t, in_dim()});
  for (int r = 0; r < t; ++r) {
    const double* xr = x_cache_.row(r);
    const double* dyr = dy.row(r);
    double* dxr = dx.row(r);
    for (int i = 0; i < in_dim(); ++i) {
      const double* wrow = w.value.data() + static_cast<std::size_t>(i) * out_dim();
      double* gwrow = w.grad.data() + static_cast<std::size_t>(i) * out_dim();
      double acc = 0.0;
      double xi = xr[i];
      for (int o = 0; o < out_dim(); ++o) {
        acc += dyr[o] * wrow[o];
        gwrow[o] += xi * dyr[o];
      }
      dxr[i] = acc;
    }
    for (int o = 0; o < out_dim(); ++o) b.grad[o] += dyr[o];
  }
  return dx;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// ----------------------------------------------------------------- Conv1d

Conv1d::Conv1d(const std::string& prefix, int in_ch, int out_ch, int k, int s, int p,
               std::uint64_t root_seed)
    : kernel(k), stride(s), pad(p) {
  require(k >= 1 && s >= 1 && p >= 0, "Conv1d ", prefix, ": bad geometry");
  w = Parameter(prefix + ".w", Tensor::zeros({out_ch, in_ch, k}));
  b = Parameter(prefix + ".b", Tensor::zeros({out_ch}));
  init_uniform(w, in_ch * k, root_seed);
  init_uniform(b, in_ch * k, root_seed);
}

int Conv1d::out_len(int n) const { return conv1d_out_len(n, kernel, stride, pad); }

Tensor Conv1d::forward(const Tensor& x) {
  require(x.rank() == 2 && x.dim(1) == in_channels(), "Conv1d ", w.name,
          ": expected shape [T, ", in_channels(), "], got ", x.shape_str());
  int t_in = x.dim(0);
  int t_out = out_len(t_in);
  Tensor y({t_out, out_channels()});
  for (int t = 0; t < t_out; ++t) {
    double* yr = y.row(t);
    for (int o = 0; o < out_channels(); ++o) {
      double acc = b.value[o];
      const double* wrow = w.value.data() + static_cast<std::size_t>(o) * in_channels() * kernel;
      for (int dk = 0; dk < kernel; ++dk) {
        int src = t * stride - pad + dk;
        if (src < 0 || src >= t_in) continue;  // zero padding
        const double* xr = x.row(src);
        for (int i = 0; i < in_channels(); ++i) acc += wrow[i * kernel + dk] * xr[i];
      }
      yr[o] = acc;
    }
  }
  x_cache_ = x;
  has_cache_ = true;
  return y;
}

Tensor Conv1d::backward(const Tensor& dy) {
  ensure(has_cache_, "Conv1d ", w.name, ": backward before forward");
  int t_in = x_cache_.dim(0);
  int t_out = out_len(t_in);
  check_shape(dy, {t_out, out_channels()}, "Conv1d backward " + w.name);
  Tensor dx({t_in, in_channels()});
  for (int t = 0; t < t_out; ++t) {
    const double* dyr = dy.row(t);
    for (int o = 0; o < out_channels(); ++o) {
      double g = dyr[o];
      b.grad[o] += g;
      const double* wrow = w.value.data() + static_cast<std::size_t>(o) * in_channels() * kernel;
      double* gwrow = w.grad.data() + static_cast<std::size_t>(o) * in_channels() * kernel;
      for (int dk = 0; dk < kernel; ++dk) {
        int src = t * stride - pad + dk;
        if (src < 0 || src >= t_in) continue;
        const double* xr = x_cache_.row(src);
        double* dxr = dx.row(src);
        for (int i = 0; i < in_channels(); ++i) {
          gwrow[i * kernel + dk] += g * xr[i];
          dxr[i] += g * wrow[i * kernel + dk];
        }
      }
    }
  }
  return dx;
}

void Conv1d::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// -------------------------------------------------------------- Embedding

Embedding::Embedding(const std::string& name, int vocab_size, int dim, std::uint64_t root_seed) {
  table = Parameter(name, Tensor::zeros({vocab_size, dim}));
  init_uniform(table, dim, root_seed);
}

Tensor Embedding::forward(const std::vector<int>& ids) {
  Tensor y({static_cast<int>(ids.size()), dim()});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    require(ids[t] >= 0 && ids[t] < vocab(), "Embedding ", table.name, ": id ", ids[t],
            " out of range [0, ", vocab(), ")");
    const double* src = table.value.row(ids[t]);
    std::copy(src, src + dim(), y.row(static_cast<int>(t)));
  }
  ids_cache_ = ids;
  has_cache_ = true;
  return y;
}

void Embedding::backward(const Tensor& dy) {
  ensure(has_cache_, "Embedding ", table.name, ": backward before forward");
  check_shape(dy, {static_cast<int>(ids_cache_.size()), dim()}, "Embedding backward " + table.name);
  for (std::size_t t = 0; t < ids_cache_.size(); ++t) {
    double* g = table.grad.row(ids_cache_[t]);
    const double* dyr = dy.row(static_cast<int>(t));
    for (int i = 0; i < dim(); ++i) g[i] += dyr[i];
  }
}

// -------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(const std::string& prefix, int dim, std::uint64_t root_seed) {
  (void)root_seed;  // deterministic init: gain 1, bias 0
  gain = Parameter(prefix + ".gain", Tensor::zeros({dim}));
  bias = Parameter(prefix + ".bias", Tensor::zeros({dim}));
  gain.value.fill(1.0);
}

Tensor LayerNorm::forward(const Tensor& x) {
  require(x.rank() == 2 && x.dim(1) == dim(), "LayerNorm ", gain.name, ": expected [T, ", dim(),
          "], got ", x.shape_str());
  int t = x.dim(0);
  Tensor y({t, dim()});
  for (int r = 0; r < t; ++r) forward_row(x.row(r), y.row(r));
  x_cache_ = x;
  has_cache_ = true;
  return y;
}

void LayerNorm::forward_row(const double* x, double* y) const {
  int d = dim();
  double mean = 0.0;
  for (int i = 0; i < d; ++i) mean += x[i];
  mean /= d;
  double var = 0.0;
  for (int i = 0; i < d; ++i) {
    double c = x[i] - mean;
    var += c * c;
  }
  var /= d;
  double inv = 1.0 / std::sqrt(var + eps);
  for (int i = 0; i < d; ++i) y[i] = gain.value[i] * ((x[i] - mean) * inv) + bias.value[i];
}

Tensor LayerNorm::backward(const Tensor& dy) {
  ensure(has_cache_, "LayerNorm ", gain.name, ": backward before forward");
  int t = x_cache_.dim(0);
  int d = dim();
  check_shape(dy, {t, d}, "LayerNorm backward " + gain.name);
  Tensor dx({t, d});
  for (int r = 0; r < t; ++r) {
    const double* x = x_cache_.row(r);
    const double* dyr = dy.row(r);
    double* dxr = dx.row(r);
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += x[i];
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      double c = x[i] - mean;
      var += c * c;
    }
    var /= d;
    double inv = 1.0 / std::sqrt(var + eps);
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int i = 0; i < d; ++i) {
      double xhat = (x[i] - mean) * inv;
      double dxhat = dyr[i] * gain.value[i];
      gain.grad[i] += dyr[i] * xhat;
      bias.grad[i] += dyr[i];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    for (int i = 0; i < d; ++i) {
      double xhat = (x[i] - mean) * inv;
      double dxhat = dyr[i] * gain.value[i];
      dxr[i] = inv * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
    }
  }
  return dx;
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

// ------------------------------------------------------------------- Gelu

Tensor Gelu::forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = gelu(x[i]);
  x_cache_ = x;
  has_cache_ = true;
  return y;
}

Tensor Gelu::backward(const Tensor& dy) {
  ensure(has_cache_, "Gelu: backward before forward");
  require(dy.shape() == x_cache_.shape(), "Gelu backward: shape mismatch");
  Tensor dx(x_cache_.shape());
  for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] = dy[i] * gelu_deriv(x_cache_[i]);
  return dx;
}

// -------------------------------------------------- CausalSelfAttention

CausalSelfAttention::CausalSelfAttention(const std::string& prefix, int dim, int heads_,
                                         std::uint64_t root_seed)
    : heads(heads_),
      qkv(prefix + ".qkv", dim, 3 * dim, root_seed),
      proj(prefix + ".proj", dim, dim, root_seed) {
  require(dim % heads_ == 0, "CausalSelfAttention ", prefix, ": dim ", dim,
          " not divisible by heads ", heads_);
}

Tensor CausalSelfAttention::forward(const Tensor& x) {
  int t_len = x.dim(0);
  int d = dim();
  int dh = head_dim();
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor qkv_out = qkv.forward(x);  // [T, 3d]
  Tensor probs({heads, t_len, t_len});
  Tensor ctx({t_len, d});

  for (int h = 0; h < heads; ++h) {
    int q_off = h * dh;
    int k_off = d + h * dh;
    int v_off = 2 * d + h * dh;
    for (int t = 0; t < t_len; ++t) {
      const double* qt = qkv_out.row(t) + q_off;
      double* prow = probs.data() + (static_cast<std::size_t>(h) * t_len + t) * t_len;
      for (int j = 0; j <= t; ++j) {
        const double* kj = qkv_out.row(j) + k_off;
        double s = 0.0;
        for (int i = 0; i < dh; ++i) s += qt[i] * kj[i];
        prow[j] = s * scale;
      }
      softmax_row(prow, t + 1);
      double* out = ctx.row(t) + q_off;
      for (int j = 0; j <= t; ++j) {
        const double* vj = qkv_out.row(j) + v_off;
        double pj = prow[j];
        for (int i = 0; i < dh; ++i) out[i] += pj * vj[i];
      }
    }
  }

  qkv_cache_ = qkv_out;
  probs_cache_ = std::move(probs);
  has_cache_ = true;
  return proj.forward(ctx);
}

Tensor CausalSelfAttention::backward(const Tensor& dy) {
  ensure(has_cache_, "CausalSelfAttention: backward before forward");
  int t_len = qkv_cache_.dim(0);
  int d = dim();
  int dh = head_dim();
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor dctx = proj.backward(dy);  // [T, d]
  Tensor dqkv({t_len, 3 * d});

  for (int h = 0; h < heads; ++h) {
    int q_off = h * dh;
    int k_off = d + h * dh;
    int v_off = 2 * d + h * dh;
    std::vector<double> dp(static_cast<std::size_t>(t_len));
    for (int t = 0; t < t_len; ++t) {
      const double* prow =
          probs_cache_.data() + (static_cast<std::size_t>(h) * t_len + t) * t_len;
      const double* dout = dctx.row(t) + q_off;
      const double* qt = qkv_cache_.row(t) + q_off;
      double* dqt = dqkv.row(t) + q_off;

      double dot = 0.0;
      for (int j = 0; j <= t; ++j) {
        const double* vj = qkv_cache_.row(j) + v_off;
        double* dvj = dqkv.row(j) + v_off;
        double s = 0.0;
        for (int i = 0; i < dh; ++i) {
          s += dout[i] * vj[i];
          dvj[i] += prow[j] * dout[i];
        }
        dp[static_cast<std::size_t>(j)] = s;
        dot += prow[j] * s;
      }
      for (int j = 0; j <= t; ++j) {
        double ds = prow[j] * (dp[static_cast<std::size_t>(j)] - dot) * scale;
        const double* kj = qkv_cache_.row(j) + k_off;
        double* dkj = dqkv.row(j) + k_off;
        for (int i = 0; i < dh; ++i) {
          dqt[i] += ds * kj[i];
          dkj[i] += ds * qt[i];
        }
      }
    }
  }
  return qkv.backward(dqkv);
}

void CausalSelfAttention::collect(std::vector<Parameter*>& out) {
  qkv.collect(out);
  proj.collect(out);
}

// -------------------------------------------------------------------- Ffn

Ffn::Ffn(const std::string& prefix, int dim, int hidden, std::uint64_t root_seed)
    : fc1(prefix + ".fc1", dim, hidden, root_seed), fc2(prefix + ".fc2", hidden, dim, root_seed) {}

Tensor Ffn::forward(const Tensor& x) { return fc2.forward(act.forward(fc1.forward(x))); }

Tensor Ffn::backward(const Tensor& dy) { return fc1.backward(act.backward(fc2.backward(dy))); }

void Ffn::collect(std::vector<Parameter*>& out) {
  fc1.collect(out);
  fc2.collect(out);
}

// ------------------------------------------------------- TransformerBlock

TransformerBlock::TransformerBlock(const std::string& prefix, int dim, int heads, int ffn_hidden,
                                   std::uint64_t root_seed)
    : ln1(prefix + ".ln1", dim, root_seed),
      attn(prefix + ".attn", dim, heads, root_seed),
      ln2(prefix + ".ln2", dim, root_seed),
      ffn(prefix + ".ffn", dim, ffn_hidden, root_seed) {}

Tensor TransformerBlock::forward(const Tensor& x) {
  Tensor a = attn.forward(ln1.forward(x));
  for (std::int64_t i = 0; i < a.numel(); ++i) a[i] += x[i];
  Tensor f = ffn.forward(ln2.forward(a));
  for (std::int64_t i = 0; i < f.numel(); ++i) f[i] += a[i];
  return f;
}

Tensor TransformerBlock::backward(const Tensor& dy) {
  Tensor da = ln2.backward(ffn.backward(dy));
  for (std::int64_t i = 0; i < da.numel(); ++i) da[i] += dy[i];
  Tensor dx = ln1.backward(attn.backward(da));
  for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] += da[i];
  return dx;
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  ln1.collect(out);
  attn.collect(out);
  ln2.collect(out);
  ffn.collect(out);
}

// ------------------------------------------------------------ Transformer

Transformer::Transformer(const std::string& prefix, int dim_, int layers, int heads,
                         int ffn_hidden, std::uint64_t root_seed)
    : ln_f(prefix + ".ln_f", dim_, root_seed), dim(dim_) {
  for (int l = 0; l < layers; ++l) {
    blocks.emplace_back(prefix + ".block" + std::to_string(l), dim_, heads, ffn_hidden, root_seed);
  }
}

Tensor Transformer::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& b : blocks) h = b.forward(h);
  return ln_f.forward(h);
}

Tensor Transformer::backward(const Tensor& dy) {
  Tensor g = ln_f.backward(dy);
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
  return g;
}

void Transformer::collect(std::vector<Parameter*>& out) {
  for (auto& b : blocks) b.collect(out);
  ln_f.collect(out);
}

// ------------------------------------------------------- InferenceSession

InferenceSession::InferenceSession(const Transformer& model)
    : model_(&model), kv_(model.blocks.size()) {}

std::vector<double> InferenceSession::step(std::span<const double> x) {
  int d = model_->dim;
  require(static_cast<int>(x.size()) == d, "InferenceSession: expected row of ", d, ", got ",
          x.size());
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> normed(static_cast<std::size_t>(d));
  std::vector<double> qkv_row(static_cast<std::size_t>(3 * d));

  for (std::size_t l = 0; l < model_->blocks.size(); ++l) {
    const TransformerBlock& blk = model_->blocks[l];
    LayerKv& cache = kv_[l];
    int dh = blk.attn.head_dim();
    int heads = blk.attn.heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    blk.ln1.forward_row(cur.data(), normed.data());
    blk.attn.qkv.forward_row(normed.data(), qkv_row.data());
    cache.k.insert(cache.k.end(), qkv_row.begin() + d, qkv_row.begin() + 2 * d);
    cache.v.insert(cache.v.end(), qkv_row.begin() + 2 * d, qkv_row.begin() + 3 * d);
    int t = t_;  // this position's index

    std::vector<double> ctx(static_cast<std::size_t>(d), 0.0);
    std::vector<double> scores(static_cast<std::size_t>(t + 1));
    for (int h = 0; h < heads; ++h) {
      const double* qt = qkv_row.data() + h * dh;
      for (int j = 0; j <= t; ++j) {
        const double* kj = cache.k.data() + static_cast<std::size_t>(j) * d + h * dh;
        double s = 0.0;
        for (int i = 0; i < dh; ++i) s += qt[i] * kj[i];
        scores[static_cast<std::size_t>(j)] = s * scale;
      }
      softmax_row(scores.data(), t + 1);
      double* out = ctx.data() + h * dh;
      for (int j = 0; j <= t; ++j) {
        const double* vj = cache.v.data() + static_cast<std::size_t>(j) * d + h * dh;
        double pj = scores[static_cast<std::size_t>(j)];
        for (int i = 0; i < dh; ++i) out[i] += pj * vj[i];
      }
    }

    std::vector<double> attn_out(static_cast<std::size_t>(d));
    blk.attn.proj.forward_row(ctx.data(), attn_out.data());
    for (int i = 0; i < d; ++i) cur[static_cast<std::size_t>(i)] += attn_out[static_cast<std::size_t>(i)];

    blk.ln2.forward_row(cur.data(), normed.data());
    std::vector<double> ffn_hidden(static_cast<std::size_t>(blk.ffn.fc1.out_dim()));
    blk.ffn.fc1.forward_row(normed.data(), ffn_hidden.data());
    for (double& v : ffn_hidden) v = gelu(v);
    std::vector<double> ffn_out(static_cast<std::size_t>(d));
    blk.ffn.fc2.forward_row(ffn_hidden.data(), ffn_out.data());
    for (int i = 0; i < d; ++i) cur[static_cast<std::size_t>(i)] += ffn_out[static_cast<std::size_t>(i)];
  }

  std::vector<double> out(static_cast<std::size_t>(d));
  model_->ln_f.forward_row(cur.data(), out.data());
  ++t_;
  return out;
}

// ------------------------------------------------------------ CrossEntropy

double CrossEntropy::forward(const Tensor& logits, const std::vector<int>& targets,
                             const std::vector<bool>& mask) {
  int t_len = logits.dim(0);
  int v = logits.dim(1);
  require(static_cast<int>(targets.size()) == t_len && static_cast<int>(mask.size()) == t_len,
          "CrossEntropy: got ", t_len, " logit rows, ", targets.size(), " targets, ", mask.size(),
          " mask entries");

  probs_ = logits;
  active_ = 0;
  double loss = 0.0;
  for (int t = 0; t < t_len; ++t) {
    softmax_row(probs_.row(t), v);
    if (!mask[static_cast<std::size_t>(t)]) continue;
    int tgt = targets[static_cast<std::size_t>(t)];
    require(tgt >= 0 && tgt < v, "CrossEntropy: target ", tgt, " out of range [0, ", v, ")");
    loss -= std::log(std::max(probs_.at(t, tgt), 1e-300));
    ++active_;
  }
  targets_ = targets;
  mask_ = mask;
  has_cache_ = true;
  return active_ > 0 ? loss / active_ : 0.0;
}

Tensor CrossEntropy::backward() {
  ensure(has_cache_, "CrossEntropy: backward before forward");
  Tensor dlogits(probs_.shape());
  if (active_ == 0) return dlogits;
  int t_len = probs_.dim(0);
  int v = probs_.dim(1);
  double inv = 1.0 / active_;
  for (int t = 0; t < t_len; ++t) {
    if (!mask_[static_cast<std::size_t>(t)]) continue;  // exact zero grad off-mask
    const double* p = probs_.row(t);
    double* g = dlogits.row(t);
    for (int i = 0; i < v; ++i) g[i] = p[i] * inv;
    g[targets_[static_cast<std::size_t>(t)]] -= inv;
  }
  return dlogits;
}

// -------------------------------------------------------------- grad_check

GradCheckReport grad_check(const std::vector<Parameter*>& params,
                           const std::function<double()>& loss,
                           const std::function<double()>& loss_grad, double eps) {
  std::int64_t total = param_count(params);
  require(total <= 10000, "grad_check: model has ", total,
          " parameters, oracle cost guard allows at most 10000");
  require(eps > 0, "grad_check: eps must be positive");

  for (Parameter* p : params) p->zero_grad();
  double base = loss_grad();
  ensure(std::isfinite(base), "grad_check: non-finite loss ", base);

  GradCheckReport report;
  for (Parameter* p : params) {
    for (std::int64_t i = 0; i < p->value.numel(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + eps;
      double up = loss();
      p->value[i] = saved - eps;
      double down = loss();
      p->value[i] = saved;
      ensure(std::isfinite(up) && std::isfinite(down), "grad_check: non-finite loss at ", p->name);
      double numeric = (up - down) / (2.0 * eps);
      double analytic = p->grad[i];
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-2});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace s2s::nn
