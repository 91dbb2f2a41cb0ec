#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "s2s/tensor.hpp"

namespace s2s::nn {

// A learnable (or deliberately frozen) weight. grad always has the shape of
// value; backward accumulates into grad regardless of trainable — freezing is
// enforced by the optimizer, not by backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape());
  }
  void zero_grad() { grad.set_zero(); }
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from a generator derived from
// (root_seed, parameter name).
void init_uniform(Parameter& p, int fan_in, std::uint64_t root_seed);

std::int64_t param_count(const std::vector<Parameter*>& params);

// Plain SGD: value -= lr * grad for trainable parameters; frozen parameters
// are untouched (bit-identical); every grad is reset to zero.
void sgd_step(const std::vector<Parameter*>& params, double lr);

// ---------------------------------------------------------------------------
// Row primitives. The incremental inference session and the full-sequence
// forward funnel through these same functions so their outputs are
// bit-identical.
// ---------------------------------------------------------------------------

// y[0..out) += sum_i x[i] * w[i*out + o], accumulating in ascending i order.
void addmv_rowmajor(const double* x, const double* w, int in, int out, double* y);
// In-place numerically stable softmax over v[0..n).
void softmax_row(double* v, int n);
// Exact (erf-based) GELU and its derivative.
double gelu(double x);
double gelu_deriv(double x);
// Greedy pick: index of the maximum, lowest index on ties.
int argmax_row(const double* v, int n);

// ---------------------------------------------------------------------------
// Layers. Each caches what backward needs; backward throws if forward has not
// run, accumulates parameter grads additively, and returns the input grad.
// ---------------------------------------------------------------------------

struct Linear {
  Parameter w;  // [in, out]
  Parameter b;  // [out]

  Linear() = default;
  Linear(const std::string& prefix, int in, int out, std::uint64_t root_seed);

  int in_dim() const { return w.value.dim(0); }
  int out_dim() const { return w.value.dim(1); }

  Tensor forward(const Tensor& x);  // [T,in] -> [T,out]
  Tensor backward(const Tensor& dy);
  void forward_row(const double* x, double* y) const;
  void collect(std::vector<Parameter*>& out);

 private:
  Tensor x_cache_;
  bool has_cache_ = false;
};

struct Conv1d {
  Parameter w;  // [out_ch, in_ch, kernel]
  Parameter b;  // [out_ch]
  int kernel = 3, stride = 2, pad = 1;

  Conv1d() = default;
  Conv1d(const std::string& prefix, int in_ch, int out_ch, int kernel, int stride, int pad,
         std::uint64_t root_seed);

  int in_channels() const { return w.value.dim(1); }
  int out_channels() const { return w.value.dim(0); }
  int out_len(int n) const;

  Tensor forward(const Tensor& x);  // [T,in_ch] -> [out_len(T),out_ch]
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Parameter*>& out);

 private:
  Tensor x_cache_;
  bool has_cache_ = false;
};

struct Embedding {
  Parameter table;  // [V, d]

  Embedding() = default;
  Embedding(const std::string& name, int vocab, int dim, std::uint64_t root_seed);

  int vocab() const { return table.value.dim(0); }
  int dim() const { return table.value.dim(1); }

  Tensor forward(const std::vector<int>& ids);
  void backward(const Tensor& dy);  // ids have no grad
  void collect(std::vector<Parameter*>& out) { out.push_back(&table); }

 private:
  std::vector<int> ids_cache_;
  bool has_cache_ = false;
};

struct LayerNorm {
  Parameter gain;  // [d]
  Parameter bias;  // [d]
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(const std::string& prefix, int dim, std::uint64_t root_seed);

  int dim() const { return gain.value.dim(0); }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void forward_row(const double* x, double* y) const;
  void collect(std::vector<Parameter*>& out);

 private:
  Tensor x_cache_;
  bool has_cache_ = false;
};

struct Gelu {
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  Tensor x_cache_;
  bool has_cache_ = false;
};

// Multi-head attention where position t attends to positions <= t only.
struct CausalSelfAttention {
  int heads = 1;
  Linear qkv;   // d -> 3d
  Linear proj;  // d -> d

  CausalSelfAttention() = default;
  CausalSelfAttention(const std::string& prefix, int dim, int heads, std::uint64_t root_seed);

  int dim() const { return qkv.in_dim(); }
  int head_dim() const { return dim() / heads; }

  Tensor forward(const Tensor& x);  // [T,d] -> [T,d]
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Parameter*>& out);

 private:
  Tensor qkv_cache_;    // [T, 3d]
  Tensor probs_cache_;  // [heads, T, T], zero above the diagonal
  bool has_cache_ = false;
};

struct Ffn {
  Linear fc1;  // d -> hidden
  Linear fc2;  // hidden -> d
  Gelu act;

  Ffn() = default;
  Ffn(const std::string& prefix, int dim, int hidden, std::uint64_t root_seed);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Parameter*>& out);
};

// Pre-LN block: x + attn(ln1(x)), then + ffn(ln2(.)).
struct TransformerBlock {
  LayerNorm ln1;
  CausalSelfAttention attn;
  LayerNorm ln2;
  Ffn ffn;

  TransformerBlock() = default;
  TransformerBlock(const std::string& prefix, int dim, int heads, int ffn_hidden,
                   std::uint64_t root_seed);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Parameter*>& out);
};

struct Transformer {
  std::vector<TransformerBlock> blocks;
  LayerNorm ln_f;
  int dim = 0;

  Transformer() = default;
  Transformer(const std::string& prefix, int dim, int layers, int heads, int ffn_hidden,
              std::uint64_t root_seed);

  Tensor forward(const Tensor& x);  // [T,d] -> [T,d], final LayerNorm applied
  Tensor backward(const Tensor& dy);
  void collect(std::vector<Parameter*>& out);
};

// Incremental decoding over a Transformer with per-layer key/value caches.
// step() reproduces the full-sequence forward bit-exactly, row by row.
class InferenceSession {
 public:
  explicit InferenceSession(const Transformer& model);

  // Feed the embedding for the next position; returns that position's output
  // (after the final LayerNorm).
  std::vector<double> step(std::span<const double> x);
  int length() const { return t_; }

 private:
  struct LayerKv {
    std::vector<double> k;  // t * d, appended per step
    std::vector<double> v;
  };
  const Transformer* model_;
  std::vector<LayerKv> kv_;
  int t_ = 0;
};

// Masked mean cross-entropy over rows of logits. Positions with mask=false
// contribute nothing: their targets are never read by the loss value and
// their logit grads are exactly zero.
struct CrossEntropy {
  double forward(const Tensor& logits, const std::vector<int>& targets,
                 const std::vector<bool>& mask);
  Tensor backward();
  const Tensor& probs() const { return probs_; }

 private:
  Tensor probs_;
  std::vector<int> targets_;
  std::vector<bool> mask_;
  int active_ = 0;
  bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Finite-difference oracle.
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares the analytic gradient (loss_grad populates param grads) against
// central differences of loss() at every scalar parameter. Relative error is
// |a - n| / max(|a|, |n|, 1e-2). Refuses models above 10,000 parameters.
GradCheckReport grad_check(const std::vector<Parameter*>& params,
                           const std::function<double()>& loss,
                           const std::function<double()>& loss_grad, double eps);

}  // namespace s2s::nn
