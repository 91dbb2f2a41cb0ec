#pragma once

#include <cstdint>
#include <vector>

#include "s2s/nn.hpp"
#include "s2s/tensor.hpp"
#include "s2s/vocab.hpp"

namespace s2s {

struct LmConfig {
  int d_llm = 64;
  int layers = 2;
  int heads = 2;
  int max_len = 512;
  int vocab = 128;

  int ffn_hidden() const { return 4 * d_llm; }
  void validate() const;
};

// One position of a mixed audio/text input sequence: either a token id or an
// externally supplied embedding of width d_llm.
struct MixedItem {
  int token = -1;
  std::vector<double> embedding;

  bool is_token() const { return embedding.empty(); }
  static MixedItem tok(int id) { return {id, {}}; }
  static MixedItem emb(std::vector<double> e) { return {-1, std::move(e)}; }
};
using MixedSequence = std::vector<MixedItem>;

MixedSequence to_mixed(const std::vector<int>& ids);
// Appends the rows of a [k, d_llm] tensor as embedding items.
void append_embeddings(MixedSequence& seq, const Tensor& rows);

struct LmOutput {
  Tensor logits;  // [T, vocab]
  Tensor hidden;  // [T, d_llm], final-layer states (after the last LayerNorm)
};

// Toy decoder-only language model over the text vocabulary. Parameters are
// named "llm.*".
class MicroLm {
 public:
  MicroLm(const LmConfig& cfg, std::uint64_t root_seed);

  const LmConfig& config() const { return cfg_; }

  LmOutput forward(const MixedSequence& seq);

  // dlogits [T, vocab] and dhidden [T, d_llm] (either may be empty for zero).
  // Accumulates parameter grads; returns the grad of the input embeddings so
  // upstream modules (the adapter) can continue the chain.
  Tensor backward(const Tensor& dlogits, const Tensor& dhidden);

  // Greedy decoding, ties to the lowest id; stops at <eos> or max_new.
  // <eos> is not included in the returned ids. Does not disturb training
  // caches.
  std::vector<int> generate(const MixedSequence& prefix, int max_new) const;

  // Final-layer states at the response positions of a teacher-forced pass:
  // rows [len(prompt), len(prompt)+len(response)) of forward(prompt+response).
  Tensor response_hidden_states(const MixedSequence& prompt, const std::vector<int>& response);

  void collect(std::vector<nn::Parameter*>& out);

 private:
  Tensor embed_sequence(const MixedSequence& seq) const;

  LmConfig cfg_;
  nn::Parameter tok_embed_;  // "llm.tok_embed" [vocab, d]
  nn::Parameter pos_embed_;  // "llm.pos_embed" [max_len, d]
  nn::Transformer trunk_;    // "llm.trunk.*"
  nn::Linear head_;          // "llm.head" [d, vocab]

  // backward bookkeeping from the last forward
  std::vector<int> token_positions_;
  std::vector<int> token_ids_;
  int last_len_ = 0;
  bool has_cache_ = false;
};

}  // namespace s2s
