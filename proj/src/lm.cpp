#include "s2s/lm.hpp"

#include <algorithm>

#include "s2s/errors.hpp"

namespace s2s {

void LmConfig::validate() const {
  require(d_llm >= 1 && layers >= 1 && heads >= 1 && max_len >= 1 && vocab >= 1,
          "LmConfig: dimensions must be positive");
  require(d_llm % heads == 0, "LmConfig: d_llm ", d_llm, " not divisible by heads ", heads);
}

MixedSequence to_mixed(const std::vector<int>& ids) {
  MixedSequence seq;
  seq.reserve(ids.size());
  for (int id : ids) seq.push_back(MixedItem::tok(id));
  return seq;
}

void append_embeddings(MixedSequence& seq, const Tensor& rows) {
  for (int r = 0; r < rows.rows(); ++r) {
    seq.push_back(MixedItem::emb(std::vector<double>(rows.row(r), rows.row(r) + rows.cols())));
  }
}

MicroLm::MicroLm(const LmConfig& cfg, std::uint64_t root_seed) : cfg_(cfg) {
  cfg.validate();
  tok_embed_ = nn::Parameter("llm.tok_embed", Tensor::zeros({cfg.vocab, cfg.d_llm}));
  pos_embed_ = nn::Parameter("llm.pos_embed", Tensor::zeros({cfg.max_len, cfg.d_llm}));
  nn::init_uniform(tok_embed_, cfg.d_llm, root_seed);
  nn::init_uniform(pos_embed_, cfg.d_llm, root_seed);
  trunk_ = nn::Transformer("llm.trunk", cfg.d_llm, cfg.layers, cfg.heads, cfg.ffn_hidden(),
                           root_seed);
  head_ = nn::Linear("llm.head", cfg.d_llm, cfg.vocab, root_seed);
}

Tensor MicroLm::embed_sequence(const MixedSequence& seq) const {
  require(static_cast<int>(seq.size()) <= cfg_.max_len, "MicroLm: sequence length ", seq.size(),
          " exceeds max_len ", cfg_.max_len);
  Tensor x({static_cast<int>(seq.size()), cfg_.d_llm});
  for (std::size_t t = 0; t < seq.size(); ++t) {
    double* row = x.row(static_cast<int>(t));
    if (seq[t].is_token()) {
      int id = seq[t].token;
      require(id >= 0 && id < cfg_.vocab, "MicroLm: token id ", id, " out of range [0, ",
              cfg_.vocab, ")");
      const double* e = tok_embed_.value.row(id);
      for (int i = 0; i < cfg_.d_llm; ++i) row[i] = e[i];
    } else {
      require(static_cast<int>(seq[t].embedding.size()) == cfg_.d_llm,
              "MicroLm: external embedding at position ", t, " has width ",
              seq[t].embedding.size(), ", expected ", cfg_.d_llm);
      for (int i = 0; i < cfg_.d_llm; ++i) row[i] = seq[t].embedding[static_cast<std::size_t>(i)];
    }
    const double* p = pos_embed_.value.row(static_cast<int>(t));
    for (int i = 0; i < cfg_.d_llm; ++i) row[i] += p[i];
  }
  return x;
}

LmOutput MicroLm::forward(const MixedSequence& seq) {
  Tensor x = embed_sequence(seq);
  token_positions_.clear();
  token_ids_.clear();
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].is_token()) {
      token_positions_.push_back(static_cast<int>(t));
      token_ids_.push_back(seq[t].token);
    }
  }
  last_len_ = static_cast<int>(seq.size());
  has_cache_ = true;

  LmOutput out;
  out.hidden = trunk_.forward(x);
  out.logits = head_.forward(out.hidden);
  return out;
}

Tensor MicroLm::backward(const Tensor& dlogits, const Tensor& dhidden) {
  ensure(has_cache_, "MicroLm: backward before forward");
  Tensor dh = head_.backward(dlogits);
  if (!dhidden.empty()) {
    require(dhidden.same_shape(dh), "MicroLm: dhidden shape ", dhidden.shape_str(),
            " does not match hidden shape ", dh.shape_str());
    for (std::int64_t i = 0; i < dh.numel(); ++i) dh[i] += dhidden[i];
  }
  Tensor dx = trunk_.backward(dh);

  // positional rows
  for (int t = 0; t < last_len_; ++t) {
    double* g = pos_embed_.grad.row(t);
    const double* d = dx.row(t);
    for (int i = 0; i < cfg_.d_llm; ++i) g[i] += d[i];
  }
  // token-embedding rows
  for (std::size_t k = 0; k < token_positions_.size(); ++k) {
    double* g = tok_embed_.grad.row(token_ids_[k]);
    const double* d = dx.row(token_positions_[k]);
    for (int i = 0; i < cfg_.d_llm; ++i) g[i] += d[i];
  }
  return dx;
}

std::vector<int> MicroLm::generate(const MixedSequence& prefix, int max_new) const {
  require(max_new >= 0, "MicroLm: max_new must be >= 0");
  require(static_cast<int>(prefix.size()) + max_new <= cfg_.max_len,
          "MicroLm: prefix length ", prefix.size(), " + max_new ", max_new, " exceeds max_len ",
          cfg_.max_len);
  if (max_new == 0) return {};

  nn::InferenceSession session(trunk_);
  std::vector<double> logits(static_cast<std::size_t>(cfg_.vocab));
  std::vector<double> x(static_cast<std::size_t>(cfg_.d_llm));

  auto feed = [&](const MixedItem& item, int t) {
    if (item.is_token()) {
      require(item.token >= 0 && item.token < cfg_.vocab, "MicroLm: token id ", item.token,
              " out of range");
      const double* e = tok_embed_.value.row(item.token);
      for (int i = 0; i < cfg_.d_llm; ++i) x[static_cast<std::size_t>(i)] = e[i];
    } else {
      require(static_cast<int>(item.embedding.size()) == cfg_.d_llm,
              "MicroLm: bad embedding width in prefix");
      std::copy(item.embedding.begin(), item.embedding.end(), x.begin());
    }
    const double* p = pos_embed_.value.row(t);
    for (int i = 0; i < cfg_.d_llm; ++i) x[static_cast<std::size_t>(i)] += p[i];
    return session.step(x);
  };

  std::vector<double> h;
  int t = 0;
  for (const MixedItem& item : prefix) h = feed(item, t++);
  require(t > 0, "MicroLm: cannot generate from an empty prefix");

  std::vector<int> out;
  for (int k = 0; k < max_new; ++k) {
    head_.forward_row(h.data(), logits.data());
    int next = nn::argmax_row(logits.data(), cfg_.vocab);
    if (next == Vocab::kEos) break;
    out.push_back(next);
    if (k + 1 < max_new) h = feed(MixedItem::tok(next), t++);
  }
  return out;
}

Tensor MicroLm::response_hidden_states(const MixedSequence& prompt,
                                       const std::vector<int>& response) {
  MixedSequence seq = prompt;
  for (int id : response) seq.push_back(MixedItem::tok(id));
  LmOutput out = forward(seq);
  Tensor result({static_cast<int>(response.size()), cfg_.d_llm});
  int base = static_cast<int>(prompt.size());
  for (std::size_t r = 0; r < response.size(); ++r) {
    const double* src = out.hidden.row(base + static_cast<int>(r));
    std::copy(src, src + cfg_.d_llm, result.row(static_cast<int>(r)));
  }
  return result;
}

void MicroLm::collect(std::vector<nn::Parameter*>& out) {
  out.push_back(&tok_embed_);
  out.push_back(&pos_embed_);
  trunk_.collect(out);
  head_.collect(out);
}

}  // namespace s2s
