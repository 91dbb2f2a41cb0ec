#include "s2s/model.hpp"

#include <algorithm>

#include "s2s/checkpoint.hpp"
#include "s2s/errors.hpp"
#include "s2s/refsynth.hpp"
#include "s2s/rng.hpp"

namespace s2s {

void ModelConfig::validate() const {
  lm.validate();
  dec.validate();
  tok.validate();
  rates.validate();
  schedule.validate();
  require(frontend.d_llm == lm.d_llm, "ModelConfig: adapter output width ", frontend.d_llm,
          " does not match LLM width ", lm.d_llm);
  require(dec.text_vocab == lm.vocab, "ModelConfig: decoder text vocab ", dec.text_vocab,
          " does not match LLM vocab ", lm.vocab);
  require(dec.codebook_size == tok.codebook_size, "ModelConfig: decoder codebook size ",
          dec.codebook_size, " does not match tokenizer codebook size ", tok.codebook_size);
}

Tensor codebook_feature_bank(const ModelConfig& cfg, std::uint64_t seed) {
  RefSynthConfig synth_cfg;
  synth_cfg.sample_rate = cfg.rates.sample_rate;
  TokenizerConfig tok_cfg = cfg.tok;

  std::vector<double> rows;
  int dim = tok_cfg.n_bands;
  auto add_rows = [&](const Tensor& pooled) {
    rows.insert(rows.end(), pooled.values().begin(), pooled.values().end());
  };

  VoiceStyle plain;
  for (int w = Vocab::kFirstWord; w < cfg.lm.vocab; ++w) {
    auto wave = synth_tokens({w}, -1, plain, synth_cfg);
    add_rows(pool_features(mel_features(wave, cfg.rates.sample_rate, tok_cfg), tok_cfg.pool_factor));
  }
  // tag-modulated variants of the first few words
  for (int tag = Vocab::kFirstEmotion; tag < Vocab::kFirstWord; ++tag) {
    for (int w = Vocab::kFirstWord; w < std::min(Vocab::kFirstWord + 8, cfg.lm.vocab); ++w) {
      auto wave = synth_tokens({w}, tag, plain, synth_cfg);
      add_rows(
          pool_features(mel_features(wave, cfg.rates.sample_rate, tok_cfg), tok_cfg.pool_factor));
    }
  }
  // silence
  for (int i = 0; i < 2 * dim; ++i) rows.push_back(0.0);

  int n = static_cast<int>(rows.size()) / dim;
  if (n < cfg.tok.codebook_size) {
    // filler rows so oversized codebooks remain buildable
    Rng rng(derive_seed(seed, "codebook.filler"));
    while (n < cfg.tok.codebook_size) {
      for (int i = 0; i < dim; ++i) rows.push_back(rng.uniform(0.0, 0.15));
      ++n;
    }
  }
  return Tensor({n, dim}, std::move(rows));
}

S2SModel::S2SModel(const ModelConfig& config, std::uint64_t root_seed)
    : cfg(config),
      vocab(Vocab::make_default(config.lm.vocab)),
      encoder(config.frontend, config.rates),
      adapter(config.frontend, root_seed),
      lm(config.lm, root_seed),
      projection("projection", config.lm.d_llm, config.dec.d_dec, root_seed),
      decoder(config.dec, root_seed),
      vocoder(config.tok, config.rates) {
  cfg.validate();
  Tensor bank = codebook_feature_bank(cfg, root_seed);
  Codebook book = build_codebook(bank, cfg.tok.codebook_size, derive_seed(root_seed, "tokenizer"));
  codebook_vecs = nn::Parameter("tokenizer.codebook", std::move(book.vectors));
  codebook_vecs.trainable = false;
}

std::vector<nn::Parameter*> S2SModel::params() {
  std::vector<nn::Parameter*> out;
  out.push_back(&encoder.probe_param());
  adapter.collect(out);
  lm.collect(out);
  projection.collect(out);
  decoder.collect(out);
  out.push_back(&codebook_vecs);
  out.push_back(&vocoder.band_param());
  return out;
}

void S2SModel::save(const std::string& path) { save_checkpoint(path, params()); }

void S2SModel::load(const std::string& path) { load_into(load_checkpoint(path), params()); }

}  // namespace s2s
