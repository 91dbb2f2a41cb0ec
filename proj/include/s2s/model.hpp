#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2s/decoder.hpp"
#include "s2s/frontend.hpp"
#include "s2s/lm.hpp"
#include "s2s/stream.hpp"
#include "s2s/token2wav.hpp"
#include "s2s/tokenizer.hpp"
#include "s2s/vocab.hpp"

namespace s2s {

struct ModelConfig {
  FrontendConfig frontend;
  LmConfig lm;
  DecoderConfig dec;
  TokenizerConfig tok;
  RateConfig rates;
  ScheduleConfig schedule;

  void validate() const;
};

// The full pipeline bundle. Components publish parameters under fixed name
// prefixes (encoder_stub, adapter, llm, projection, speech_decoder,
// tokenizer, vocoder) so freeze schedules and checkpoints can address them.
struct S2SModel {
  ModelConfig cfg;
  Vocab vocab;
  EncoderStub encoder;
  Adapter adapter;
  MicroLm lm;
  nn::Linear projection;        // "projection.*": d_llm -> d_dec
  SpeechDecoder decoder;
  nn::Parameter codebook_vecs;  // "tokenizer.codebook", always frozen
  Vocoder vocoder;

  S2SModel(const ModelConfig& cfg, std::uint64_t root_seed);

  std::vector<nn::Parameter*> params();
  Codebook codebook() const { return Codebook{codebook_vecs.value}; }

  void save(const std::string& path);
  void load(const std::string& path);
};

// Deterministic feature bank the VQ codebook is trained on: pooled band
// features of every word chord, tag-modulated variants, silence, plus seeded
// filler rows when the requested codebook exceeds the bank.
Tensor codebook_feature_bank(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace s2s
