#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "s2s/nn.hpp"
#include "s2s/stream.hpp"
#include "s2s/tokenizer.hpp"

namespace s2s {

// Per-band oscillator phases carried across chunks. Waveform bytes depend
// only on the token sequence, never on how it was chunked.
struct VocoderState {
  std::vector<double> phase;  // radians in [0, 2*pi)
  std::int64_t samples_emitted = 0;
};

struct WaveChunk {
  std::vector<double> samples;            // 16 kHz mono
  std::pair<std::int64_t, std::int64_t> token_span;  // [start, end) global token indices
};

// Oscillator-bank synthesizer: each code vector entry is the amplitude of a
// sinusoid at its band's probe frequency; one token covers 80 ms. All-zero
// codes synthesize silence.
class Vocoder {
 public:
  Vocoder(const TokenizerConfig& tok_cfg, const RateConfig& rates);

  int sample_rate() const { return sample_rate_; }
  int samples_per_token() const { return samples_per_token_; }
  int bands() const { return band_hz_.value.dim(0); }

  VocoderState make_state() const;

  // Synthesizes len(tokens) * samples_per_token samples, advancing the state.
  WaveChunk synth_chunk(std::span<const int> tokens, const Codebook& book,
                        VocoderState& state) const;

  // Partitions via chunk_boundaries and folds synth_chunk over a fresh state.
  std::vector<double> synth_stream(const SpeechTokenSequence& tokens, int chunk_tokens,
                                   const Codebook& book) const;

  nn::Parameter& band_param() { return band_hz_; }
  const nn::Parameter& band_param() const { return band_hz_; }

 private:
  int sample_rate_;
  int samples_per_token_;
  double master_gain_ = 0.2;
  nn::Parameter band_hz_;  // "vocoder.band_hz", always frozen
};

}  // namespace s2s
