#include "s2s/token2wav.hpp"

#include <cmath>

#include "s2s/errors.hpp"

namespace s2s {

Vocoder::Vocoder(const TokenizerConfig& tok_cfg, const RateConfig& rates) {
  tok_cfg.validate();
  sample_rate_ = rates.sample_rate;
  samples_per_token_ = rates.samples_per_token();
  band_hz_ = nn::Parameter("vocoder.band_hz", Tensor::zeros({tok_cfg.n_bands}));
  band_hz_.trainable = false;
  for (int b = 0; b < tok_cfg.n_bands; ++b) {
    double f = mel_probe_hz(b);
    require(f < sample_rate_ / 2.0, "Vocoder: band ", b, " at ", f, " Hz exceeds Nyquist");
    band_hz_.value[b] = f;
  }
}

VocoderState Vocoder::make_state() const {
  VocoderState state;
  state.phase.assign(static_cast<std::size_t>(bands()), 0.0);
  return state;
}

WaveChunk Vocoder::synth_chunk(std::span<const int> tokens, const Codebook& book,
                               VocoderState& state) const {
  require(!tokens.empty(), "synth_chunk: need at least one token");
  require(book.dim() == bands(), "synth_chunk: codebook dim ", book.dim(),
          " does not match band count ", bands());
  require(static_cast<int>(state.phase.size()) == bands(), "synth_chunk: state has ",
          state.phase.size(), " phases, expected ", bands());

  int n_bands = bands();
  std::vector<double> step(static_cast<std::size_t>(n_bands));
  constexpr double kTwoPi = 2.0 * M_PI;
  for (int b = 0; b < n_bands; ++b) {
    step[static_cast<std::size_t>(b)] = kTwoPi * band_hz_.value[b] / sample_rate_;
  }

  WaveChunk chunk;
  chunk.token_span = {state.samples_emitted / samples_per_token_,
                      state.samples_emitted / samples_per_token_ +
                          static_cast<std::int64_t>(tokens.size())};
  chunk.samples.reserve(tokens.size() * static_cast<std::size_t>(samples_per_token_));

  for (int token : tokens) {
    require(token >= 0 && token < book.size(), "synth_chunk: token id ", token,
            " out of range [0, ", book.size(), ")");
    const double* code = book.vectors.row(token);
    for (int i = 0; i < samples_per_token_; ++i) {
      double s = 0.0;
      for (int b = 0; b < n_bands; ++b) {
        double amp = code[b] > 0.0 ? code[b] : 0.0;
        s += amp * std::sin(state.phase[static_cast<std::size_t>(b)]);
        // advance and wrap; step < pi because band frequencies are sub-Nyquist
        double ph = state.phase[static_cast<std::size_t>(b)] + step[static_cast<std::size_t>(b)];
        if (ph >= kTwoPi) ph -= kTwoPi;
        state.phase[static_cast<std::size_t>(b)] = ph;
      }
      chunk.samples.push_back(master_gain_ * s);
    }
  }
  state.samples_emitted += static_cast<std::int64_t>(chunk.samples.size());
  return chunk;
}

std::vector<double> Vocoder::synth_stream(const SpeechTokenSequence& tokens, int chunk_tokens,
                                          const Codebook& book) const {
  std::vector<double> wave;
  wave.reserve(tokens.ids.size() * static_cast<std::size_t>(samples_per_token_));
  VocoderState state = make_state();
  for (auto [begin, end] : chunk_boundaries(tokens.count(), chunk_tokens)) {
    std::span<const int> span(tokens.ids.data() + begin, static_cast<std::size_t>(end - begin));
    WaveChunk chunk = synth_chunk(span, book, state);
    wave.insert(wave.end(), chunk.samples.begin(), chunk.samples.end());
  }
  return wave;
}

}  // namespace s2s
