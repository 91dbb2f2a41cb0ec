#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "s2s/tensor.hpp"

namespace s2s {

struct TokenizerConfig {
  int n_bands = 20;        // mel-style band count
  double mel_hz = 100.0;   // feature frame rate
  int pool_factor = 8;     // 100 Hz -> 12.5 tokens/s
  int codebook_size = 256; // 16,384 at full scale

  void validate() const;
};

// Probe frequency of tokenizer band b: 200*(b+1) Hz (multiples of 100 Hz are
// orthogonal over one 160-sample window).
double mel_probe_hz(int band);

// Band-amplitude features at 100 frames/s: entry b estimates the amplitude
// of a sinusoid at the band probe within the 10 ms window. Non-negative;
// silence maps to zero.
Tensor mel_features(std::span<const double> waveform, int sample_rate,
                    const TokenizerConfig& cfg = {});

// Non-overlapping mean over pool_factor-frame windows; the trailing partial
// window is averaged over its actual length. 100 Hz in, 12.5 Hz out.
Tensor pool_features(const Tensor& mel, int pool_factor = 8);

struct Codebook {
  Tensor vectors;  // [V, dim]

  int size() const { return vectors.rows(); }
  int dim() const { return vectors.empty() ? 0 : vectors.cols(); }
  // no duplicate codes, all finite
  void validate() const;
};

// Seeded k-means, fixed 25 iterations; empty clusters are re-seeded from the
// points farthest from their centroids. Deterministic per seed. Requires at
// least V feature rows.
Codebook build_codebook(const Tensor& features, int v, std::uint64_t seed);

struct SpeechTokenSequence {
  double rate = 12.5;
  std::vector<int> ids;

  int count() const { return static_cast<int>(ids.size()); }
  double duration_s() const { return ids.size() / rate; }
};

// Index of the nearest code by squared Euclidean distance, ties to the
// lowest index.
int nearest_code(const double* x, const Codebook& book);

SpeechTokenSequence quantize(const Tensor& features, const Codebook& book);
Tensor dequantize(const SpeechTokenSequence& tokens, const Codebook& book);

// waveform -> mel -> pool -> quantize
SpeechTokenSequence tokenize_waveform(std::span<const double> waveform, int sample_rate,
                                      const Codebook& book, const TokenizerConfig& cfg = {});

}  // namespace s2s
