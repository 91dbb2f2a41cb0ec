#pragma once

#include <cstdint>
#include <span>

#include "s2s/nn.hpp"
#include "s2s/stream.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct FrontendConfig {
  int d_enc = 32;   // encoder feature width
  int d_llm = 64;   // adapter output width (LLM embedding size)
  double log_floor = 1e-6;   // added inside the log
  double log_scale = 0.25;   // compresses the log range into a few units
};

// 25 Hz feature frames: data is [n_frames, d_enc].
struct FeatureFrames {
  double rate = 25.0;
  Tensor data;

  int count() const { return data.rows(); }
  int dim() const { return data.empty() ? 0 : data.cols(); }
};

// Probe frequency of encoder band b: 250 + 125*b Hz. Multiples of 25 Hz are
// exactly orthogonal over one 640-sample frame, so band energies have no
// cross-talk.
double frontend_probe_hz(int band);

// Fixed (non-trainable) log-energy filterbank standing in for a pretrained
// audio encoder. Frame t summarizes samples [t*hop, (t+1)*hop) only; the
// probe table is a frozen parameter so it participates in checkpoints and
// freeze accounting.
class EncoderStub {
 public:
  EncoderStub(const FrontendConfig& cfg, const RateConfig& rates);

  FeatureFrames encode(std::span<const double> waveform, int sample_rate) const;

  nn::Parameter& probe_param() { return probe_hz_; }
  const nn::Parameter& probe_param() const { return probe_hz_; }
  const FrontendConfig& config() const { return cfg_; }

 private:
  FrontendConfig cfg_;
  RateConfig rates_;
  nn::Parameter probe_hz_;  // "encoder_stub.probe_hz", always frozen
};

// Two k=3/s=2/p=1 convolutions (4x downsampling) followed by a position-wise
// feed-forward network. Output length obeys downsampled_length().
struct Adapter {
  nn::Conv1d conv1;  // d_enc -> d_llm
  nn::Gelu act1;
  nn::Conv1d conv2;  // d_llm -> d_llm
  nn::Gelu act2;
  nn::Ffn ffn;       // d_llm -> 4*d_llm -> d_llm

  Adapter() = default;
  Adapter(const FrontendConfig& cfg, std::uint64_t root_seed);

  Tensor forward(const Tensor& frames);  // [n, d_enc] -> [downsampled_length(n), d_llm]
  Tensor backward(const Tensor& dy);
  void collect(std::vector<nn::Parameter*>& out);
};

}  // namespace s2s
