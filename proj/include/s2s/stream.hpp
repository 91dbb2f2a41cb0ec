#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace s2s {

// Clock rates of the pipeline stages. Defaults: 25 Hz encoder frames,
// 6.25 Hz adapter embeddings (4x downsampling), 12.5 speech tokens/s,
// 16 kHz audio.
struct RateConfig {
  double encoder_hz = 25.0;
  double adapter_hz = 6.25;
  double speech_token_hz = 12.5;
  int sample_rate = 16000;

  void validate() const;
  // Samples per encoder frame (640 at defaults).
  int encoder_hop() const;
  // Samples per speech token (1280 at defaults).
  int samples_per_token() const;
};

// Interleave ratio: consume m_hidden LLM states, emit n_tokens speech tokens.
// chunk_tokens is the vocoder chunk size; it defaults to 4 but is an
// independent knob, not tied to m_hidden.
struct ScheduleConfig {
  int m_hidden = 4;
  int n_tokens = 8;
  int chunk_tokens = 4;

  void validate() const;
};

enum class Slot : std::uint8_t { Hidden, Speech };

// Deterministic slot sequence realizing the m:n schedule plus the drain run.
struct InterleaveLayout {
  std::vector<Slot> slots;
  int h_total = 0;
  int s_total = 0;
};

// Builds the slot sequence for h_total hidden states and s_total speech
// tokens: alternate blocks of up to m_hidden HIDDEN and up to n_tokens
// SPEECH slots; once the hidden side is exhausted all remaining speech
// drains as one run. If speech runs out first, the remaining hidden slots
// are still consumed (they form the trailing run).
InterleaveLayout interleave_layout(int h_total, int s_total, const ScheduleConfig& cfg);

// True exactly at SPEECH slots. Training loss is computed only there.
std::vector<bool> loss_mask(const InterleaveLayout& layout);

// Consecutive half-open [start, end) ranges of size chunk_tokens covering
// [0, s_total); the last range may be shorter.
std::vector<std::pair<int, int>> chunk_boundaries(int s_total, int chunk_tokens);

// Per-event costs of the latency model, in seconds.
struct LatencyParams {
  double cost_hidden = 0.0;
  double cost_speech_token = 0.0;
  double cost_chunk_synth = 0.0;

  void validate() const;
};

// Closed form for the arrival time of the first audio chunk:
//   m_hidden * cost_hidden + min(n_tokens, chunk_tokens) * cost_speech_token
//     + cost_chunk_synth
double first_audio_latency(const ScheduleConfig& cfg, const LatencyParams& p);

struct ChunkEvent {
  int index = 0;
  int token_begin = 0;
  int token_end = 0;
  double tokens_ready = 0.0;  // time the last token of the chunk was emitted
  double synth_start = 0.0;
  double audio_ready = 0.0;   // synth_start + cost_chunk_synth
};

struct StreamTiming {
  std::vector<ChunkEvent> chunks;
  double first_audio = 0.0;  // audio_ready of the first chunk; 0 when no chunks
};

// Discrete-event model of one response turn:
//   - hidden states arrive sequentially, cost_hidden each;
//   - after each block of m_hidden states (or the final short block) the
//     decoder emits speech tokens sequentially, cost_speech_token each; after
//     the last hidden state the remaining tokens drain at the same cadence;
//   - the decoder hands tokens over in groups of n_tokens (during the drain
//     too); the vocoder flushes pending tokens as a chunk whenever
//     chunk_tokens have accumulated, at each group boundary, and at stream
//     end. It is a serial resource running in parallel with decoding.
StreamTiming simulate_stream_timing(int h_total, int s_total, const ScheduleConfig& cfg,
                                    const LatencyParams& p);

// Output length of one k=3, stride=2, pad=1 convolution.
int conv1d_out_len(int n, int kernel, int stride, int pad);

// Sequence length after the adapter's two stride-2 convolutions:
// ceil(ceil(n/2)/2).
int downsampled_length(int n_frames);

}  // namespace s2s
