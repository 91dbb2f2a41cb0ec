#include "s2s/stream.hpp"

#include <algorithm>
#include <cmath>

#include "s2s/errors.hpp"

namespace s2s {

void RateConfig::validate() const {
  require(encoder_hz > 0 && adapter_hz > 0 && speech_token_hz > 0,
          "RateConfig: rates must be strictly positive");
  require(sample_rate > 0, "RateConfig: sample_rate must be positive");
  require(std::abs(encoder_hz - 4.0 * adapter_hz) < 1e-12,
          "RateConfig: encoder_hz (", encoder_hz, ") must equal 4 x adapter_hz (", adapter_hz,
          ")");
  double hop = static_cast<double>(sample_rate) / encoder_hz;
  require(std::abs(hop - std::round(hop)) < 1e-9, "RateConfig: sample_rate ", sample_rate,
          " not divisible by encoder_hz ", encoder_hz);
}

int RateConfig::encoder_hop() const {
  validate();
  return static_cast<int>(std::lround(static_cast<double>(sample_rate) / encoder_hz));
}

int RateConfig::samples_per_token() const {
  validate();
  double n = static_cast<double>(sample_rate) / speech_token_hz;
  require(std::abs(n - std::round(n)) < 1e-9, "RateConfig: sample_rate ", sample_rate,
          " not divisible by speech_token_hz ", speech_token_hz);
  return static_cast<int>(std::lround(n));
}

void ScheduleConfig::validate() const {
  require(m_hidden >= 1, "ScheduleConfig: m_hidden must be >= 1, got ", m_hidden);
  require(n_tokens >= 1, "ScheduleConfig: n_tokens must be >= 1, got ", n_tokens);
  require(chunk_tokens >= 1, "ScheduleConfig: chunk_tokens must be >= 1, got ", chunk_tokens);
}

InterleaveLayout interleave_layout(int h_total, int s_total, const ScheduleConfig& cfg) {
  cfg.validate();
  require(h_total >= 0, "interleave_layout: h_total must be >= 0, got ", h_total);
  require(s_total >= 0, "interleave_layout: s_total must be >= 0, got ", s_total);

  InterleaveLayout out;
  out.h_total = h_total;
  out.s_total = s_total;
  out.slots.reserve(static_cast<std::size_t>(h_total + s_total));

  int h_rem = h_total;
  int s_rem = s_total;
  while (h_rem > 0 && s_rem > 0) {
    int take_h = std::min(cfg.m_hidden, h_rem);
    out.slots.insert(out.slots.end(), static_cast<std::size_t>(take_h), Slot::Hidden);
    h_rem -= take_h;
    if (h_rem == 0) break;  // drain below
    int take_s = std::min(cfg.n_tokens, s_rem);
    out.slots.insert(out.slots.end(), static_cast<std::size_t>(take_s), Slot::Speech);
    s_rem -= take_s;
  }
  if (h_rem == 0) {
    out.slots.insert(out.slots.end(), static_cast<std::size_t>(s_rem), Slot::Speech);
  } else {
    // Speech exhausted first: remaining hidden states are still consumed.
    out.slots.insert(out.slots.end(), static_cast<std::size_t>(h_rem), Slot::Hidden);
  }
  return out;
}

std::vector<bool> loss_mask(const InterleaveLayout& layout) {
  std::vector<bool> mask(layout.slots.size());
  for (std::size_t i = 0; i < layout.slots.size(); ++i) {
    mask[i] = layout.slots[i] == Slot::Speech;
  }
  return mask;
}

std::vector<std::pair<int, int>> chunk_boundaries(int s_total, int chunk_tokens) {
  require(s_total >= 0, "chunk_boundaries: s_total must be >= 0, got ", s_total);
  require(chunk_tokens >= 1, "chunk_boundaries: chunk_tokens must be >= 1, got ", chunk_tokens);
  std::vector<std::pair<int, int>> ranges;
  for (int start = 0; start < s_total; start += chunk_tokens) {
    ranges.emplace_back(start, std::min(start + chunk_tokens, s_total));
  }
  return ranges;
}

void LatencyParams::validate() const {
  require(cost_hidden >= 0 && cost_speech_token >= 0 && cost_chunk_synth >= 0,
          "LatencyParams: costs must be >= 0");
}

double first_audio_latency(const ScheduleConfig& cfg, const LatencyParams& p) {
  cfg.validate();
  p.validate();
  int n_chunk_wait = std::min(cfg.n_tokens, cfg.chunk_tokens);
  return cfg.m_hidden * p.cost_hidden + n_chunk_wait * p.cost_speech_token + p.cost_chunk_synth;
}

StreamTiming simulate_stream_timing(int h_total, int s_total, const ScheduleConfig& cfg,
                                    const LatencyParams& p) {
  cfg.validate();
  p.validate();
  require(h_total >= 0 && s_total >= 0, "simulate_stream_timing: negative counts");

  StreamTiming timing;
  InterleaveLayout layout = interleave_layout(h_total, s_total, cfg);

  double clock = 0.0;          // decode-side clock
  double vocoder_free = 0.0;   // serial vocoder resource
  int pending_begin = 0;       // first token index not yet flushed
  int emitted = 0;             // tokens emitted so far
  double last_token_time = 0.0;

  auto flush = [&](double now) {
    if (emitted == pending_begin) return;
    ChunkEvent ev;
    ev.index = static_cast<int>(timing.chunks.size());
    ev.token_begin = pending_begin;
    ev.token_end = emitted;
    ev.tokens_ready = now;
    ev.synth_start = std::max(now, vocoder_free);
    ev.audio_ready = ev.synth_start + p.cost_chunk_synth;
    vocoder_free = ev.audio_ready;
    pending_begin = emitted;
    timing.chunks.push_back(ev);
  };

  for (Slot slot : layout.slots) {
    if (slot == Slot::Hidden) {
      clock += p.cost_hidden;
      continue;
    }
    clock += p.cost_speech_token;
    last_token_time = clock;
    ++emitted;
    // The decoder hands tokens over in groups of n_tokens (its block cadence,
    // which the drain keeps); the vocoder also flushes whenever a full chunk
    // has accumulated.
    if (emitted - pending_begin == cfg.chunk_tokens || emitted % cfg.n_tokens == 0) {
      flush(clock);
    }
  }
  flush(last_token_time);  // stream end (no-op if already flushed)

  if (!timing.chunks.empty()) timing.first_audio = timing.chunks.front().audio_ready;
  return timing;
}

int conv1d_out_len(int n, int kernel, int stride, int pad) {
  require(n >= 0, "conv1d_out_len: negative length");
  require(kernel >= 1 && stride >= 1 && pad >= 0, "conv1d_out_len: bad geometry");
  if (n == 0) return 0;
  int padded = n + 2 * pad;
  if (padded < kernel) return 0;
  return (padded - kernel) / stride + 1;
}

int downsampled_length(int n_frames) {
  int once = conv1d_out_len(n_frames, 3, 2, 1);
  return conv1d_out_len(once, 3, 2, 1);
}

}  // namespace s2s
