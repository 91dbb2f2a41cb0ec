#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2s/vocab.hpp"

namespace s2s {

// Deterministic tone-chord synthesizer. Every text token maps to a 0.16 s
// segment whose active frequency bands spell out the token id bit pattern,
// so the encoder filterbank can recover the token exactly. This gives the
// synthetic corpora a learnable speech<->text correspondence and gives the
// data pipeline a deterministic stand-in for a TTS backend.
struct RefSynthConfig {
  int sample_rate = 16000;
  int samples_per_word = 2560;  // 4 encoder frames, 2 speech tokens
  double bit_amp = 0.1;
  double pilot_amp = 0.05;
  int max_words = 25;  // mock TTS caps utterance length at 4 s
};

// A deterministic voice/emotion rendering style for the mock TTS clients.
struct VoiceStyle {
  double amp_scale = 1.0;
  int voice_band = -1;    // extra always-on band identifying the speaker
  int emotion_band = -1;  // extra band identifying the delivery emotion
  double extra_amp = 0.06;
};

VoiceStyle style_for_voice(const std::string& voice_id);
VoiceStyle style_for_voice_emotion(const std::string& voice_id, const std::string& emotion);

// Word token ids (and optionally one tag token id, or -1) to a waveform.
// Word bits ride on bands 2,6,10,...,30; tag bits on bands 3,11,19,27; a
// pilot tone on band 0 marks non-silence.
std::vector<double> synth_tokens(const std::vector<int>& word_ids, int tag_id,
                                 const VoiceStyle& style, const RefSynthConfig& cfg = {});

// Free-text synthesis for the mock clients: words are hashed into the word-id
// range, then rendered as above.
std::vector<double> synth_text(const std::string& text, int vocab_size, const VoiceStyle& style,
                               const RefSynthConfig& cfg = {});

}  // namespace s2s
