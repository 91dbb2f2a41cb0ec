#include "s2s/refsynth.hpp"

#include <cmath>
#include <sstream>

#include "s2s/errors.hpp"
#include "s2s/frontend.hpp"
#include "s2s/rng.hpp"

namespace s2s {

namespace {

constexpr int kWordBands[8] = {2, 6, 10, 14, 18, 22, 26, 30};
constexpr int kTagBands[4] = {3, 11, 19, 27};
constexpr int kVoiceBands[4] = {1, 5, 9, 13};
constexpr int kEmotionBands[4] = {7, 15, 23, 31};
constexpr int kPilotBand = 0;

struct Tone {
  int band;
  double amp;
};

// Rotating-phasor oscillator: 4 multiplies per sample instead of a sin call.
struct Phasor {
  double re, im, rot_re, rot_im, amp;
};

void render_segment(std::vector<Tone>& tones, int sample_rate, int start_sample, int count,
                    std::vector<double>& out) {
  std::vector<Phasor> oscs;
  oscs.reserve(tones.size());
  for (const Tone& t : tones) {
    double w = 2.0 * M_PI * frontend_probe_hz(t.band) / sample_rate;
    double start_phase = std::fmod(w * start_sample, 2.0 * M_PI);
    oscs.push_back({std::cos(start_phase), std::sin(start_phase), std::cos(w), std::sin(w), t.amp});
  }
  for (int i = 0; i < count; ++i) {
    double s = 0.0;
    for (Phasor& p : oscs) {
      s += p.amp * p.im;
      double re = p.re * p.rot_re - p.im * p.rot_im;
      p.im = p.re * p.rot_im + p.im * p.rot_re;
      p.re = re;
    }
    out[static_cast<std::size_t>(start_sample + i)] = s;
  }
}

}  // namespace

VoiceStyle style_for_voice(const std::string& voice_id) {
  std::uint64_t h = derive_seed(0x5eed, voice_id);
  VoiceStyle style;
  style.amp_scale = 0.75 + 0.5 * static_cast<double>(h % 16) / 15.0;
  style.voice_band = kVoiceBands[(h >> 8) % 4];
  return style;
}

VoiceStyle style_for_voice_emotion(const std::string& voice_id, const std::string& emotion) {
  VoiceStyle style = style_for_voice(voice_id);
  style.emotion_band = kEmotionBands[derive_seed(0xe305, emotion) % 4];
  return style;
}

std::vector<double> synth_tokens(const std::vector<int>& word_ids, int tag_id,
                                 const VoiceStyle& style, const RefSynthConfig& cfg) {
  require(cfg.sample_rate > 0 && cfg.samples_per_word > 0, "refsynth: bad config");
  std::vector<double> out(word_ids.size() * static_cast<std::size_t>(cfg.samples_per_word), 0.0);

  int tag_code = 0;
  if (tag_id >= 0) {
    require(tag_id >= Vocab::kFirstEmotion && tag_id < Vocab::kFirstWord,
            "refsynth: tag id ", tag_id, " is not a tag token");
    tag_code = tag_id - Vocab::kFirstEmotion + 1;  // 1..12, 0 means no tag
  }

  for (std::size_t wi = 0; wi < word_ids.size(); ++wi) {
    int word = word_ids[wi];
    require(word >= Vocab::kFirstWord && word < 256, "refsynth: word id ", word, " out of range [",
            Vocab::kFirstWord, ", 256)");
    std::vector<Tone> tones;
    tones.push_back({kPilotBand, cfg.pilot_amp * style.amp_scale});
    for (int bit = 0; bit < 8; ++bit) {
      if (word & (1 << bit)) tones.push_back({kWordBands[bit], cfg.bit_amp * style.amp_scale});
    }
    for (int bit = 0; bit < 4; ++bit) {
      if (tag_code & (1 << bit)) tones.push_back({kTagBands[bit], cfg.bit_amp * style.amp_scale});
    }
    if (style.voice_band >= 0) tones.push_back({style.voice_band, style.extra_amp});
    if (style.emotion_band >= 0) tones.push_back({style.emotion_band, style.extra_amp});
    render_segment(tones, cfg.sample_rate, static_cast<int>(wi) * cfg.samples_per_word,
                   cfg.samples_per_word, out);
  }
  return out;
}

std::vector<double> synth_text(const std::string& text, int vocab_size, const VoiceStyle& style,
                               const RefSynthConfig& cfg) {
  require(vocab_size > Vocab::kFirstWord, "refsynth: vocab too small");
  std::vector<int> ids;
  std::istringstream is(text);
  std::string word;
  int range = vocab_size - Vocab::kFirstWord;
  while (is >> word && static_cast<int>(ids.size()) < cfg.max_words) {
    std::uint64_t h = derive_seed(0x7e47, word);
    ids.push_back(Vocab::kFirstWord + static_cast<int>(h % static_cast<std::uint64_t>(range)));
  }
  return synth_tokens(ids, -1, style, cfg);
}

}  // namespace s2s
