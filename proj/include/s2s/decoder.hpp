#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "s2s/nn.hpp"
#include "s2s/stream.hpp"
#include "s2s/tensor.hpp"
#include "s2s/tokenizer.hpp"

namespace s2s {

struct DecoderConfig {
  int d_dec = 48;
  int layers = 2;
  int heads = 2;
  int max_len = 1024;
  int text_vocab = 128;
  int codebook_size = 256;

  int ffn_hidden() const { return 4 * d_dec; }
  void validate() const;
};

// Extended id space: [0, text) text tokens, [text, text+V) speech tokens,
// then BOS_SP / EOS_SP / PAD_SP controls.
struct DecoderVocab {
  int text_size = 128;
  int codebook_size = 256;

  int speech_base() const { return text_size; }
  int bos_sp() const { return text_size + codebook_size; }
  int eos_sp() const { return bos_sp() + 1; }
  int pad_sp() const { return bos_sp() + 2; }
  int total() const { return bos_sp() + 3; }
  bool is_text(int id) const { return id >= 0 && id < text_size; }
  bool is_speech(int id) const { return id >= speech_base() && id < speech_base() + codebook_size; }
  int code_of(int id) const;     // speech id -> codebook token
  int id_of_code(int code) const;
};

// Teacher-forced interleaved sequence. Slot t's input is either a projected
// hidden state (HIDDEN slot) or the embedding of the previous speech token
// (SPEECH slot; BOS_SP before the first). The target at a SPEECH slot is that
// slot's own token, with EOS_SP appended as the final target; targets at
// HIDDEN slots are PAD_SP and are never read by the loss.
struct DecoderTrainSequence {
  InterleaveLayout layout;
  std::vector<int> input_tokens;  // per slot, -1 at hidden slots
  std::vector<int> hidden_rows;   // per slot, -1 at speech slots
  std::vector<int> targets;       // per slot, PAD_SP where mask is false
  std::vector<bool> mask;         // = loss_mask(layout)
};

DecoderTrainSequence build_training_sequence(int hidden_count, const SpeechTokenSequence& speech,
                                             const ScheduleConfig& cfg, const DecoderVocab& vocab);

// Decoder-only transformer over the extended vocabulary. Parameters are named
// "speech_decoder.*"; the hidden-state projection lives outside (named
// "projection.*") so the freeze schedules can address it separately.
class SpeechDecoder {
 public:
  SpeechDecoder(const DecoderConfig& cfg, std::uint64_t root_seed);

  const DecoderConfig& config() const { return cfg_; }
  const DecoderVocab& vocab() const { return vocab_; }

  // Token-only teacher-forced pass (offline TTS pretraining).
  Tensor forward_tokens(const std::vector<int>& input_tokens);  // -> logits [T, total]
  void backward_tokens(const Tensor& dlogits);

  // Interleaved teacher-forced pass. hidden is [h, d_llm]; proj maps it to
  // d_dec. Returns logits [T, total].
  Tensor forward_interleaved(const DecoderTrainSequence& seq, const Tensor& hidden,
                             nn::Linear& proj);
  // Returns the grad w.r.t. hidden, [h, d_llm].
  Tensor backward_interleaved(const Tensor& dlogits, nn::Linear& proj);

  void collect(std::vector<nn::Parameter*>& out);

  const nn::Parameter& token_embed() const { return tok_embed_; }
  const nn::Parameter& pos_embed() const { return pos_embed_; }
  const nn::Transformer& trunk() const { return trunk_; }
  nn::Transformer& trunk() { return trunk_; }  // offline decode recomputes through it
  const nn::Linear& head() const { return head_; }

  // input embedding for one slot: token embedding (or projected hidden state,
  // supplied by the caller) plus the positional row.
  void embed_token_row(int token, int slot, double* out) const;
  void add_pos_row(int slot, double* io) const;

 private:
  Tensor assemble_rows(const DecoderTrainSequence& seq, const Tensor& hidden, nn::Linear& proj);

  DecoderConfig cfg_;
  DecoderVocab vocab_;
  nn::Parameter tok_embed_;  // [total, d_dec]
  nn::Parameter pos_embed_;  // [max_len, d_dec]
  nn::Transformer trunk_;
  nn::Linear head_;

  // bookkeeping from the last teacher-forced pass
  std::vector<int> cached_tokens_;
  std::vector<int> cached_hidden_rows_;
  int cached_len_ = 0;
  int cached_hidden_count_ = 0;
  bool has_cache_ = false;
};

// Greedy pick over speech-token logits with all text and non-EOS control ids
// masked to -inf. Returns the chosen extended id (a speech id or EOS_SP),
// ties to the lowest id.
int pick_speech_token(const double* logits, const DecoderVocab& vocab);

struct DecodeLimits {
  int max_tokens = 256;
};

enum class StreamPhase { Interleaving, Draining, Done };

// Incremental decoding state for one response turn. Single-owner; several
// states may share one decoder's weights. Emits exactly n_tokens ids after
// every m_hidden-th push (fewer on EOS_SP or the token budget), then drains
// after finish_hidden().
class StreamState {
 public:
  StreamState(const SpeechDecoder& dec, const nn::Linear& proj, const ScheduleConfig& schedule,
              const DecodeLimits& limits);

  // Returns codebook token ids emitted as a result of this event.
  std::vector<int> push_hidden(std::span<const double> hidden_state);
  std::vector<int> finish_hidden();

  StreamPhase phase() const { return phase_; }
  int consumed_hidden() const { return consumed_; }
  const std::vector<int>& emitted() const { return emitted_; }

 private:
  std::vector<int> emit_block(bool drain);

  const SpeechDecoder* dec_;
  const nn::Linear* proj_;
  ScheduleConfig schedule_;
  DecodeLimits limits_;
  nn::InferenceSession session_;
  StreamPhase phase_ = StreamPhase::Interleaving;
  int consumed_ = 0;
  int slot_ = 0;
  int last_token_;  // previous speech token fed at the next speech slot
  std::vector<int> emitted_;
  std::vector<double> last_hidden_out_;  // trunk output at the current slot
  bool have_hidden_out_ = false;
};

// Offline route: same schedule, but every emission recomputes the full
// teacher-forced forward pass (no attention cache). Kept independent of
// StreamState so streaming/offline equality is a meaningful check.
SpeechTokenSequence decode_offline(SpeechDecoder& dec, const nn::Linear& proj,
                                   const Tensor& hidden, const ScheduleConfig& schedule,
                                   const DecodeLimits& limits);

// Convenience streaming driver: pushes every hidden row, then finishes.
SpeechTokenSequence decode_streaming(const SpeechDecoder& dec, const nn::Linear& proj,
                                     const Tensor& hidden, const ScheduleConfig& schedule,
                                     const DecodeLimits& limits);

// Token stream dump: one id per line, then a "#EOS" sentinel line.
void write_token_dump(const std::string& path, const SpeechTokenSequence& tokens);
SpeechTokenSequence read_token_dump(const std::string& path);

}  // namespace s2s
