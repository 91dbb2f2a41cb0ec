#include "s2s/decoder.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "s2s/errors.hpp"

namespace s2s {

void DecoderConfig::validate() const {
  require(d_dec >= 1 && layers >= 1 && heads >= 1 && max_len >= 1, "DecoderConfig: bad dimensions");
  require(d_dec % heads == 0, "DecoderConfig: d_dec ", d_dec, " not divisible by heads ", heads);
  require(text_vocab >= 1 && codebook_size >= 1, "DecoderConfig: bad vocabulary sizes");
}

int DecoderVocab::code_of(int id) const {
  require(is_speech(id), "DecoderVocab: id ", id, " is not a speech token id");
  return id - speech_base();
}

int DecoderVocab::id_of_code(int code) const {
  require(code >= 0 && code < codebook_size, "DecoderVocab: code ", code, " out of range [0, ",
          codebook_size, ")");
  return speech_base() + code;
}

DecoderTrainSequence build_training_sequence(int hidden_count, const SpeechTokenSequence& speech,
                                             const ScheduleConfig& cfg, const DecoderVocab& vocab) {
  require(hidden_count >= 0, "build_training_sequence: negative hidden count");

  // EOS_SP is appended to the speech side, so the layout sees s+1 tokens.
  std::vector<int> target_ids;
  target_ids.reserve(speech.ids.size() + 1);
  for (int code : speech.ids) target_ids.push_back(vocab.id_of_code(code));
  target_ids.push_back(vocab.eos_sp());

  DecoderTrainSequence seq;
  seq.layout = interleave_layout(hidden_count, static_cast<int>(target_ids.size()), cfg);
  seq.mask = loss_mask(seq.layout);

  std::size_t n_slots = seq.layout.slots.size();
  seq.input_tokens.assign(n_slots, -1);
  seq.hidden_rows.assign(n_slots, -1);
  seq.targets.assign(n_slots, vocab.pad_sp());

  int h_row = 0;
  int s_idx = 0;
  int prev_token = vocab.bos_sp();
  for (std::size_t t = 0; t < n_slots; ++t) {
    if (seq.layout.slots[t] == Slot::Hidden) {
      seq.hidden_rows[t] = h_row++;
    } else {
      seq.input_tokens[t] = prev_token;
      seq.targets[t] = target_ids[static_cast<std::size_t>(s_idx)];
      prev_token = target_ids[static_cast<std::size_t>(s_idx)];
      ++s_idx;
    }
  }
  return seq;
}

SpeechDecoder::SpeechDecoder(const DecoderConfig& cfg, std::uint64_t root_seed) : cfg_(cfg) {
  cfg.validate();
  vocab_.text_size = cfg.text_vocab;
  vocab_.codebook_size = cfg.codebook_size;
  tok_embed_ = nn::Parameter("speech_decoder.tok_embed", Tensor::zeros({vocab_.total(), cfg.d_dec}));
  pos_embed_ = nn::Parameter("speech_decoder.pos_embed", Tensor::zeros({cfg.max_len, cfg.d_dec}));
  nn::init_uniform(tok_embed_, cfg.d_dec, root_seed);
  nn::init_uniform(pos_embed_, cfg.d_dec, root_seed);
  trunk_ = nn::Transformer("speech_decoder.trunk", cfg.d_dec, cfg.layers, cfg.heads,
                           cfg.ffn_hidden(), root_seed);
  head_ = nn::Linear("speech_decoder.head", cfg.d_dec, vocab_.total(), root_seed);
}

void SpeechDecoder::embed_token_row(int token, int slot, double* out) const {
  require(token >= 0 && token < vocab_.total(), "SpeechDecoder: token id ", token,
          " out of range [0, ", vocab_.total(), ")");
  const double* e = tok_embed_.value.row(token);
  for (int i = 0; i < cfg_.d_dec; ++i) out[i] = e[i];
  add_pos_row(slot, out);
}

void SpeechDecoder::add_pos_row(int slot, double* io) const {
  require(slot >= 0 && slot < cfg_.max_len, "SpeechDecoder: slot ", slot, " exceeds max_len ",
          cfg_.max_len);
  const double* p = pos_embed_.value.row(slot);
  for (int i = 0; i < cfg_.d_dec; ++i) io[i] += p[i];
}

Tensor SpeechDecoder::forward_tokens(const std::vector<int>& input_tokens) {
  int t_len = static_cast<int>(input_tokens.size());
  require(t_len <= cfg_.max_len, "SpeechDecoder: length ", t_len, " exceeds max_len ",
          cfg_.max_len);
  Tensor x({t_len, cfg_.d_dec});
  for (int t = 0; t < t_len; ++t) {
    embed_token_row(input_tokens[static_cast<std::size_t>(t)], t, x.row(t));
  }
  cached_tokens_ = input_tokens;
  cached_hidden_rows_.assign(static_cast<std::size_t>(t_len), -1);
  cached_len_ = t_len;
  cached_hidden_count_ = 0;
  has_cache_ = true;
  return head_.forward(trunk_.forward(x));
}

void SpeechDecoder::backward_tokens(const Tensor& dlogits) {
  ensure(has_cache_ && cached_hidden_count_ == 0,
         "SpeechDecoder: backward_tokens without a matching forward");
  Tensor dx = trunk_.backward(head_.backward(dlogits));
  for (int t = 0; t < cached_len_; ++t) {
    const double* d = dx.row(t);
    double* gp = pos_embed_.grad.row(t);
    double* ge = tok_embed_.grad.row(cached_tokens_[static_cast<std::size_t>(t)]);
    for (int i = 0; i < cfg_.d_dec; ++i) {
      gp[i] += d[i];
      ge[i] += d[i];
    }
  }
}

Tensor SpeechDecoder::assemble_rows(const DecoderTrainSequence& seq, const Tensor& hidden,
                                    nn::Linear& proj) {
  int t_len = static_cast<int>(seq.layout.slots.size());
  require(t_len <= cfg_.max_len, "SpeechDecoder: sequence length ", t_len, " exceeds max_len ",
          cfg_.max_len);
  require(hidden.rank() == 2 && hidden.rows() == seq.layout.h_total,
          "SpeechDecoder: hidden has ", hidden.rows(), " rows, layout expects ",
          seq.layout.h_total);
  require(hidden.rows() == 0 || hidden.cols() == proj.in_dim(),
          "SpeechDecoder: hidden width ", hidden.cols(), " does not match projection input ",
          proj.in_dim());
  require(proj.out_dim() == cfg_.d_dec, "SpeechDecoder: projection output ", proj.out_dim(),
          " does not match d_dec ", cfg_.d_dec);

  Tensor projected = proj.forward(hidden);  // [h, d_dec]
  Tensor x({t_len, cfg_.d_dec});
  for (int t = 0; t < t_len; ++t) {
    if (seq.hidden_rows[static_cast<std::size_t>(t)] >= 0) {
      const double* src = projected.row(seq.hidden_rows[static_cast<std::size_t>(t)]);
      double* dst = x.row(t);
      for (int i = 0; i < cfg_.d_dec; ++i) dst[i] = src[i];
      add_pos_row(t, dst);
    } else {
      embed_token_row(seq.input_tokens[static_cast<std::size_t>(t)], t, x.row(t));
    }
  }
  return x;
}

Tensor SpeechDecoder::forward_interleaved(const DecoderTrainSequence& seq, const Tensor& hidden,
                                          nn::Linear& proj) {
  Tensor x = assemble_rows(seq, hidden, proj);
  cached_tokens_ = seq.input_tokens;
  cached_hidden_rows_ = seq.hidden_rows;
  cached_len_ = static_cast<int>(seq.layout.slots.size());
  cached_hidden_count_ = seq.layout.h_total;
  has_cache_ = true;
  return head_.forward(trunk_.forward(x));
}

Tensor SpeechDecoder::backward_interleaved(const Tensor& dlogits, nn::Linear& proj) {
  ensure(has_cache_, "SpeechDecoder: backward_interleaved before forward");
  Tensor dx = trunk_.backward(head_.backward(dlogits));

  Tensor dprojected({cached_hidden_count_, cfg_.d_dec});
  for (int t = 0; t < cached_len_; ++t) {
    const double* d = dx.row(t);
    double* gp = pos_embed_.grad.row(t);
    for (int i = 0; i < cfg_.d_dec; ++i) gp[i] += d[i];
    int h_row = cached_hidden_rows_[static_cast<std::size_t>(t)];
    if (h_row >= 0) {
      double* dst = dprojected.row(h_row);
      for (int i = 0; i < cfg_.d_dec; ++i) dst[i] += d[i];
    } else {
      double* ge = tok_embed_.grad.row(cached_tokens_[static_cast<std::size_t>(t)]);
      for (int i = 0; i < cfg_.d_dec; ++i) ge[i] += d[i];
    }
  }
  return proj.backward(dprojected);  // [h, d_llm]
}

void SpeechDecoder::collect(std::vector<nn::Parameter*>& out) {
  out.push_back(&tok_embed_);
  out.push_back(&pos_embed_);
  trunk_.collect(out);
  head_.collect(out);
}

int pick_speech_token(const double* logits, const DecoderVocab& vocab) {
  int best = vocab.speech_base();
  double best_v = logits[best];
  for (int id = vocab.speech_base() + 1; id < vocab.speech_base() + vocab.codebook_size; ++id) {
    if (logits[id] > best_v) {
      best_v = logits[id];
      best = id;
    }
  }
  if (logits[vocab.eos_sp()] > best_v) return vocab.eos_sp();
  return best;
}

// --------------------------------------------------------------- streaming

StreamState::StreamState(const SpeechDecoder& dec, const nn::Linear& proj,
                         const ScheduleConfig& schedule, const DecodeLimits& limits)
    : dec_(&dec), proj_(&proj), schedule_(schedule), limits_(limits), session_(dec.trunk()),
      last_token_(dec.vocab().bos_sp()) {
  schedule.validate();
  require(limits.max_tokens >= 0, "StreamState: max_tokens must be >= 0");
  if (limits.max_tokens == 0) phase_ = StreamPhase::Done;
}

std::vector<int> StreamState::push_hidden(std::span<const double> hidden_state) {
  require(phase_ != StreamPhase::Done, "StreamState: push_hidden after stream is done");
  require(phase_ != StreamPhase::Draining, "StreamState: push_hidden after finish_hidden");
  require(static_cast<int>(hidden_state.size()) == proj_->in_dim(),
          "StreamState: hidden state width ", hidden_state.size(), ", expected ", proj_->in_dim());

  std::vector<double> row(static_cast<std::size_t>(dec_->config().d_dec));
  proj_->forward_row(hidden_state.data(), row.data());
  dec_->add_pos_row(slot_, row.data());
  last_hidden_out_ = session_.step(row);
  have_hidden_out_ = true;
  ++slot_;
  ++consumed_;

  if (consumed_ % schedule_.m_hidden == 0) return emit_block(false);
  return {};
}

std::vector<int> StreamState::finish_hidden() {
  require(phase_ != StreamPhase::Done, "StreamState: finish_hidden after stream is done");
  require(phase_ == StreamPhase::Interleaving, "StreamState: finish_hidden called twice");
  phase_ = StreamPhase::Draining;
  std::vector<int> out = emit_block(true);
  if (phase_ != StreamPhase::Done) phase_ = StreamPhase::Done;
  return out;
}

std::vector<int> StreamState::emit_block(bool drain) {
  const DecoderVocab& vocab = dec_->vocab();
  std::vector<double> logits(static_cast<std::size_t>(vocab.total()));
  std::vector<double> row(static_cast<std::size_t>(dec_->config().d_dec));
  std::vector<int> out;

  int budget = drain ? std::numeric_limits<int>::max() : schedule_.n_tokens;
  for (int j = 0; j < budget; ++j) {
    if (static_cast<int>(emitted_.size()) >= limits_.max_tokens) {
      phase_ = StreamPhase::Done;
      break;
    }
    // input at this speech slot: the previous token (BOS_SP before the first)
    dec_->embed_token_row(last_token_, slot_, row.data());
    std::vector<double> h = session_.step(row);
    ++slot_;
    dec_->head().forward_row(h.data(), logits.data());
    int picked = pick_speech_token(logits.data(), vocab);
    if (picked == vocab.eos_sp()) {
      phase_ = StreamPhase::Done;
      break;
    }
    last_token_ = picked;
    int code = vocab.code_of(picked);
    emitted_.push_back(code);
    out.push_back(code);
  }
  return out;
}

SpeechTokenSequence decode_offline(SpeechDecoder& dec, const nn::Linear& proj,
                                   const Tensor& hidden, const ScheduleConfig& schedule,
                                   const DecodeLimits& limits) {
  schedule.validate();
  require(limits.max_tokens >= 0, "decode_offline: max_tokens must be >= 0");
  require(hidden.rank() == 2 || hidden.numel() == 0, "decode_offline: hidden must be [h, d_llm]");

  const DecoderVocab& vocab = dec.vocab();
  int h_total = hidden.numel() == 0 ? 0 : hidden.rows();
  int d_dec = dec.config().d_dec;

  std::vector<double> rows;  // assembled input rows, slot-major
  auto append_row = [&](const double* src) {
    rows.insert(rows.end(), src, src + d_dec);
  };

  std::vector<double> scratch(static_cast<std::size_t>(d_dec));
  std::vector<double> logits(static_cast<std::size_t>(vocab.total()));
  SpeechTokenSequence out;
  int last_token = vocab.bos_sp();
  int h_idx = 0;
  int slot = 0;
  bool done = limits.max_tokens == 0;

  auto emit = [&](bool drain) {
    int budget = drain ? std::numeric_limits<int>::max() : schedule.n_tokens;
    for (int j = 0; j < budget && !done; ++j) {
      if (out.count() >= limits.max_tokens) {
        done = true;
        break;
      }
      dec.embed_token_row(last_token, slot, scratch.data());
      append_row(scratch.data());
      ++slot;
      // full recompute over every slot so far
      Tensor x({slot, d_dec}, rows);
      Tensor h = dec.trunk().forward(x);
      dec.head().forward_row(h.row(slot - 1), logits.data());
      int picked = pick_speech_token(logits.data(), vocab);
      if (picked == vocab.eos_sp()) {
        done = true;
        break;
      }
      last_token = picked;
      out.ids.push_back(vocab.code_of(picked));
    }
  };

  while (h_idx < h_total && !done) {
    int take = std::min(schedule.m_hidden, h_total - h_idx);
    for (int k = 0; k < take; ++k) {
      proj.forward_row(hidden.row(h_idx), scratch.data());
      dec.add_pos_row(slot, scratch.data());
      append_row(scratch.data());
      ++slot;
      ++h_idx;
    }
    emit(h_idx == h_total);
  }
  if (h_total == 0 && !done) emit(true);
  return out;
}

SpeechTokenSequence decode_streaming(const SpeechDecoder& dec, const nn::Linear& proj,
                                     const Tensor& hidden, const ScheduleConfig& schedule,
                                     const DecodeLimits& limits) {
  StreamState state(dec, proj, schedule, limits);
  SpeechTokenSequence out;
  int h_total = hidden.numel() == 0 ? 0 : hidden.rows();
  for (int r = 0; r < h_total && state.phase() == StreamPhase::Interleaving; ++r) {
    auto emitted = state.push_hidden(std::span<const double>(hidden.row(r), hidden.cols()));
    out.ids.insert(out.ids.end(), emitted.begin(), emitted.end());
  }
  if (state.phase() == StreamPhase::Interleaving) {
    auto emitted = state.finish_hidden();
    out.ids.insert(out.ids.end(), emitted.begin(), emitted.end());
  }
  return out;
}

void write_token_dump(const std::string& path, const SpeechTokenSequence& tokens) {
  std::ofstream os(path);
  ensure(os.good(), "token dump: cannot open ", path, " for writing");
  for (int id : tokens.ids) os << id << '\n';
  os << "#EOS\n";
  ensure(os.good(), "token dump: write failed for ", path);
}

SpeechTokenSequence read_token_dump(const std::string& path) {
  std::ifstream is(path);
  ensure(is.good(), "token dump: cannot open ", path);
  SpeechTokenSequence tokens;
  std::string line;
  bool saw_eos = false;
  while (std::getline(is, line)) {
    if (line == "#EOS") {
      saw_eos = true;
      break;
    }
    require(!line.empty(), "token dump: empty line in ", path);
    tokens.ids.push_back(std::stoi(line));
  }
  require(saw_eos, "token dump: missing #EOS sentinel in ", path);
  return tokens;
}

}  // namespace s2s
