#include "s2s/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "s2s/errors.hpp"
#include "s2s/refsynth.hpp"
#include "s2s/rng.hpp"

namespace s2s {

namespace {

const char* kComponents[] = {"encoder_stub", "adapter",   "llm",    "projection",
                             "speech_decoder", "tokenizer", "vocoder"};

void scale(Tensor& t, double s) {
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] *= s;
}

Tensor gather_rows(const Tensor& src, int begin, int count) {
  Tensor out({count, src.cols()});
  for (int r = 0; r < count; ++r) {
    const double* s = src.row(begin + r);
    std::copy(s, s + src.cols(), out.row(r));
  }
  return out;
}

// Cycling seeded sample order, reshuffled per epoch.
class BatchOrder {
 public:
  BatchOrder(int n, std::uint64_t seed) : rng_(derive_seed(seed, "batch.order")), n_(n) {
    require(n > 0, "training: empty corpus");
    order_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
    rng_.shuffle(order_);
  }

  int next() {
    if (pos_ == n_) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    return order_[static_cast<std::size_t>(pos_++)];
  }

 private:
  Rng rng_;
  int n_;
  int pos_ = 0;
  std::vector<int> order_;
};

RefSynthConfig synth_config(const S2SModel& model) {
  RefSynthConfig cfg;
  cfg.sample_rate = model.cfg.rates.sample_rate;
  return cfg;
}

std::vector<int> random_words(Rng& rng, int lo, int hi, int vocab) {
  int len = lo + static_cast<int>(rng.uniform_int(hi - lo + 1));
  std::vector<int> words(static_cast<std::size_t>(len));
  for (int& w : words) {
    w = Vocab::kFirstWord + static_cast<int>(rng.uniform_int(vocab - Vocab::kFirstWord));
  }
  return words;
}

// Teacher-forced next-token targets for `answer` (plus <eos>) appended after a
// prefix of length prefix_len within a sequence of total length total_len.
struct TargetLayout {
  std::vector<int> targets;
  std::vector<bool> mask;
};

TargetLayout answer_targets(int total_len, int prefix_len, const std::vector<int>& answer) {
  TargetLayout layout;
  layout.targets.assign(static_cast<std::size_t>(total_len), Vocab::kPad);
  layout.mask.assign(static_cast<std::size_t>(total_len), false);
  int base = prefix_len - 1;  // logits here predict answer[0]
  for (std::size_t i = 0; i <= answer.size(); ++i) {
    int pos = base + static_cast<int>(i);
    layout.targets[static_cast<std::size_t>(pos)] =
        i < answer.size() ? answer[i] : Vocab::kEos;
    layout.mask[static_cast<std::size_t>(pos)] = true;
  }
  return layout;
}

double masked_accuracy(const Tensor& logits, const std::vector<int>& targets,
                       const std::vector<bool>& mask, int* hits_out = nullptr,
                       int* count_out = nullptr) {
  int hits = 0, count = 0;
  for (int t = 0; t < logits.rows(); ++t) {
    if (!mask[static_cast<std::size_t>(t)]) continue;
    ++count;
    if (nn::argmax_row(logits.row(t), logits.cols()) == targets[static_cast<std::size_t>(t)]) {
      ++hits;
    }
  }
  if (hits_out) *hits_out += hits;
  if (count_out) *count_out += count;
  return count > 0 ? static_cast<double>(hits) / count : 0.0;
}

}  // namespace

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Stage1Semantic: return "1s";
    case Stage::Stage1Emotion: return "1e";
    case Stage::Stage2Offline: return "2a";
    case Stage::Stage2Streaming: return "2b";
    case Stage::Stage3Joint: return "3";
  }
  throw ValidationError("unknown stage");
}

Stage stage_from_name(const std::string& name) {
  if (name == "1s") return Stage::Stage1Semantic;
  if (name == "1e") return Stage::Stage1Emotion;
  if (name == "2a") return Stage::Stage2Offline;
  if (name == "2b") return Stage::Stage2Streaming;
  if (name == "3") return Stage::Stage3Joint;
  throw ValidationError(concat("unknown stage '", name, "', expected one of 1s 1e 2a 2b 3"));
}

FreezeSchedule FreezeSchedule::for_stage(Stage stage) {
  FreezeSchedule schedule;
  for (const char* c : kComponents) schedule.trainable[c] = false;
  switch (stage) {
    case Stage::Stage1Semantic:
    case Stage::Stage1Emotion:
      schedule.trainable["adapter"] = true;
      break;
    case Stage::Stage2Offline:
      schedule.trainable["speech_decoder"] = true;
      break;
    case Stage::Stage2Streaming:
      schedule.trainable["projection"] = true;
      schedule.trainable["speech_decoder"] = true;
      break;
    case Stage::Stage3Joint:
      schedule.trainable["adapter"] = true;
      schedule.trainable["llm"] = true;
      schedule.trainable["projection"] = true;
      schedule.trainable["speech_decoder"] = true;
      break;
  }
  schedule.validate();
  return schedule;
}

void FreezeSchedule::validate() const {
  for (const char* c : kComponents) {
    require(trainable.count(c) == 1, "FreezeSchedule: missing component ", c);
  }
  require(!is_trainable("encoder_stub"), "FreezeSchedule: encoder_stub must stay frozen");
  require(!is_trainable("tokenizer"), "FreezeSchedule: tokenizer must stay frozen");
  require(!is_trainable("vocoder"), "FreezeSchedule: vocoder must stay frozen");
}

bool FreezeSchedule::is_trainable(const std::string& component) const {
  auto it = trainable.find(component);
  require(it != trainable.end(), "FreezeSchedule: unknown component '", component, "'");
  return it->second;
}

void FreezeSchedule::apply(const std::vector<nn::Parameter*>& params) const {
  for (nn::Parameter* p : params) p->trainable = is_trainable(component_of(p->name));
}

std::string component_of(const std::string& param_name) {
  auto dot = param_name.find('.');
  require(dot != std::string::npos && dot > 0, "component_of: parameter name '", param_name,
          "' has no component prefix");
  return param_name.substr(0, dot);
}

std::vector<std::string> assert_freeze(const CheckpointData& before, const CheckpointData& after,
                                       const FreezeSchedule& schedule) {
  ensure(before.size() == after.size(), "assert_freeze: checkpoint mismatch, ", before.size(),
         " vs ", after.size(), " entries");
  std::vector<std::string> violations;
  for (const auto& b : before) {
    const Tensor* a = find_entry(after, b.name);
    ensure(a != nullptr, "assert_freeze: checkpoint mismatch, missing ", b.name);
    ensure(a->shape() == b.tensor.shape(), "assert_freeze: checkpoint mismatch, shape of ",
           b.name);
    if (schedule.is_trainable(component_of(b.name))) continue;
    if (a->numel() == 0) continue;
    if (std::memcmp(a->data(), b.tensor.data(), static_cast<std::size_t>(a->numel()) *
                                                    sizeof(double)) != 0) {
      violations.push_back(b.name);
    }
  }
  return violations;
}

// ------------------------------------------------------------------ corpora

std::vector<AlignmentPair> make_stage1_corpus(S2SModel& model, int n, Stage1Variant variant,
                                              std::uint64_t seed, const CorpusOptions& opts) {
  require(n >= 1, "make_stage1_corpus: n must be >= 1");
  Rng rng(derive_seed(seed, "corpus.stage1"));
  RefSynthConfig synth_cfg = synth_config(model);
  std::vector<AlignmentPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    AlignmentPair pair;
    pair.transcript = random_words(rng, opts.transcript_min, opts.transcript_max, model.cfg.lm.vocab);
    if (variant == Stage1Variant::Emotion) {
      pair.emotion_tag =
          Vocab::kFirstEmotion + static_cast<int>(rng.uniform_int(
                                     static_cast<std::int64_t>(emotion_labels().size())));
    }
    auto wave = synth_tokens(pair.transcript, pair.emotion_tag, VoiceStyle{}, synth_cfg);
    pair.features = model.encoder.encode(wave, model.cfg.rates.sample_rate);

    // record the frozen LM's transcript-side continuation
    MixedSequence prefix;
    prefix.push_back(MixedItem::tok(Vocab::kBos));
    if (pair.emotion_tag >= 0) prefix.push_back(MixedItem::tok(pair.emotion_tag));
    for (int id : pair.transcript) prefix.push_back(MixedItem::tok(id));
    pair.continuation = model.lm.generate(prefix, opts.continuation_len);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TtsPair> make_stage2_offline_corpus(const S2SModel& model, int n, std::uint64_t seed,
                                                const CorpusOptions& opts) {
  require(n >= 1, "make_stage2_offline_corpus: n must be >= 1");
  Rng rng(derive_seed(seed, "corpus.stage2a"));
  RefSynthConfig synth_cfg = synth_config(model);
  Codebook book = model.codebook();
  std::vector<TtsPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    TtsPair pair;
    pair.text = random_words(rng, opts.text_min, opts.text_max, model.cfg.lm.vocab);
    auto wave = synth_tokens(pair.text, -1, VoiceStyle{}, synth_cfg);
    pair.speech = tokenize_waveform(wave, model.cfg.rates.sample_rate, book, model.cfg.tok);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<StreamSample> make_stage2_streaming_corpus(const S2SModel& model, int n,
                                                       std::uint64_t seed,
                                                       const CorpusOptions& opts) {
  require(n >= 1, "make_stage2_streaming_corpus: n must be >= 1");
  Rng rng(derive_seed(seed, "corpus.stage2b"));
  RefSynthConfig synth_cfg = synth_config(model);
  Codebook book = model.codebook();
  std::vector<StreamSample> samples;
  samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    StreamSample sample;
    sample.prompt = random_words(rng, opts.transcript_min, opts.transcript_max, model.cfg.lm.vocab);
    sample.response = random_words(rng, opts.transcript_min, opts.transcript_max, model.cfg.lm.vocab);
    auto wave = synth_tokens(sample.response, -1, VoiceStyle{}, synth_cfg);
    sample.speech = tokenize_waveform(wave, model.cfg.rates.sample_rate, book, model.cfg.tok);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<JointSample> make_stage3_corpus(S2SModel& model, int n_speech, int n_text,
                                            std::uint64_t seed, const CorpusOptions& opts) {
  require(n_speech >= 0 && n_text >= 0, "make_stage3_corpus: negative counts");
  Rng rng(derive_seed(seed, "corpus.stage3"));
  RefSynthConfig synth_cfg = synth_config(model);
  Codebook book = model.codebook();
  std::vector<JointSample> samples;
  samples.reserve(static_cast<std::size_t>(n_speech + n_text));
  for (int i = 0; i < n_speech + n_text; ++i) {
    JointSample sample;
    sample.modality = i < n_speech ? Modality::Speech : Modality::Text;
    sample.instruction = random_words(rng, opts.transcript_min, opts.transcript_max, model.cfg.lm.vocab);
    sample.response = random_words(rng, opts.transcript_min, opts.transcript_max, model.cfg.lm.vocab);
    if (sample.modality == Modality::Speech) {
      auto wave = synth_tokens(sample.instruction, -1, VoiceStyle{}, synth_cfg);
      sample.features = model.encoder.encode(wave, model.cfg.rates.sample_rate);
    }
    auto response_wave = synth_tokens(sample.response, -1, VoiceStyle{}, synth_cfg);
    sample.speech = tokenize_waveform(response_wave, model.cfg.rates.sample_rate, book, model.cfg.tok);
    samples.push_back(std::move(sample));
  }
  return samples;
}

// --------------------------------------------------------------- stage runs

MixedSequence stage1_speech_prefix(S2SModel& model, const AlignmentPair& pair) {
  MixedSequence prefix;
  prefix.push_back(MixedItem::tok(Vocab::kBos));
  if (pair.emotion_tag >= 0) prefix.push_back(MixedItem::tok(pair.emotion_tag));
  Tensor embeds = model.adapter.forward(pair.features.data);
  append_embeddings(prefix, embeds);
  return prefix;
}

StageReport run_stage1(S2SModel& model, const std::vector<AlignmentPair>& pairs,
                       Stage1Variant variant, const TrainOptions& opts) {
  require(!pairs.empty(), "run_stage1: empty corpus");
  for (const auto& p : pairs) {
    if (variant == Stage1Variant::Emotion) {
      require(p.emotion_tag >= 0, "run_stage1: emotion variant requires emotion tags");
    }
  }
  Stage stage = variant == Stage1Variant::Semantic ? Stage::Stage1Semantic : Stage::Stage1Emotion;
  FreezeSchedule schedule = FreezeSchedule::for_stage(stage);
  auto params = model.params();
  schedule.apply(params);
  CheckpointData before = snapshot(params);

  auto run_sample = [&](const AlignmentPair& pair, double grad_scale, bool backward, int* hits,
                        int* count) {
    MixedSequence seq = stage1_speech_prefix(model, pair);
    int prefix_len = static_cast<int>(seq.size());
    int embed_count = pair.features.data.rows() == 0
                          ? 0
                          : downsampled_length(pair.features.data.rows());
    for (int id : pair.continuation) seq.push_back(MixedItem::tok(id));

    LmOutput out = model.lm.forward(seq);
    TargetLayout tl = answer_targets(static_cast<int>(seq.size()), prefix_len, pair.continuation);
    nn::CrossEntropy ce;
    double loss = ce.forward(out.logits, tl.targets, tl.mask);
    if (hits) masked_accuracy(out.logits, tl.targets, tl.mask, hits, count);
    if (backward) {
      Tensor dlogits = ce.backward();
      scale(dlogits, grad_scale);
      Tensor dx = model.lm.backward(dlogits, Tensor());
      int embed_begin = prefix_len - embed_count;
      model.adapter.backward(gather_rows(dx, embed_begin, embed_count));
    }
    return loss;
  };

  StageReport report;
  report.stage = stage_name(stage);
  report.steps = opts.steps;
  BatchOrder order(static_cast<int>(pairs.size()), opts.seed);
  for (int step = 0; step < opts.steps; ++step) {
    double batch_loss = 0.0;
    for (int b = 0; b < opts.batch_size; ++b) {
      batch_loss += run_sample(pairs[static_cast<std::size_t>(order.next())],
                               1.0 / opts.batch_size, true, nullptr, nullptr);
    }
    nn::sgd_step(params, opts.lr);
    report.step_losses.push_back(batch_loss / opts.batch_size);
  }

  int hits = 0, count = 0;
  double eval_loss = 0.0;
  for (const auto& pair : pairs) eval_loss += run_sample(pair, 0.0, false, &hits, &count);
  report.final_loss = eval_loss / static_cast<double>(pairs.size());
  report.teacher_acc = count > 0 ? static_cast<double>(hits) / count : 0.0;
  report.freeze_violations =
      static_cast<int>(assert_freeze(before, snapshot(params), schedule).size());
  return report;
}

StageReport run_stage2_offline(S2SModel& model, const std::vector<TtsPair>& pairs,
                               const TrainOptions& opts) {
  require(!pairs.empty(), "run_stage2_offline: empty corpus");
  const DecoderVocab& vocab = model.decoder.vocab();
  for (const auto& p : pairs) {
    for (int id : p.text) {
      require(vocab.is_text(id), "run_stage2_offline: text id ", id,
              " outside the decoder text vocabulary");
    }
  }
  FreezeSchedule schedule = FreezeSchedule::for_stage(Stage::Stage2Offline);
  auto params = model.params();
  schedule.apply(params);
  CheckpointData before = snapshot(params);

  auto run_sample = [&](const TtsPair& pair, double grad_scale, bool backward, int* hits,
                        int* count) {
    std::vector<int> inputs = pair.text;
    inputs.push_back(vocab.bos_sp());
    for (int code : pair.speech.ids) inputs.push_back(vocab.id_of_code(code));

    std::vector<int> targets(inputs.size(), vocab.pad_sp());
    std::vector<bool> mask(inputs.size(), false);
    std::size_t base = pair.text.size();
    for (std::size_t i = 0; i < pair.speech.ids.size(); ++i) {
      targets[base + i] = vocab.id_of_code(pair.speech.ids[i]);
      mask[base + i] = true;
    }
    targets[base + pair.speech.ids.size()] = vocab.eos_sp();
    mask[base + pair.speech.ids.size()] = true;

    Tensor logits = model.decoder.forward_tokens(inputs);
    nn::CrossEntropy ce;
    double loss = ce.forward(logits, targets, mask);
    if (hits) masked_accuracy(logits, targets, mask, hits, count);
    if (backward) {
      Tensor dlogits = ce.backward();
      scale(dlogits, grad_scale);
      model.decoder.backward_tokens(dlogits);
    }
    return loss;
  };

  StageReport report;
  report.stage = stage_name(Stage::Stage2Offline);
  report.steps = opts.steps;
  BatchOrder order(static_cast<int>(pairs.size()), opts.seed);
  for (int step = 0; step < opts.steps; ++step) {
    double batch_loss = 0.0;
    for (int b = 0; b < opts.batch_size; ++b) {
      batch_loss += run_sample(pairs[static_cast<std::size_t>(order.next())],
                               1.0 / opts.batch_size, true, nullptr, nullptr);
    }
    nn::sgd_step(params, opts.lr);
    report.step_losses.push_back(batch_loss / opts.batch_size);
  }

  int hits = 0, count = 0;
  double eval_loss = 0.0;
  for (const auto& pair : pairs) eval_loss += run_sample(pair, 0.0, false, &hits, &count);
  report.final_loss = eval_loss / static_cast<double>(pairs.size());
  report.teacher_acc = count > 0 ? static_cast<double>(hits) / count : 0.0;
  report.freeze_violations =
      static_cast<int>(assert_freeze(before, snapshot(params), schedule).size());
  return report;
}

StageReport run_stage2_streaming(S2SModel& model, const std::vector<StreamSample>& samples,
                                 const TrainOptions& opts) {
  require(!samples.empty(), "run_stage2_streaming: empty corpus");
  FreezeSchedule schedule = FreezeSchedule::for_stage(Stage::Stage2Streaming);
  auto params = model.params();
  schedule.apply(params);
  CheckpointData before = snapshot(params);

  auto run_sample = [&](const StreamSample& sample, double grad_scale, bool backward, int* hits,
                        int* count) {
    MixedSequence prompt = to_mixed(sample.prompt);
    prompt.insert(prompt.begin(), MixedItem::tok(Vocab::kBos));
    // LM is frozen here: forward only, no gradient flows into it.
    Tensor hidden = model.lm.response_hidden_states(prompt, sample.response);
    DecoderTrainSequence seq = build_training_sequence(hidden.rows(), sample.speech,
                                                       model.cfg.schedule, model.decoder.vocab());
    Tensor logits = model.decoder.forward_interleaved(seq, hidden, model.projection);
    nn::CrossEntropy ce;
    double loss = ce.forward(logits, seq.targets, seq.mask);
    if (hits) masked_accuracy(logits, seq.targets, seq.mask, hits, count);
    if (backward) {
      Tensor dlogits = ce.backward();
      scale(dlogits, grad_scale);
      model.decoder.backward_interleaved(dlogits, model.projection);
    }
    return loss;
  };

  StageReport report;
  report.stage = stage_name(Stage::Stage2Streaming);
  report.steps = opts.steps;
  BatchOrder order(static_cast<int>(samples.size()), opts.seed);
  for (int step = 0; step < opts.steps; ++step) {
    double batch_loss = 0.0;
    for (int b = 0; b < opts.batch_size; ++b) {
      batch_loss += run_sample(samples[static_cast<std::size_t>(order.next())],
                               1.0 / opts.batch_size, true, nullptr, nullptr);
    }
    nn::sgd_step(params, opts.lr);
    report.step_losses.push_back(batch_loss / opts.batch_size);
  }

  int hits = 0, count = 0;
  double eval_loss = 0.0;
  for (const auto& sample : samples) eval_loss += run_sample(sample, 0.0, false, &hits, &count);
  report.final_loss = eval_loss / static_cast<double>(samples.size());
  report.teacher_acc = count > 0 ? static_cast<double>(hits) / count : 0.0;
  report.freeze_violations =
      static_cast<int>(assert_freeze(before, snapshot(params), schedule).size());
  return report;
}

StageReport run_stage3(S2SModel& model, const std::vector<JointSample>& samples,
                       const TrainOptions& opts) {
  require(!samples.empty(), "run_stage3: empty corpus");
  bool has_speech = false, has_text = false;
  for (const auto& s : samples) {
    (s.modality == Modality::Speech ? has_speech : has_text) = true;
  }
  require(has_speech, "run_stage3: corpus has no speech-input samples; both modalities required");
  require(has_text, "run_stage3: corpus has no text-input samples; both modalities required");

  FreezeSchedule schedule = FreezeSchedule::for_stage(Stage::Stage3Joint);
  auto params = model.params();
  schedule.apply(params);
  CheckpointData before = snapshot(params);

  auto run_sample = [&](const JointSample& sample, double grad_scale, bool backward, int* hits,
                        int* count) {
    MixedSequence seq;
    seq.push_back(MixedItem::tok(Vocab::kBos));
    int embed_count = 0;
    if (sample.modality == Modality::Speech) {
      Tensor embeds = model.adapter.forward(sample.features.data);
      embed_count = embeds.rows();
      append_embeddings(seq, embeds);
    } else {
      for (int id : sample.instruction) seq.push_back(MixedItem::tok(id));
    }
    int prefix_len = static_cast<int>(seq.size());
    for (int id : sample.response) seq.push_back(MixedItem::tok(id));

    LmOutput out = model.lm.forward(seq);
    TargetLayout tl = answer_targets(static_cast<int>(seq.size()), prefix_len, sample.response);
    nn::CrossEntropy text_ce;
    double text_loss = text_ce.forward(out.logits, tl.targets, tl.mask);

    Tensor hidden = gather_rows(out.hidden, prefix_len, static_cast<int>(sample.response.size()));
    DecoderTrainSequence dseq = build_training_sequence(hidden.rows(), sample.speech,
                                                        model.cfg.schedule, model.decoder.vocab());
    Tensor dec_logits = model.decoder.forward_interleaved(dseq, hidden, model.projection);
    nn::CrossEntropy speech_ce;
    double speech_loss = speech_ce.forward(dec_logits, dseq.targets, dseq.mask);
    if (hits) masked_accuracy(dec_logits, dseq.targets, dseq.mask, hits, count);

    if (backward) {
      Tensor dspeech = speech_ce.backward();
      scale(dspeech, grad_scale);
      Tensor dhidden_rows = model.decoder.backward_interleaved(dspeech, model.projection);

      Tensor dtext = text_ce.backward();
      scale(dtext, grad_scale * opts.text_loss_weight);
      Tensor dhidden_full({static_cast<int>(seq.size()), model.cfg.lm.d_llm});
      for (int r = 0; r < dhidden_rows.rows(); ++r) {
        std::copy(dhidden_rows.row(r), dhidden_rows.row(r) + dhidden_rows.cols(),
                  dhidden_full.row(prefix_len + r));
      }
      Tensor dx = model.lm.backward(dtext, dhidden_full);
      if (sample.modality == Modality::Speech) {
        model.adapter.backward(gather_rows(dx, 1, embed_count));
      }
    }
    return opts.text_loss_weight * text_loss + speech_loss;
  };

  StageReport report;
  report.stage = stage_name(Stage::Stage3Joint);
  report.steps = opts.steps;
  BatchOrder order(static_cast<int>(samples.size()), opts.seed);
  for (int step = 0; step < opts.steps; ++step) {
    double batch_loss = 0.0;
    for (int b = 0; b < opts.batch_size; ++b) {
      batch_loss += run_sample(samples[static_cast<std::size_t>(order.next())],
                               1.0 / opts.batch_size, true, nullptr, nullptr);
    }
    nn::sgd_step(params, opts.lr);
    report.step_losses.push_back(batch_loss / opts.batch_size);
  }

  int hits = 0, count = 0;
  double eval_loss = 0.0;
  for (const auto& sample : samples) eval_loss += run_sample(sample, 0.0, false, &hits, &count);
  report.final_loss = eval_loss / static_cast<double>(samples.size());
  report.teacher_acc = count > 0 ? static_cast<double>(hits) / count : 0.0;
  report.freeze_violations =
      static_cast<int>(assert_freeze(before, snapshot(params), schedule).size());
  return report;
}

// --------------------------------------------------------- behavioral evals

double stage1_exact_match(S2SModel& model, const std::vector<AlignmentPair>& pairs, int max_new) {
  require(!pairs.empty(), "stage1_exact_match: empty corpus");
  int matches = 0;
  for (const auto& pair : pairs) {
    MixedSequence prefix = stage1_speech_prefix(model, pair);
    if (model.lm.generate(prefix, max_new) == pair.continuation) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(pairs.size());
}

double stage2b_decode_match(S2SModel& model, const std::vector<StreamSample>& samples) {
  require(!samples.empty(), "stage2b_decode_match: empty corpus");
  int matches = 0;
  for (const auto& sample : samples) {
    MixedSequence prompt = to_mixed(sample.prompt);
    prompt.insert(prompt.begin(), MixedItem::tok(Vocab::kBos));
    Tensor hidden = model.lm.response_hidden_states(prompt, sample.response);
    DecodeLimits limits{sample.speech.count() + 8};
    SpeechTokenSequence decoded =
        decode_streaming(model.decoder, model.projection, hidden, model.cfg.schedule, limits);
    if (decoded.ids == sample.speech.ids) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(samples.size());
}

double stage3_decode_match(S2SModel& model, const std::vector<JointSample>& samples) {
  require(!samples.empty(), "stage3_decode_match: empty corpus");
  int matches = 0;
  for (const auto& sample : samples) {
    MixedSequence prefix;
    prefix.push_back(MixedItem::tok(Vocab::kBos));
    if (sample.modality == Modality::Speech) {
      append_embeddings(prefix, model.adapter.forward(sample.features.data));
    } else {
      for (int id : sample.instruction) prefix.push_back(MixedItem::tok(id));
    }
    Tensor hidden = model.lm.response_hidden_states(prefix, sample.response);
    DecodeLimits limits{sample.speech.count() + 8};
    SpeechTokenSequence decoded =
        decode_streaming(model.decoder, model.projection, hidden, model.cfg.schedule, limits);
    if (decoded.ids == sample.speech.ids) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(samples.size());
}

std::string StageReport::json_line() const {
  nlohmann::json j;
  j["stage"] = stage;
  j["steps"] = steps;
  j["final_loss"] = final_loss;
  j["teacher_acc"] = teacher_acc;
  j["freeze_violations"] = freeze_violations;
  return j.dump();
}

}  // namespace s2s
