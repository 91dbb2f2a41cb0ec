#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "s2s/decoder.hpp"
#include "s2s/errors.hpp"
#include "s2s/nn.hpp"
#include "s2s/rng.hpp"

using namespace s2s;

namespace {

DecoderConfig small_config() {
  DecoderConfig cfg;
  cfg.d_dec = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.max_len = 256;
  cfg.text_vocab = 16;
  cfg.codebook_size = 12;
  return cfg;
}

Tensor random_hidden(int rows, int d_llm, Rng& rng) {
  Tensor h({rows, d_llm});
  for (std::int64_t i = 0; i < h.numel(); ++i) h[i] = rng.uniform(-1, 1);
  return h;
}

}  // namespace

TEST_CASE("training sequence: 4 hidden + 8 tokens -> 13 slots with EOS appended") {
  DecoderVocab vocab{16, 12};
  SpeechTokenSequence speech;
  speech.ids = {0, 1, 2, 3, 4, 5, 6, 7};
  DecoderTrainSequence seq = build_training_sequence(4, speech, ScheduleConfig{4, 8, 4}, vocab);
  REQUIRE(seq.layout.slots.size() == 13);
  CHECK(seq.layout.h_total == 4);
  CHECK(seq.layout.s_total == 9);

  // hidden slots first
  for (int t = 0; t < 4; ++t) {
    CHECK(seq.hidden_rows[static_cast<std::size_t>(t)] == t);
    CHECK(seq.input_tokens[static_cast<std::size_t>(t)] == -1);
    CHECK(seq.targets[static_cast<std::size_t>(t)] == vocab.pad_sp());
    CHECK_FALSE(seq.mask[static_cast<std::size_t>(t)]);
  }
  // first speech slot is fed BOS_SP and targets the first token
  CHECK(seq.input_tokens[4] == vocab.bos_sp());
  CHECK(seq.targets[4] == vocab.id_of_code(0));
  // subsequent speech slots are teacher-forced on the previous token
  for (int i = 1; i < 8; ++i) {
    CHECK(seq.input_tokens[static_cast<std::size_t>(4 + i)] == vocab.id_of_code(speech.ids[i - 1]));
    CHECK(seq.targets[static_cast<std::size_t>(4 + i)] == vocab.id_of_code(speech.ids[i]));
  }
  // final slot targets EOS_SP
  CHECK(seq.targets[12] == vocab.eos_sp());
  CHECK(seq.mask == loss_mask(seq.layout));
}

TEST_CASE("training sequence: empty everything is a single EOS slot") {
  DecoderVocab vocab{16, 12};
  DecoderTrainSequence seq =
      build_training_sequence(0, SpeechTokenSequence{}, ScheduleConfig{4, 8, 4}, vocab);
  REQUIRE(seq.layout.slots.size() == 1);
  CHECK(seq.input_tokens[0] == vocab.bos_sp());
  CHECK(seq.targets[0] == vocab.eos_sp());
  CHECK(seq.mask[0]);
}

TEST_CASE("loss is bit-identical when targets at hidden slots are perturbed") {
  DecoderConfig cfg = small_config();
  SpeechDecoder dec(cfg, 31);
  nn::Linear proj("projection", 8, cfg.d_dec, 31);
  Rng rng(1);
  Tensor hidden = random_hidden(6, 8, rng);
  SpeechTokenSequence speech;
  for (int i = 0; i < 9; ++i) speech.ids.push_back(static_cast<int>(rng.uniform_int(12)));

  DecoderTrainSequence seq =
      build_training_sequence(6, speech, ScheduleConfig{4, 8, 4}, dec.vocab());
  Tensor logits = dec.forward_interleaved(seq, hidden, proj);

  nn::CrossEntropy ce;
  double base = ce.forward(logits, seq.targets, seq.mask);

  auto perturbed = seq.targets;
  for (std::size_t t = 0; t < perturbed.size(); ++t) {
    if (!seq.mask[t]) perturbed[t] = dec.vocab().id_of_code(3);
  }
  nn::CrossEntropy ce2;
  double changed = ce2.forward(logits, perturbed, seq.mask);
  CHECK(base == changed);  // exactly zero difference

  // and the loss gradient at hidden-slot rows is exactly zero
  Tensor dlogits = ce.backward();
  for (std::size_t t = 0; t < seq.mask.size(); ++t) {
    if (seq.mask[t]) continue;
    for (int v = 0; v < dlogits.cols(); ++v) REQUIRE(dlogits.at(static_cast<int>(t), v) == 0.0);
  }
}

TEST_CASE("streaming: no emission before the m-th push, a full block after it") {
  DecoderConfig cfg = small_config();
  SpeechDecoder dec(cfg, 77);
  nn::Linear proj("projection", 8, cfg.d_dec, 77);
  Rng rng(2);

  StreamState state(dec, proj, ScheduleConfig{4, 8, 4}, DecodeLimits{64});
  std::vector<double> h(8);
  for (int push = 0; push < 3; ++push) {
    for (double& v : h) v = rng.uniform(-1, 1);
    CHECK(state.push_hidden(h).empty());
  }
  for (double& v : h) v = rng.uniform(-1, 1);
  auto emitted = state.push_hidden(h);
  // exactly n_tokens unless EOS_SP ended the block early
  if (state.phase() == StreamPhase::Done) {
    CHECK(emitted.size() <= 8);
  } else {
    CHECK(emitted.size() == 8);
  }
  for (int code : emitted) {
    CHECK(code >= 0);
    CHECK(code < 12);
  }
}

TEST_CASE("streaming state transitions and error paths") {
  DecoderConfig cfg = small_config();
  SpeechDecoder dec(cfg, 5);
  nn::Linear proj("projection", 8, cfg.d_dec, 5);
  std::vector<double> h(8, 0.1);

  StreamState state(dec, proj, ScheduleConfig{2, 3, 2}, DecodeLimits{64});
  CHECK(state.phase() == StreamPhase::Interleaving);
  state.push_hidden(h);
  state.finish_hidden();
  CHECK(state.phase() == StreamPhase::Done);
  CHECK_THROWS_AS(state.push_hidden(h), ValidationError);
  CHECK_THROWS_AS(state.finish_hidden(), ValidationError);

  StreamState zero(dec, proj, ScheduleConfig{2, 3, 2}, DecodeLimits{0});
  CHECK(zero.phase() == StreamPhase::Done);
}

TEST_CASE("decode_offline: zero budget gives an empty sequence") {
  DecoderConfig cfg = small_config();
  SpeechDecoder dec(cfg, 3);
  nn::Linear proj("projection", 8, cfg.d_dec, 3);
  Rng rng(4);
  Tensor hidden = random_hidden(8, 8, rng);
  CHECK(decode_offline(dec, proj, hidden, ScheduleConfig{4, 8, 4}, DecodeLimits{0}).ids.empty());
}

TEST_CASE("streaming equals offline decoding bit-exactly over random models") {
  Rng rng(20250810);
  for (int trial = 0; trial < 20; ++trial) {
    DecoderConfig cfg;
    cfg.d_dec = 8 + 4 * static_cast<int>(rng.uniform_int(3));
    cfg.layers = 1 + static_cast<int>(rng.uniform_int(2));
    cfg.heads = 2;
    cfg.max_len = 512;
    cfg.text_vocab = 8;
    cfg.codebook_size = 6 + static_cast<int>(rng.uniform_int(10));
    int d_llm = 6 + static_cast<int>(rng.uniform_int(6));
    SpeechDecoder dec(cfg, rng.next_u64());
    nn::Linear proj("projection", d_llm, cfg.d_dec, rng.next_u64());

    ScheduleConfig sched;
    sched.m_hidden = 1 + static_cast<int>(rng.uniform_int(5));
    sched.n_tokens = 1 + static_cast<int>(rng.uniform_int(9));
    Tensor hidden = random_hidden(static_cast<int>(rng.uniform_int(33)), d_llm, rng);
    DecodeLimits limits{24};

    SpeechTokenSequence offline = decode_offline(dec, proj, hidden, sched, limits);
    SpeechTokenSequence streamed = decode_streaming(dec, proj, hidden, sched, limits);
    CAPTURE(trial);
    REQUIRE(offline.ids == streamed.ids);
  }
}

TEST_CASE("speech-mode picks never return text or non-EOS control ids") {
  DecoderVocab vocab{16, 12};
  std::vector<double> logits(static_cast<std::size_t>(vocab.total()), 0.0);
  logits[3] = 100.0;                 // text id with the largest logit
  logits[vocab.bos_sp()] = 50.0;     // control ids other than EOS
  logits[vocab.pad_sp()] = 50.0;
  int picked = pick_speech_token(logits.data(), vocab);
  CHECK(vocab.is_speech(picked));

  logits[vocab.eos_sp()] = 200.0;
  CHECK(pick_speech_token(logits.data(), vocab) == vocab.eos_sp());
}

TEST_CASE("projection + decoder pass the finite-difference check") {
  DecoderConfig cfg;
  cfg.d_dec = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.max_len = 32;
  cfg.text_vocab = 8;
  cfg.codebook_size = 6;
  SpeechDecoder dec(cfg, 2024);
  nn::Linear proj("projection", 6, cfg.d_dec, 2024);
  Rng rng(6);
  Tensor hidden = random_hidden(4, 6, rng);
  SpeechTokenSequence speech;
  for (int i = 0; i < 5; ++i) speech.ids.push_back(static_cast<int>(rng.uniform_int(6)));
  DecoderTrainSequence seq = build_training_sequence(4, speech, ScheduleConfig{2, 3, 2}, dec.vocab());

  std::vector<nn::Parameter*> params;
  proj.collect(params);
  dec.collect(params);
  nn::CrossEntropy ce;
  auto loss = [&] { return ce.forward(dec.forward_interleaved(seq, hidden, proj), seq.targets, seq.mask); };
  auto loss_grad = [&] {
    double l = ce.forward(dec.forward_interleaved(seq, hidden, proj), seq.targets, seq.mask);
    dec.backward_interleaved(ce.backward(), proj);
    return l;
  };
  auto report = nn::grad_check(params, loss, loss_grad, 1e-6);
  CAPTURE(report.worst_param);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("token dump round trip with the #EOS sentinel") {
  SpeechTokenSequence seq;
  seq.ids = {3, 1, 4, 1, 5};
  auto path = std::filesystem::temp_directory_path() / "s2s_tokens_test.txt";
  write_token_dump(path.string(), seq);
  SpeechTokenSequence back = read_token_dump(path.string());
  CHECK(back.ids == seq.ids);
  std::filesystem::remove(path);
}

TEST_CASE("vocabulary partition arithmetic") {
  DecoderVocab vocab{128, 256};
  CHECK(vocab.speech_base() == 128);
  CHECK(vocab.bos_sp() == 384);
  CHECK(vocab.eos_sp() == 385);
  CHECK(vocab.pad_sp() == 386);
  CHECK(vocab.total() == 387);
  CHECK(vocab.is_text(5));
  CHECK_FALSE(vocab.is_text(128));
  CHECK(vocab.is_speech(128));
  CHECK(vocab.code_of(vocab.id_of_code(9)) == 9);
  CHECK_THROWS_AS(vocab.code_of(3), ValidationError);
  CHECK_THROWS_AS(vocab.id_of_code(256), ValidationError);
}
