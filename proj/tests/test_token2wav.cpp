#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"
#include "s2s/token2wav.hpp"
#include "s2s/wav.hpp"

using namespace s2s;

namespace {

Codebook random_book(int v, int dim, Rng& rng) {
  Tensor t({v, dim});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(0.0, 0.4);
  Codebook book{std::move(t)};
  book.validate();
  return book;
}

SpeechTokenSequence random_tokens(int n, int v, Rng& rng) {
  SpeechTokenSequence seq;
  for (int i = 0; i < n; ++i) seq.ids.push_back(static_cast<int>(rng.uniform_int(v)));
  return seq;
}

}  // namespace

TEST_CASE("four tokens synthesize exactly 0.32 s of audio") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  CHECK(voc.samples_per_token() == 1280);
  Rng rng(1);
  Codebook book = random_book(8, 20, rng);
  VocoderState state = voc.make_state();
  WaveChunk chunk = voc.synth_chunk(std::vector<int>{0, 1, 2, 3}, book, state);
  CHECK(chunk.samples.size() == 5120);
  CHECK(chunk.token_span == std::pair<std::int64_t, std::int64_t>{0, 4});
  CHECK(state.samples_emitted == 5120);
}

TEST_CASE("all-zero codes synthesize silence") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Tensor codes({2, 20});  // all zeros
  codes.at(1, 3) = 0.5;   // keep codes distinct for validation
  Codebook book{codes};
  VocoderState state = voc.make_state();
  WaveChunk chunk = voc.synth_chunk(std::vector<int>{0, 0, 0}, book, state);
  for (double s : chunk.samples) REQUIRE(s == 0.0);
}

TEST_CASE("phase continuity: two chunks equal one chunk bit-exactly") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Rng rng(2);
  Codebook book = random_book(16, 20, rng);
  SpeechTokenSequence tokens = random_tokens(10, 16, rng);

  VocoderState one = voc.make_state();
  WaveChunk whole = voc.synth_chunk(tokens.ids, book, one);

  VocoderState split = voc.make_state();
  WaveChunk first =
      voc.synth_chunk(std::span<const int>(tokens.ids.data(), 6), book, split);
  WaveChunk second =
      voc.synth_chunk(std::span<const int>(tokens.ids.data() + 6, 4), book, split);
  CHECK(second.token_span == std::pair<std::int64_t, std::int64_t>{6, 10});

  std::vector<double> joined = first.samples;
  joined.insert(joined.end(), second.samples.begin(), second.samples.end());
  REQUIRE(joined.size() == whole.samples.size());
  for (std::size_t i = 0; i < joined.size(); ++i) REQUIRE(joined[i] == whole.samples[i]);
}

TEST_CASE("waveform bytes are invariant to the chunk size") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Rng rng(3);
  Codebook book = random_book(16, 20, rng);
  for (int trial = 0; trial < 5; ++trial) {
    SpeechTokenSequence tokens = random_tokens(1 + static_cast<int>(rng.uniform_int(30)), 16, rng);
    auto reference = encode_wav16(voc.synth_stream(tokens, tokens.count(), book), 16000);
    for (int chunk : {1, 2, 4, 8}) {
      auto bytes = encode_wav16(voc.synth_stream(tokens, chunk, book), 16000);
      REQUIRE(bytes == reference);
    }
  }
}

TEST_CASE("causality: later tokens never change earlier samples") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Rng rng(4);
  Codebook book = random_book(16, 20, rng);
  SpeechTokenSequence tokens = random_tokens(12, 16, rng);
  auto base = voc.synth_stream(tokens, 4, book);

  SpeechTokenSequence changed = tokens;
  for (int k = 8; k < 12; ++k) changed.ids[static_cast<std::size_t>(k)] = (changed.ids[static_cast<std::size_t>(k)] + 1) % 16;
  auto out = voc.synth_stream(changed, 4, book);
  for (int i = 0; i < 8 * 1280; ++i) REQUIRE(out[static_cast<std::size_t>(i)] == base[static_cast<std::size_t>(i)]);
}

TEST_CASE("length law and the empty stream") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Rng rng(5);
  Codebook book = random_book(8, 20, rng);
  CHECK(voc.synth_stream(SpeechTokenSequence{}, 4, book).empty());
  CHECK(voc.synth_stream(random_tokens(8, 8, rng), 4, book).size() == 10240);
  for (int n : {1, 3, 7, 25}) {
    CHECK(voc.synth_stream(random_tokens(n, 8, rng), 4, book).size() ==
          static_cast<std::size_t>(n) * 1280);
  }
}

TEST_CASE("invalid token ids are rejected") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Rng rng(6);
  Codebook book = random_book(8, 20, rng);
  VocoderState state = voc.make_state();
  CHECK_THROWS_AS(voc.synth_chunk(std::vector<int>{8}, book, state), ValidationError);
  CHECK_THROWS_AS(voc.synth_chunk(std::vector<int>{}, book, state), ValidationError);
}

TEST_CASE("wav io: round trip and rejection of non-PCM16 files") {
  Rng rng(7);
  std::vector<double> samples(1000);
  for (double& s : samples) s = rng.uniform(-1.2, 1.2);  // exercises clamping
  auto path = std::filesystem::temp_directory_path() / "s2s_wav_test.wav";
  write_wav16(path.string(), samples, 16000);
  WavData back = read_wav16(path.string());
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double expect = std::clamp(samples[i], -1.0, 1.0);
    CHECK(back.samples[i] == doctest::Approx(expect).epsilon(1e-4));
  }

  // stereo header is rejected
  auto bytes = encode_wav16(samples, 16000);
  bytes[22] = 2;  // channel count
  auto bad = std::filesystem::temp_directory_path() / "s2s_wav_bad.wav";
  std::ofstream os(bad, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  os.close();
  CHECK_THROWS_AS(read_wav16(bad.string()), ValidationError);

  std::filesystem::remove(path);
  std::filesystem::remove(bad);
}

TEST_CASE("writes are deterministic") {
  Vocoder voc(TokenizerConfig{}, RateConfig{});
  Rng rng(8);
  Codebook book = random_book(8, 20, rng);
  SpeechTokenSequence tokens = random_tokens(6, 8, rng);
  auto a = encode_wav16(voc.synth_stream(tokens, 4, book), 16000);
  auto b = encode_wav16(voc.synth_stream(tokens, 4, book), 16000);
  CHECK(a == b);
}
