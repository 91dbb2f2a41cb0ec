#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"
#include "s2s/tokenizer.hpp"

using namespace s2s;

namespace {

Tensor random_features(int n, int dim, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t({n, dim});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// independent nearest-neighbor scan used as the oracle
int brute_force_nearest(const double* x, const Codebook& book) {
  std::vector<double> dists(static_cast<std::size_t>(book.size()));
  for (int k = 0; k < book.size(); ++k) {
    double d = 0.0;
    for (int i = 0; i < book.dim(); ++i) {
      double c = x[i] - book.vectors.at(k, i);
      d += c * c;
    }
    dists[static_cast<std::size_t>(k)] = d;
  }
  return static_cast<int>(std::min_element(dists.begin(), dists.end()) - dists.begin());
}

}  // namespace

TEST_CASE("pooling: 80 frames -> 10, constant stays constant, 83 -> 11") {
  Rng rng(1);
  CHECK(pool_features(random_features(80, 4, rng), 8).rows() == 10);
  CHECK(pool_features(Tensor({0, 4}), 8).rows() == 0);

  Tensor constant({16, 3});
  constant.fill(0.7);
  Tensor pooled = pool_features(constant, 8);
  REQUIRE(pooled.rows() == 2);
  for (std::int64_t i = 0; i < pooled.numel(); ++i) CHECK(pooled[i] == doctest::Approx(0.7));

  Tensor f = random_features(83, 2, rng);
  Tensor p = pool_features(f, 8);
  REQUIRE(p.rows() == 11);
  // trailing window averages over its actual 3 rows
  for (int i = 0; i < 2; ++i) {
    double mean = (f.at(80, i) + f.at(81, i) + f.at(82, i)) / 3.0;
    CHECK(p.at(10, i) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("rate law: pooled length is ceil(mel_frames / 8)") {
  Rng rng(2);
  for (int n = 0; n <= 100; ++n) {
    CHECK(pool_features(random_features(n, 3, rng), 8).rows() == (n + 7) / 8);
  }
}

TEST_CASE("mel features: silence is zero, probe tones are recovered") {
  TokenizerConfig cfg;
  std::vector<double> silence(1600, 0.0);
  Tensor mel = mel_features(silence, 16000, cfg);
  REQUIRE(mel.rows() == 10);
  for (std::int64_t i = 0; i < mel.numel(); ++i) CHECK(mel[i] == 0.0);

  // a pure probe tone shows up in its own band at its amplitude
  std::vector<double> tone(1600);
  double f = mel_probe_hz(4);
  for (std::size_t i = 0; i < tone.size(); ++i) {
    tone[i] = 0.25 * std::sin(2 * M_PI * f * static_cast<double>(i) / 16000.0);
  }
  Tensor mel2 = mel_features(tone, 16000, cfg);
  CHECK(mel2.at(0, 4) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(std::abs(mel2.at(0, 3)) < 1e-9);  // orthogonal bands stay silent
}

TEST_CASE("k-means: V points and V clusters reach zero distortion") {
  Rng rng(3);
  Tensor pts = random_features(6, 2, rng);
  Codebook book = build_codebook(pts, 6, 77);
  for (int p = 0; p < 6; ++p) {
    int k = nearest_code(pts.row(p), book);
    for (int i = 0; i < 2; ++i) CHECK(book.vectors.at(k, i) == pts.at(p, i));
  }
}

TEST_CASE("k-means: two separated blobs recover the blob means") {
  Rng rng(4);
  Tensor pts({40, 2});
  double mean_a[2] = {0.0, 0.0}, mean_b[2] = {0.0, 0.0};
  for (int p = 0; p < 20; ++p) {
    pts.at(p, 0) = 1.0 + rng.uniform(-0.05, 0.05);
    pts.at(p, 1) = 1.0 + rng.uniform(-0.05, 0.05);
    mean_a[0] += pts.at(p, 0) / 20;
    mean_a[1] += pts.at(p, 1) / 20;
  }
  for (int p = 20; p < 40; ++p) {
    pts.at(p, 0) = 9.0 + rng.uniform(-0.05, 0.05);
    pts.at(p, 1) = 9.0 + rng.uniform(-0.05, 0.05);
    mean_b[0] += pts.at(p, 0) / 20;
    mean_b[1] += pts.at(p, 1) / 20;
  }
  Codebook book = build_codebook(pts, 2, 5);
  int lo = book.vectors.at(0, 0) < book.vectors.at(1, 0) ? 0 : 1;
  CHECK(std::abs(book.vectors.at(lo, 0) - mean_a[0]) < 1e-9);
  CHECK(std::abs(book.vectors.at(lo, 1) - mean_a[1]) < 1e-9);
  CHECK(std::abs(book.vectors.at(1 - lo, 0) - mean_b[0]) < 1e-9);
  CHECK(std::abs(book.vectors.at(1 - lo, 1) - mean_b[1]) < 1e-9);
}

TEST_CASE("k-means is deterministic per seed and rejects short data") {
  Rng rng(6);
  Tensor pts = random_features(50, 3, rng);
  Codebook a = build_codebook(pts, 8, 123);
  Codebook b = build_codebook(pts, 8, 123);
  CHECK(a.vectors.values() == b.vectors.values());
  CHECK_THROWS_AS(build_codebook(pts, 51, 1), ValidationError);
}

TEST_CASE("quantize: exact matches, tie to the lowest index, brute-force agreement") {
  Codebook book{Tensor({4, 1}, {0.0, 2.0, 2.0 + 4.0, 10.0})};  // codes at 0, 2, 6, 10

  Tensor exact({1, 1}, {2.0});
  CHECK(quantize(exact, book).ids == std::vector<int>{1});

  Tensor tie({1, 1}, {4.0});  // equidistant between codes 1 and 2
  CHECK(quantize(tie, book).ids == std::vector<int>{1});

  Rng rng(7);
  Codebook rand_book{random_features(16, 5, rng)};
  Tensor feats = random_features(10000, 5, rng);
  SpeechTokenSequence seq = quantize(feats, rand_book);
  for (int t = 0; t < feats.rows(); ++t) {
    REQUIRE(seq.ids[static_cast<std::size_t>(t)] == brute_force_nearest(feats.row(t), rand_book));
  }
}

TEST_CASE("quantize rejects a feature-dimension mismatch") {
  Rng rng(8);
  Codebook book{random_features(4, 3, rng)};
  CHECK_THROWS_AS(quantize(random_features(5, 2, rng), book), ValidationError);
}

TEST_CASE("dequantize: empty input, round trip, range errors") {
  Rng rng(9);
  Codebook book{random_features(12, 4, rng)};

  CHECK(dequantize(SpeechTokenSequence{}, book).rows() == 0);

  SpeechTokenSequence seq;
  for (int i = 0; i < 64; ++i) seq.ids.push_back(static_cast<int>(rng.uniform_int(12)));
  SpeechTokenSequence round = quantize(dequantize(seq, book), book);
  CHECK(round.ids == seq.ids);

  SpeechTokenSequence bad;
  bad.ids = {12};
  CHECK_THROWS_AS(dequantize(bad, book), ValidationError);
}

TEST_CASE("codebook validation rejects duplicate codes") {
  Codebook dup{Tensor({2, 2}, {1.0, 2.0, 1.0, 2.0})};
  CHECK_THROWS_AS(dup.validate(), ValidationError);
}

TEST_CASE("tokenize_waveform emits 12.5 tokens per second") {
  Rng rng(10);
  Codebook book{random_features(8, 20, rng)};
  std::vector<double> wave(16000, 0.0);  // 1 s
  for (std::size_t i = 0; i < wave.size(); ++i) {
    wave[i] = 0.3 * std::sin(2 * M_PI * 400.0 * static_cast<double>(i) / 16000.0);
  }
  SpeechTokenSequence seq = tokenize_waveform(wave, 16000, book, TokenizerConfig{});
  CHECK(seq.count() == 13);  // ceil(100 / 8)
  CHECK(seq.rate == 12.5);
  CHECK(seq.duration_s() == doctest::Approx(13 / 12.5));
}
