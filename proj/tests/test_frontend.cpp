#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "s2s/errors.hpp"
#include "s2s/frontend.hpp"
#include "s2s/refsynth.hpp"
#include "s2s/rng.hpp"
#include "s2s/stream.hpp"

using namespace s2s;

namespace {

std::vector<double> random_wave(int n, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& s : w) s = rng.uniform(-0.5, 0.5);
  return w;
}

}  // namespace

TEST_CASE("encoder frame count follows the 25 Hz rate") {
  FrontendConfig cfg;
  RateConfig rates;
  EncoderStub enc(cfg, rates);

  Rng rng(1);
  auto four_seconds = random_wave(4 * 16000, rng);
  CHECK(enc.encode(four_seconds, 16000).count() == 100);
  CHECK(enc.encode(std::vector<double>{}, 16000).count() == 0);
  // partial trailing frame is dropped
  CHECK(enc.encode(random_wave(640 * 3 + 639, rng), 16000).count() == 3);
}

TEST_CASE("encoder rejects a mismatched sample rate and non-finite samples") {
  EncoderStub enc(FrontendConfig{}, RateConfig{});
  Rng rng(2);
  auto wave = random_wave(1280, rng);
  CHECK_THROWS_AS(enc.encode(wave, 8000), ValidationError);
  wave[5] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(enc.encode(wave, 16000), ValidationError);
}

TEST_CASE("silence maps to identical frames") {
  EncoderStub enc(FrontendConfig{}, RateConfig{});
  std::vector<double> silence(640 * 10, 0.0);
  FeatureFrames frames = enc.encode(silence, 16000);
  REQUIRE(frames.count() == 10);
  for (int t = 1; t < frames.count(); ++t) {
    for (int b = 0; b < frames.dim(); ++b) {
      REQUIRE(frames.data.at(t, b) == frames.data.at(0, b));
    }
  }
}

TEST_CASE("the encoder stub has no trainable parameters") {
  EncoderStub enc(FrontendConfig{}, RateConfig{});
  CHECK_FALSE(enc.probe_param().trainable);
}

TEST_CASE("distinct word chords produce distinct feature patterns") {
  EncoderStub enc(FrontendConfig{}, RateConfig{});
  auto f1 = enc.encode(synth_tokens({20}, -1, VoiceStyle{}), 16000);
  auto f2 = enc.encode(synth_tokens({21}, -1, VoiceStyle{}), 16000);
  REQUIRE(f1.count() == 4);
  bool differs = false;
  for (int b = 0; b < f1.dim(); ++b) {
    if (std::abs(f1.data.at(0, b) - f2.data.at(0, b)) > 0.5) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("adapter length law matches downsampled_length for n in 0..1000") {
  FrontendConfig tiny;
  tiny.d_enc = 2;
  tiny.d_llm = 2;
  Adapter adapter(tiny, 3);
  Rng rng(9);
  for (int n = 0; n <= 1000; ++n) {
    Tensor frames({n, 2});
    for (std::int64_t i = 0; i < frames.numel(); ++i) frames[i] = rng.uniform(-1, 1);
    REQUIRE(adapter.forward(frames).rows() == downsampled_length(n));
  }
}

TEST_CASE("adapter examples: 100 -> 25, 0 -> 0, 7 -> 2") {
  Adapter adapter(FrontendConfig{}, 5);
  CHECK(adapter.forward(Tensor({100, 32})).rows() == 25);
  CHECK(adapter.forward(Tensor({0, 32})).rows() == 0);
  CHECK(adapter.forward(Tensor({7, 32})).rows() == 2);
}

TEST_CASE("adapter passes the finite-difference check") {
  FrontendConfig small;
  small.d_enc = 4;
  small.d_llm = 6;
  Adapter adapter(small, 11);
  std::vector<nn::Parameter*> params;
  adapter.collect(params);
  Rng rng(13);
  Tensor x({9, 4});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1, 1);

  auto loss = [&] {
    Tensor y = adapter.forward(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) s += y[i] * y[i];
    return 0.5 * s;
  };
  auto loss_grad = [&] {
    Tensor y = adapter.forward(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) s += y[i] * y[i];
    adapter.backward(y);
    return 0.5 * s;
  };
  auto report = nn::grad_check(params, loss, loss_grad, 1e-6);
  CAPTURE(report.worst_param);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("locality: perturbing late samples leaves early embeddings bit-identical") {
  EncoderStub enc(FrontendConfig{}, RateConfig{});
  Adapter adapter(FrontendConfig{}, 21);
  Rng rng(17);
  int hop = 640;
  auto wave = random_wave(hop * 50, rng);  // 50 frames -> 12 embeddings

  FeatureFrames base_frames = enc.encode(wave, 16000);
  Tensor base = adapter.forward(base_frames.data);
  REQUIRE(base.rows() == 12);

  int frame0 = 30;
  auto perturbed = wave;
  for (std::size_t i = static_cast<std::size_t>(frame0) * hop; i < perturbed.size(); ++i) {
    perturbed[i] += rng.uniform(-0.2, 0.2);
  }
  Tensor out = adapter.forward(enc.encode(perturbed, 16000).data);

  // embedding j sees frames [4j-3, 4j+3]; frames < 30 are untouched
  for (int j = 0; j < 12; ++j) {
    if (4 * j + 3 >= frame0) continue;
    for (int i = 0; i < base.cols(); ++i) REQUIRE(out.at(j, i) == base.at(j, i));
  }
}
