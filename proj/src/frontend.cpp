#include "s2s/frontend.hpp"

#include <cmath>

#include "s2s/errors.hpp"

namespace s2s {

double frontend_probe_hz(int band) { return 250.0 + 125.0 * band; }

EncoderStub::EncoderStub(const FrontendConfig& cfg, const RateConfig& rates)
    : cfg_(cfg), rates_(rates) {
  require(cfg.d_enc >= 1, "EncoderStub: d_enc must be >= 1");
  rates.validate();
  probe_hz_ = nn::Parameter("encoder_stub.probe_hz", Tensor::zeros({cfg.d_enc}));
  probe_hz_.trainable = false;
  for (int b = 0; b < cfg.d_enc; ++b) {
    double f = frontend_probe_hz(b);
    require(f < rates.sample_rate / 2.0, "EncoderStub: probe ", b, " at ", f,
            " Hz exceeds Nyquist for sample_rate ", rates.sample_rate);
    probe_hz_.value[b] = f;
  }
}

FeatureFrames EncoderStub::encode(std::span<const double> waveform, int sample_rate) const {
  require(sample_rate == rates_.sample_rate, "EncoderStub: expected sample rate ",
          rates_.sample_rate, ", got ", sample_rate);
  for (double s : waveform) {
    require(std::isfinite(s), "EncoderStub: non-finite sample in waveform");
  }

  int hop = rates_.encoder_hop();
  int n_frames = static_cast<int>(waveform.size()) / hop;
  FeatureFrames frames;
  frames.rate = rates_.encoder_hz;
  frames.data = Tensor::zeros({n_frames, cfg_.d_enc});

  double two_pi_over_sr = 2.0 * M_PI / sample_rate;
  for (int t = 0; t < n_frames; ++t) {
    const double* x = waveform.data() + static_cast<std::size_t>(t) * hop;
    double* out = frames.data.row(t);
    for (int b = 0; b < cfg_.d_enc; ++b) {
      double w = probe_hz_.value[b] * two_pi_over_sr;
      double c = 0.0, s = 0.0;
      for (int i = 0; i < hop; ++i) {
        c += x[i] * std::cos(w * i);
        s += x[i] * std::sin(w * i);
      }
      // normalized band energy: ~A^2/4 for a sinusoid of amplitude A at the probe
      double energy = (c * c + s * s) / (static_cast<double>(hop) * hop);
      out[b] = cfg_.log_scale * std::log(energy + cfg_.log_floor);
    }
  }
  return frames;
}

Adapter::Adapter(const FrontendConfig& cfg, std::uint64_t root_seed)
    : conv1("adapter.conv1", cfg.d_enc, cfg.d_llm, 3, 2, 1, root_seed),
      conv2("adapter.conv2", cfg.d_llm, cfg.d_llm, 3, 2, 1, root_seed),
      ffn("adapter.ffn", cfg.d_llm, 4 * cfg.d_llm, root_seed) {}

Tensor Adapter::forward(const Tensor& frames) {
  Tensor h = act1.forward(conv1.forward(frames));
  h = act2.forward(conv2.forward(h));
  return ffn.forward(h);
}

Tensor Adapter::backward(const Tensor& dy) {
  Tensor g = act2.backward(ffn.backward(dy));
  g = act1.backward(conv2.backward(g));
  return conv1.backward(g);
}

void Adapter::collect(std::vector<nn::Parameter*>& out) {
  conv1.collect(out);
  conv2.collect(out);
  ffn.collect(out);
}

}  // namespace s2s
