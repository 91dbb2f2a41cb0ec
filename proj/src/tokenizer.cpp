#include "s2s/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"

namespace s2s {

void TokenizerConfig::validate() const {
  require(n_bands >= 1, "TokenizerConfig: n_bands must be >= 1");
  require(mel_hz > 0, "TokenizerConfig: mel_hz must be positive");
  require(pool_factor >= 1, "TokenizerConfig: pool_factor must be >= 1");
  require(codebook_size >= 1, "TokenizerConfig: codebook_size must be >= 1");
}

double mel_probe_hz(int band) { return 200.0 * (band + 1); }

Tensor mel_features(std::span<const double> waveform, int sample_rate,
                    const TokenizerConfig& cfg) {
  cfg.validate();
  require(sample_rate > 0, "mel_features: bad sample rate");
  double hop_f = sample_rate / cfg.mel_hz;
  require(std::abs(hop_f - std::round(hop_f)) < 1e-9, "mel_features: sample_rate ", sample_rate,
          " not divisible by mel_hz ", cfg.mel_hz);
  int hop = static_cast<int>(std::lround(hop_f));
  for (double s : waveform) require(std::isfinite(s), "mel_features: non-finite sample");

  int n_frames = static_cast<int>(waveform.size()) / hop;
  Tensor mel({n_frames, cfg.n_bands});
  double two_pi_over_sr = 2.0 * M_PI / sample_rate;
  for (int t = 0; t < n_frames; ++t) {
    const double* x = waveform.data() + static_cast<std::size_t>(t) * hop;
    double* out = mel.row(t);
    for (int b = 0; b < cfg.n_bands; ++b) {
      double w = mel_probe_hz(b) * two_pi_over_sr;
      double c = 0.0, s = 0.0;
      for (int i = 0; i < hop; ++i) {
        c += x[i] * std::cos(w * i);
        s += x[i] * std::sin(w * i);
      }
      // amplitude estimate: a probe-frequency sinusoid of amplitude A gives A
      out[b] = 2.0 * std::sqrt(c * c + s * s) / hop;
    }
  }
  return mel;
}

Tensor pool_features(const Tensor& mel, int pool_factor) {
  require(pool_factor >= 1, "pool_features: pool_factor must be >= 1");
  require(mel.rank() == 2, "pool_features: expected rank-2 input, got ", mel.shape_str());
  int n = mel.rows();
  int dim = mel.cols();
  int n_out = (n + pool_factor - 1) / pool_factor;
  Tensor out({n_out, dim});
  for (int w = 0; w < n_out; ++w) {
    int begin = w * pool_factor;
    int end = std::min(begin + pool_factor, n);
    double inv = 1.0 / (end - begin);
    double* o = out.row(w);
    for (int t = begin; t < end; ++t) {
      const double* r = mel.row(t);
      for (int i = 0; i < dim; ++i) o[i] += r[i];
    }
    for (int i = 0; i < dim; ++i) o[i] *= inv;
  }
  return out;
}

void Codebook::validate() const {
  require(vectors.rank() == 2 && vectors.rows() >= 1, "Codebook: need a [V, dim] table");
  require(vectors.all_finite(), "Codebook: non-finite code vector");
  for (int a = 0; a < size(); ++a) {
    for (int b = a + 1; b < size(); ++b) {
      bool same = true;
      for (int i = 0; i < dim(); ++i) {
        if (vectors.at(a, i) != vectors.at(b, i)) {
          same = false;
          break;
        }
      }
      require(!same, "Codebook: duplicate code vectors at ", a, " and ", b);
    }
  }
}

namespace {

double sqdist(const double* a, const double* b, int dim) {
  double d = 0.0;
  for (int i = 0; i < dim; ++i) {
    double c = a[i] - b[i];
    d += c * c;
  }
  return d;
}

// Index of the point farthest from its assigned centroid, skipping indices
// already claimed as fresh centroids.
int farthest_point(const Tensor& features, const std::vector<int>& assign, const Tensor& centers,
                   const std::vector<bool>& claimed) {
  int dim = features.cols();
  int best = -1;
  double best_d = -1.0;
  for (int p = 0; p < features.rows(); ++p) {
    if (claimed[static_cast<std::size_t>(p)]) continue;
    double d = sqdist(features.row(p), centers.row(assign[static_cast<std::size_t>(p)]), dim);
    if (d > best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

}  // namespace

Codebook build_codebook(const Tensor& features, int v, std::uint64_t seed) {
  require(v >= 1, "build_codebook: v must be >= 1");
  require(features.rank() == 2, "build_codebook: expected [N, dim] features");
  int n = features.rows();
  int dim = features.cols();
  require(n >= v, "build_codebook: insufficient data, need at least ", v, " rows, got ", n);

  // seeded init: v distinct rows
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(seed, "codebook.init"));
  rng.shuffle(order);

  Tensor centers({v, dim});
  for (int k = 0; k < v; ++k) {
    const double* src = features.row(order[static_cast<std::size_t>(k)]);
    std::copy(src, src + dim, centers.row(k));
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  constexpr int kIters = 25;
  for (int iter = 0; iter < kIters; ++iter) {
    Codebook view{centers};
    for (int p = 0; p < n; ++p) assign[static_cast<std::size_t>(p)] = nearest_code(features.row(p), view);

    Tensor sums({v, dim});
    std::vector<int> counts(static_cast<std::size_t>(v), 0);
    for (int p = 0; p < n; ++p) {
      int k = assign[static_cast<std::size_t>(p)];
      ++counts[static_cast<std::size_t>(k)];
      const double* r = features.row(p);
      double* s = sums.row(k);
      for (int i = 0; i < dim; ++i) s[i] += r[i];
    }
    std::vector<bool> claimed(static_cast<std::size_t>(n), false);
    for (int k = 0; k < v; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        double inv = 1.0 / counts[static_cast<std::size_t>(k)];
        double* c = centers.row(k);
        const double* s = sums.row(k);
        for (int i = 0; i < dim; ++i) c[i] = s[i] * inv;
      } else {
        int p = farthest_point(features, assign, centers, claimed);
        ensure(p >= 0, "build_codebook: no candidate for empty cluster re-seed");
        claimed[static_cast<std::size_t>(p)] = true;
        const double* src = features.row(p);
        std::copy(src, src + dim, centers.row(k));
      }
    }
  }

  // The quantize/dequantize round-trip requires distinct codes; nudge exact
  // duplicates apart by re-seeding them from farthest points.
  for (int attempt = 0; attempt < 8; ++attempt) {
    Codebook view{centers};
    for (int p = 0; p < n; ++p) assign[static_cast<std::size_t>(p)] = nearest_code(features.row(p), view);
    std::vector<bool> claimed(static_cast<std::size_t>(n), false);
    bool had_duplicate = false;
    for (int a = 0; a < v && !had_duplicate; ++a) {
      for (int b = a + 1; b < v; ++b) {
        if (sqdist(centers.row(a), centers.row(b), dim) == 0.0) {
          int p = farthest_point(features, assign, centers, claimed);
          if (p < 0) break;
          claimed[static_cast<std::size_t>(p)] = true;
          const double* src = features.row(p);
          std::copy(src, src + dim, centers.row(b));
          had_duplicate = true;
          break;
        }
      }
    }
    if (!had_duplicate) break;
  }

  Codebook book{std::move(centers)};
  book.validate();
  return book;
}

int nearest_code(const double* x, const Codebook& book) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < book.size(); ++k) {
    double d = sqdist(x, book.vectors.row(k), book.dim());
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

SpeechTokenSequence quantize(const Tensor& features, const Codebook& book) {
  require(features.rank() == 2 && features.cols() == book.dim(), "quantize: feature dim ",
          features.empty() ? 0 : features.cols(), " does not match codebook dim ", book.dim());
  SpeechTokenSequence seq;
  seq.ids.reserve(static_cast<std::size_t>(features.rows()));
  for (int t = 0; t < features.rows(); ++t) seq.ids.push_back(nearest_code(features.row(t), book));
  return seq;
}

Tensor dequantize(const SpeechTokenSequence& tokens, const Codebook& book) {
  Tensor out({tokens.count(), book.dim()});
  for (int t = 0; t < tokens.count(); ++t) {
    int id = tokens.ids[static_cast<std::size_t>(t)];
    require(id >= 0 && id < book.size(), "dequantize: token id ", id, " out of range [0, ",
            book.size(), ")");
    const double* src = book.vectors.row(id);
    std::copy(src, src + book.dim(), out.row(t));
  }
  return out;
}

SpeechTokenSequence tokenize_waveform(std::span<const double> waveform, int sample_rate,
                                      const Codebook& book, const TokenizerConfig& cfg) {
  Tensor mel = mel_features(waveform, sample_rate, cfg);
  Tensor pooled = pool_features(mel, cfg.pool_factor);
  return quantize(pooled, book);
}

}  // namespace s2s
