#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "s2s/checkpoint.hpp"
#include "s2s/errors.hpp"
#include "s2s/nn.hpp"
#include "s2s/rng.hpp"

using namespace s2s;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Quadratic readout so upstream grads are non-trivial: L = 0.5 sum w_i y_i^2.
struct QuadLoss {
  Tensor weights;

  explicit QuadLoss(const Tensor& like, Rng& rng) {
    weights = random_tensor(like.shape(), rng, 0.2, 1.0);
  }
  double value(const Tensor& y) const {
    double s = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) s += weights[i] * y[i] * y[i];
    return 0.5 * s;
  }
  Tensor grad(const Tensor& y) const {
    Tensor g(y.shape());
    for (std::int64_t i = 0; i < y.numel(); ++i) g[i] = weights[i] * y[i];
    return g;
  }
};

bool bits_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.numel()) * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("linear with identity weight and zero bias is the identity") {
  nn::Linear lin("lin", 3, 3, 1);
  lin.w.value.set_zero();
  for (int i = 0; i < 3; ++i) lin.w.value.at(i, i) = 1.0;
  lin.b.value.set_zero();
  Rng rng(7);
  Tensor x = random_tensor({4, 3}, rng);
  CHECK(bits_equal(lin.forward(x), x));
}

TEST_CASE("linear closed-form gradients") {
  nn::Linear lin("lin", 2, 2, 3);
  Tensor x({1, 2}, {1.5, -2.0});
  lin.forward(x);
  Tensor dy({1, 2}, {0.25, -1.0});
  Tensor dx = lin.backward(dy);
  // dW = x^T dy, db = dy, dx = dy W^T
  for (int i = 0; i < 2; ++i) {
    for (int o = 0; o < 2; ++o) {
      CHECK(lin.w.grad.at(i, o) == doctest::Approx(x[i] * dy[o]).epsilon(1e-15));
    }
    CHECK(lin.b.grad[i] == dy[i]);
    double expect = dy[0] * lin.w.value.at(i, 0) + dy[1] * lin.w.value.at(i, 1);
    CHECK(dx[i] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("zero upstream grad leaves parameter grads zero") {
  nn::Linear lin("lin", 3, 4, 11);
  Rng rng(5);
  Tensor x = random_tensor({2, 3}, rng);
  lin.forward(x);
  Tensor dx = lin.backward(Tensor({2, 4}));
  for (std::int64_t i = 0; i < dx.numel(); ++i) CHECK(dx[i] == 0.0);
  for (std::int64_t i = 0; i < lin.w.grad.numel(); ++i) CHECK(lin.w.grad[i] == 0.0);
}

TEST_CASE("backward before forward raises the missing-cache error") {
  nn::Linear lin("lin", 2, 2, 1);
  CHECK_THROWS_AS(lin.backward(Tensor({1, 2})), RuntimeError);
  nn::Conv1d conv("conv", 2, 2, 3, 2, 1, 1);
  CHECK_THROWS_AS(conv.backward(Tensor({1, 2})), RuntimeError);
}

TEST_CASE("shape mismatch errors name expected vs actual") {
  nn::Linear lin("lin", 3, 2, 1);
  try {
    Tensor bad({2, 4});
    lin.forward(bad);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[T, 3]") != std::string::npos);
    CHECK(msg.find("[2, 4]") != std::string::npos);
  }
}

TEST_CASE("conv1d k3 s2 p1 halves a length-100 input") {
  nn::Conv1d conv("conv", 2, 3, 3, 2, 1, 9);
  Rng rng(2);
  Tensor x = random_tensor({100, 2}, rng);
  Tensor y = conv.forward(x);
  CHECK(y.dim(0) == 50);
  CHECK(y.dim(1) == 3);
}

TEST_CASE("softmax cross-entropy on all-zero logits gives uniform probabilities") {
  nn::CrossEntropy ce;
  Tensor logits({2, 5});
  double loss = ce.forward(logits, {1, 3}, {true, true});
  CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  for (int t = 0; t < 2; ++t) {
    for (int v = 0; v < 5; ++v) CHECK(ce.probs().at(t, v) == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("cross-entropy ignores masked positions exactly") {
  nn::CrossEntropy ce;
  Rng rng(3);
  Tensor logits = random_tensor({3, 4}, rng);
  double base = ce.forward(logits, {0, 1, 2}, {true, false, true});
  double changed = ce.forward(logits, {0, 3, 2}, {true, false, true});
  CHECK(base == changed);
  Tensor g = ce.backward();
  for (int v = 0; v < 4; ++v) CHECK(g.at(1, v) == 0.0);
}

TEST_CASE("every kernel kind passes finite-difference checks over 50 random shapes") {
  Rng rng(20250810);
  int checked = 0;

  auto run_check = [&](std::vector<nn::Parameter*> params, auto&& loss, auto&& loss_grad) {
    auto report = nn::grad_check(params, loss, loss_grad, 1e-6);
    CAPTURE(report.worst_param);
    CAPTURE(report.analytic);
    CAPTURE(report.numeric);
    REQUIRE(report.max_rel_error < 1e-5);
    ++checked;
  };

  for (int trial = 0; trial < 50; ++trial) {
    std::uint64_t seed = rng.next_u64();

    {  // LINEAR
      int in = 1 + static_cast<int>(rng.uniform_int(6));
      int out = 1 + static_cast<int>(rng.uniform_int(6));
      int t = 1 + static_cast<int>(rng.uniform_int(4));
      nn::Linear layer("lin", in, out, seed);
      Tensor x = random_tensor({t, in}, rng);
      QuadLoss q(Tensor({t, out}), rng);
      std::vector<nn::Parameter*> params;
      layer.collect(params);
      run_check(
          params, [&] { return q.value(layer.forward(x)); },
          [&] {
            Tensor y = layer.forward(x);
            layer.backward(q.grad(y));
            return q.value(y);
          });
    }
    {  // CONV1D
      int in = 1 + static_cast<int>(rng.uniform_int(3));
      int out = 1 + static_cast<int>(rng.uniform_int(3));
      int k = 1 + static_cast<int>(rng.uniform_int(4));
      int s = 1 + static_cast<int>(rng.uniform_int(3));
      int p = static_cast<int>(rng.uniform_int(3));
      int t = k + static_cast<int>(rng.uniform_int(6));  // guarantees output rows
      nn::Conv1d layer("conv", in, out, k, s, p, seed);
      Tensor x = random_tensor({t, in}, rng);
      QuadLoss q(Tensor({layer.out_len(t), out}), rng);
      std::vector<nn::Parameter*> params;
      layer.collect(params);
      run_check(
          params, [&] { return q.value(layer.forward(x)); },
          [&] {
            Tensor y = layer.forward(x);
            layer.backward(q.grad(y));
            return q.value(y);
          });
    }
    {  // EMBEDDING (with repeated ids, so grads accumulate)
      int v = 3 + static_cast<int>(rng.uniform_int(6));
      int d = 2 + static_cast<int>(rng.uniform_int(5));
      nn::Embedding layer("emb", v, d, seed);
      std::vector<int> ids;
      for (int i = 0; i < 5; ++i) ids.push_back(static_cast<int>(rng.uniform_int(v)));
      QuadLoss q(Tensor({5, d}), rng);
      std::vector<nn::Parameter*> params;
      layer.collect(params);
      run_check(
          params, [&] { return q.value(layer.forward(ids)); },
          [&] {
            Tensor y = layer.forward(ids);
            layer.backward(q.grad(y));
            return q.value(y);
          });
    }
    {  // LAYERNORM
      int d = 2 + static_cast<int>(rng.uniform_int(7));
      int t = 1 + static_cast<int>(rng.uniform_int(4));
      nn::LayerNorm layer("ln", d, seed);
      // non-trivial gain/bias
      for (int i = 0; i < d; ++i) {
        layer.gain.value[i] = rng.uniform(0.5, 1.5);
        layer.bias.value[i] = rng.uniform(-0.3, 0.3);
      }
      Tensor x = random_tensor({t, d}, rng);
      QuadLoss q(Tensor({t, d}), rng);
      std::vector<nn::Parameter*> params;
      layer.collect(params);
      run_check(
          params, [&] { return q.value(layer.forward(x)); },
          [&] {
            Tensor y = layer.forward(x);
            layer.backward(q.grad(y));
            return q.value(y);
          });
    }
    {  // CAUSAL_ATTENTION
      static const int dims[] = {2, 4, 6, 8};
      int d = dims[rng.uniform_int(4)];
      int heads = (d % 2 == 0 && rng.uniform_int(2) == 0) ? 2 : 1;
      int t = 1 + static_cast<int>(rng.uniform_int(5));
      nn::CausalSelfAttention layer("attn", d, heads, seed);
      Tensor x = random_tensor({t, d}, rng);
      QuadLoss q(Tensor({t, d}), rng);
      std::vector<nn::Parameter*> params;
      layer.collect(params);
      run_check(
          params, [&] { return q.value(layer.forward(x)); },
          [&] {
            Tensor y = layer.forward(x);
            layer.backward(q.grad(y));
            return q.value(y);
          });
    }
    {  // FFN
      int d = 2 + static_cast<int>(rng.uniform_int(5));
      int hidden = 3 + static_cast<int>(rng.uniform_int(6));
      int t = 1 + static_cast<int>(rng.uniform_int(4));
      nn::Ffn layer("ffn", d, hidden, seed);
      Tensor x = random_tensor({t, d}, rng);
      QuadLoss q(Tensor({t, d}), rng);
      std::vector<nn::Parameter*> params;
      layer.collect(params);
      run_check(
          params, [&] { return q.value(layer.forward(x)); },
          [&] {
            Tensor y = layer.forward(x);
            layer.backward(q.grad(y));
            return q.value(y);
          });
    }
    {  // SOFTMAX_CE (logits as the checked parameter)
      int t = 1 + static_cast<int>(rng.uniform_int(3));
      int v = 2 + static_cast<int>(rng.uniform_int(5));
      nn::Parameter logits("logits", random_tensor({t, v}, rng));
      std::vector<int> targets;
      std::vector<bool> mask;
      for (int i = 0; i < t; ++i) {
        targets.push_back(static_cast<int>(rng.uniform_int(v)));
        mask.push_back(rng.uniform_int(4) != 0);
      }
      if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) mask[0] = true;
      nn::CrossEntropy ce;
      run_check(
          {&logits}, [&] { return ce.forward(logits.value, targets, mask); },
          [&] {
            double l = ce.forward(logits.value, targets, mask);
            Tensor g = ce.backward();
            for (std::int64_t i = 0; i < g.numel(); ++i) logits.grad[i] += g[i];
            return l;
          });
    }
  }
  CHECK(checked == 7 * 50);
}

TEST_CASE("grad_check on a quadratic linear model is sharp") {
  nn::Linear lin("lin", 3, 2, 17);
  Rng rng(4);
  Tensor x = random_tensor({2, 3}, rng);
  QuadLoss q(Tensor({2, 2}), rng);
  std::vector<nn::Parameter*> params;
  lin.collect(params);
  auto report = nn::grad_check(
      params, [&] { return q.value(lin.forward(x)); },
      [&] {
        Tensor y = lin.forward(x);
        lin.backward(q.grad(y));
        return q.value(y);
      },
      1e-5);
  CHECK(report.max_rel_error < 1e-8);
}

TEST_CASE("grad_check on an empty model reports zero error") {
  auto report = nn::grad_check(
      {}, [] { return 1.0; }, [] { return 1.0; }, 1e-6);
  CHECK(report.max_rel_error == 0.0);
  CHECK(report.worst_param.empty());
}

TEST_CASE("grad_check guards: parameter budget and non-finite losses") {
  nn::Parameter big("big", Tensor::zeros({101, 100}));
  CHECK_THROWS_AS(nn::grad_check(
                      {&big}, [] { return 0.0; }, [] { return 0.0; }, 1e-6),
                  ValidationError);

  nn::Parameter small("small", Tensor::zeros({2}));
  CHECK_THROWS_AS(nn::grad_check(
                      {&small}, [] { return std::nan(""); }, [] { return std::nan(""); }, 1e-6),
                  RuntimeError);
}

TEST_CASE("sgd: lr zero, freezing, and the single-scalar update") {
  nn::Parameter w("m.w", Tensor({1}, {2.0}));
  w.grad[0] = 0.5;
  nn::sgd_step({&w}, 0.0);
  CHECK(w.value[0] == 2.0);
  CHECK(w.grad[0] == 0.0);  // grads cleared even at lr 0

  w.grad[0] = 0.5;
  w.trainable = false;
  nn::sgd_step({&w}, 0.1);
  CHECK(w.value[0] == 2.0);  // frozen: bit-identical
  CHECK(w.grad[0] == 0.0);

  w.trainable = true;
  w.grad[0] = 0.5;
  nn::sgd_step({&w}, 0.1);
  CHECK(w.value[0] == 2.0 - 0.1 * 0.5);
}

TEST_CASE("initialization is deterministic per (seed, name)") {
  nn::Linear a("same", 4, 4, 42), b("same", 4, 4, 42), c("same", 4, 4, 43), d("other", 4, 4, 42);
  CHECK(bits_equal(a.w.value, b.w.value));
  CHECK(!bits_equal(a.w.value, c.w.value));
  CHECK(!bits_equal(a.w.value, d.w.value));
}

TEST_CASE("transformer causality: late perturbations leave early rows bit-identical") {
  nn::Transformer model("m", 8, 2, 2, 16, 99);
  Rng rng(12);
  Tensor x = random_tensor({6, 8}, rng);
  Tensor base = model.forward(x);
  for (int t0 = 0; t0 < 5; ++t0) {
    Tensor perturbed = x;
    for (int t = t0 + 1; t < 6; ++t) {
      for (int i = 0; i < 8; ++i) perturbed.at(t, i) += rng.uniform(-1, 1);
    }
    Tensor out = model.forward(perturbed);
    for (int t = 0; t <= t0; ++t) {
      for (int i = 0; i < 8; ++i) REQUIRE(out.at(t, i) == base.at(t, i));
    }
  }
}

TEST_CASE("inference session reproduces the full forward bit-exactly") {
  nn::Transformer model("m", 12, 2, 3, 24, 1234);
  Rng rng(77);
  Tensor x = random_tensor({9, 12}, rng);
  Tensor full = model.forward(x);
  nn::InferenceSession session(model);
  for (int t = 0; t < 9; ++t) {
    auto row = session.step(std::span<const double>(x.row(t), 12));
    for (int i = 0; i < 12; ++i) REQUIRE(row[static_cast<std::size_t>(i)] == full.at(t, i));
  }
}

TEST_CASE("checkpoint round-trip is byte-identical") {
  nn::Linear lin("ck.lin", 5, 3, 7);
  nn::LayerNorm ln("ck.ln", 4, 7);
  std::vector<nn::Parameter*> params;
  lin.collect(params);
  ln.collect(params);

  auto tmp = std::filesystem::temp_directory_path() / "s2s_ckpt_test.bin";
  save_checkpoint(tmp.string(), params);
  auto loaded = load_checkpoint(tmp.string());
  REQUIRE(loaded.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(loaded[i].name == params[i]->name);
    CHECK(bits_equal(loaded[i].tensor, params[i]->value));
  }

  // save -> load -> save: identical bytes
  auto tmp2 = std::filesystem::temp_directory_path() / "s2s_ckpt_test2.bin";
  save_checkpoint(tmp2.string(), loaded);
  std::ifstream f1(tmp, std::ios::binary), f2(tmp2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  // strict loading: wrong name set rejected
  nn::Linear other("ck.other", 5, 3, 7);
  std::vector<nn::Parameter*> wrong;
  other.collect(wrong);
  CHECK_THROWS_AS(load_into(loaded, wrong), RuntimeError);

  std::filesystem::remove(tmp);
  std::filesystem::remove(tmp2);
}

TEST_CASE("gelu derivative matches finite differences") {
  for (double x : {-3.0, -1.0, -0.1, 0.0, 0.5, 2.5}) {
    double eps = 1e-6;
    double numeric = (nn::gelu(x + eps) - nn::gelu(x - eps)) / (2 * eps);
    CHECK(nn::gelu_deriv(x) == doctest::Approx(numeric).epsilon(1e-7));
  }
}
