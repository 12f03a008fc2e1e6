#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/gen.hpp"
#include "../support/oracles.hpp"
#include "pecas/errors.hpp"
#include "pecas/gradcheck.hpp"
#include "pecas/layers.hpp"
#include "pecas/rng.hpp"
#include "pecas/tensor.hpp"

using namespace pecas;

TEST_CASE("tensor construction enforces positive dims and matching data") {
  CHECK_THROWS_AS(Tensor({2, 0, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.sum() == doctest::Approx(9.0));
  CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(require_shape(t, {3, 2}, "t"), DimensionError);
}

TEST_CASE("splitmix64 reference outputs") {
  Rng zero(0);
  CHECK(zero.next() == 0xE220A8397B1DCDAFULL);
  Rng r(1234567);
  CHECK(r.next() == 6457827717110365317ULL);
  CHECK(r.next() == 3203168211198807973ULL);
  CHECK(r.next() == 9817491932198370423ULL);
}

TEST_CASE("rng helpers stay in range and shuffle permutes") {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(r.below(7) < 7);
  }
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  Rng s(3);
  shuffle(std::span<int>(w), s);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);

  Rng a(5), b(5);
  CHECK(a.fork(1).next() == b.fork(1).next());
  Rng c(5);
  CHECK(Rng(5).fork(1).next() != c.fork(2).next());
}

TEST_CASE("conv2d hand example") {
  Tensor in({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 2, 2}, 1.0);
  Tensor b({1}, {0.5});
  const Tensor out = conv2d_forward(in, k, b, {});
  CHECK(out.shape() == Shape{1, 2, 2});
  CHECK(out.values() == std::vector<double>{12.5, 16.5, 24.5, 28.5});
}

TEST_CASE("conv2d matches the direct-sum oracle over random geometries") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 1 + rng.below(3), F = 1 + rng.below(3);
    const std::size_t K = 1 + rng.below(3), stride = 1 + rng.below(2), pad = rng.below(2);
    const std::size_t H = K + rng.below(6), W = K + rng.below(6);
    const Tensor in = gen::uniform({C, H, W}, rng);
    const Tensor k = gen::uniform({F, C, K, K}, rng);
    const Tensor b = gen::uniform({F}, rng);
    const Tensor got = conv2d_forward(in, k, b, {stride, pad});
    const Tensor want = oracle::conv2d(in, k, b, stride, pad);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(std::abs(got[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("conv2d rejects mismatched channels") {
  CHECK_THROWS_AS(conv2d_forward(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), {}), DimensionError);
  CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), Tensor({1}), {}), DimensionError);
}

TEST_CASE("maxpool matches the window-scan oracle and breaks ties row-major") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor in = gen::coarse({1 + rng.below(3), 2 * (1 + rng.below(4)), 2 * (1 + rng.below(4))}, rng);
    const Tensor got = maxpool2_forward(in);
    const Tensor want = oracle::maxpool2(in);
    REQUIRE(got == want);
    const auto winners = maxpool2_argmax(in);
    for (std::size_t i = 0; i < winners.size(); ++i) REQUIRE(in[winners[i]] == got[i]);
  }
  Tensor tie({1, 2, 2}, 3.0);
  CHECK(maxpool2_argmax(tie) == std::vector<std::size_t>{0});
  Tensor late({1, 2, 2}, {1.0, 2.0, 2.0, 0.0});
  CHECK(maxpool2_argmax(late) == std::vector<std::size_t>{1});
  const LayerGrad g = maxpool2_backward(late, Tensor({1, 1, 1}, {5.0}));
  CHECK(g.input_grad.values() == std::vector<double>{0.0, 5.0, 0.0, 0.0});
  CHECK_THROWS_AS(maxpool2_forward(Tensor({1, 3, 2})), DimensionError);
}

TEST_CASE("relu subgradient at zero is zero") {
  Tensor in({4}, {-1.0, 0.0, 2.0, 1e-300});
  CHECK(relu_forward(in).values() == std::vector<double>{0.0, 0.0, 2.0, 1e-300});
  const LayerGrad g = relu_backward(in, Tensor({4}, 1.0));
  CHECK(g.input_grad.values() == std::vector<double>{0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("softmax and cross-entropy") {
  const Tensor p = softmax(Tensor({2}, {0.0, std::log(3.0)}));
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
  const CrossEntropy ce = cross_entropy_loss(p, 1);
  CHECK(ce.loss == doctest::Approx(-std::log(0.75 + 1e-12)));
  CHECK(ce.logit_grad[0] == doctest::Approx(0.25));
  CHECK(ce.logit_grad[1] == doctest::Approx(-0.25));

  // Shift invariance and no overflow for large logits.
  const Tensor big = softmax(Tensor({3}, {1000.0, 1001.0, 999.0}));
  const Tensor small = softmax(Tensor({3}, {0.0, 1.0, -1.0}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(big[i] == doctest::Approx(small[i]));
  CHECK(big.sum() == doctest::Approx(1.0));

  // A probability of exactly zero still yields a finite loss.
  CHECK(cross_entropy_loss(Tensor({2}, {1.0, 0.0}), 1).loss == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy_loss(Tensor({2}, {0.5, 0.5}), 2), ArgumentError);
  CHECK_THROWS_AS(softmax(Tensor({2}, {NAN, 0.0})), NumericError);
}

TEST_CASE("softmax rows sum to one on random logits") {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const Tensor p = softmax(gen::uniform({2 + rng.below(5)}, rng, -30.0, 30.0));
    REQUIRE(std::abs(p.sum() - 1.0) < 1e-12);
    for (double v : p.data()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("sgd step") {
  std::vector<Tensor> params{Tensor({2}, {1.0, 2.0})};
  const std::vector<Tensor> grads{Tensor({2}, {0.5, -1.0})};
  sgd_step(params, grads, 0.1);
  CHECK(params[0][0] == doctest::Approx(0.95));
  CHECK(params[0][1] == doctest::Approx(2.1));
  const std::vector<Tensor> wrong{Tensor({3})};
  CHECK_THROWS_AS(sgd_step(params, wrong, 0.1), DimensionError);
}

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("layer gradients agree with central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const ConvGeometry g{1 + rng.below(2), rng.below(2)};
    const Tensor input = gen::uniform({2, 6, 6}, rng);
    const Shape out_shape{3, conv_output_extent(6, 3, g), conv_output_extent(6, 3, g)};
    const Tensor weight = gen::uniform(out_shape, rng);

    Fragment conv;
    conv.params = {gen::uniform({3, 2, 3, 3}, rng), gen::uniform({3}, rng)};
    conv.evaluate = [&](const Tensor& x, std::span<const Tensor> p) {
      return Probe{dot(conv2d_forward(x, p[0], p[1], g), weight), {}};
    };
    conv.gradient = [&](const Tensor& x, std::span<const Tensor> p) {
      LayerGrad lg = conv2d_backward(x, p[0], g, weight);
      return FragmentGradient{lg.input_grad, lg.param_grads};
    };
    REQUIRE(finite_difference_gradcheck(conv, input).max_rel_error < 1e-6);
  }

  const Tensor x = gen::uniform({5}, rng);
  const Tensor up = gen::uniform({3}, rng);
  Fragment dense;
  dense.params = {gen::uniform({3, 5}, rng), gen::uniform({3}, rng)};
  dense.evaluate = [&](const Tensor& in, std::span<const Tensor> p) {
    return Probe{dot(dense_forward(in, p[0], p[1]), up), {}};
  };
  dense.gradient = [&](const Tensor& in, std::span<const Tensor> p) {
    LayerGrad lg = dense_backward(in, p[0], up);
    return FragmentGradient{lg.input_grad, lg.param_grads};
  };
  CHECK(finite_difference_gradcheck(dense, x).max_rel_error < 1e-7);

  const Tensor pool_in = gen::uniform({2, 4, 4}, rng);
  const Tensor pool_up = gen::uniform({2, 2, 2}, rng);
  Fragment pool;
  pool.evaluate = [&](const Tensor& in, std::span<const Tensor>) {
    return Probe{dot(maxpool2_forward(in), pool_up), maxpool2_argmax(in)};
  };
  pool.gradient = [&](const Tensor& in, std::span<const Tensor>) {
    return FragmentGradient{maxpool2_backward(in, pool_up).input_grad, {}};
  };
  CHECK(finite_difference_gradcheck(pool, pool_in).max_rel_error < 1e-7);
}

TEST_CASE("gradcheck flags a wrong gradient and skips kinks") {
  Fragment square;
  square.evaluate = [](const Tensor& x, std::span<const Tensor>) { return Probe{x[0] * x[0], {}}; };
  square.gradient = [](const Tensor& x, std::span<const Tensor>) {
    return FragmentGradient{Tensor({1}, {3.0 * x[0]}), {}};
  };
  CHECK(finite_difference_gradcheck(square, Tensor({1}, {1.0})).max_rel_error == doctest::Approx(1.0 / 3.0));

  Fragment abs_fn;
  abs_fn.evaluate = [](const Tensor& x, std::span<const Tensor>) {
    return Probe{std::abs(x[0]), {x[0] > 0.0 ? 1u : 0u}};
  };
  abs_fn.gradient = [](const Tensor& x, std::span<const Tensor>) {
    return FragmentGradient{Tensor({1}, {x[0] > 0.0 ? 1.0 : -1.0}), {}};
  };
  const GradcheckReport r = finite_difference_gradcheck(abs_fn, Tensor({1}, {1e-6}));
  CHECK(r.skipped_kinks == 1);
  CHECK(r.checked == 0);

  CHECK(gradcheck_relative_error(0.0, 0.0) == 0.0);
  CHECK(gradcheck_relative_error(1e-9, 0.0) == doctest::Approx(0.1));
}
