#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "swinqa/grad_check.hpp"
#include "swinqa/ops.hpp"
#include "swinqa/rng.hpp"

using namespace swinqa;
using Td = Tensor<double>;

namespace {

Td random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Td::from(std::move(shape), std::move(v), requires_grad);
}

// Scalar probe: sum(y * w) with fixed random weights, so every output
// coordinate contributes a distinct gradient.
Td probe(const Td& y, std::uint64_t seed = 99) { return sum(mul(y, random_tensor(y.shape(), seed))); }

std::vector<double> triple_loop(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

}  // namespace

TEST(Matmul, IdentityAndHandChecked) {
  auto id = Td::from({2, 2}, {1, 0, 0, 1});
  auto b = Td::from({2, 2}, {3, 4, 5, 6});
  EXPECT_EQ(matmul(id, b).values(), (std::vector<double>{3, 4, 5, 6}));
  auto r = matmul(Td::from({1, 2}, {1, 2}), Td::from({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_EQ(r.item(), 11.0);
}

TEST(Matmul, MatchesTripleLoopOracle) {
  for (auto [m, k, n, seed] : {std::tuple{4ul, 5ul, 3ul, 1ul}, std::tuple{6ul, 7ul, 5ul, 2ul}, std::tuple{6ul, 7ul, 5ul, 3ul}}) {
    auto a = random_tensor({m, k}, seed);
    auto b = random_tensor({k, n}, seed + 100);
    auto expected = triple_loop(a.values(), b.values(), m, k, n);
    auto got = matmul(a, b).values();
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
  }
}

TEST(Matmul, BroadcastsBatchAxes) {
  auto a = random_tensor({3, 2, 4}, 5);
  auto b = random_tensor({4, 3}, 6);
  auto c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{3, 2, 3}));
  for (std::size_t bi = 0; bi < 3; ++bi) {
    std::vector<double> slice(a.values().begin() + bi * 8, a.values().begin() + (bi + 1) * 8);
    auto expected = triple_loop(slice, b.values(), 2, 4, 3);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(c.values()[bi * 6 + i], expected[i], 1e-12);
  }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Td::zeros({2, 3}), Td::zeros({4, 2}));
    FAIL();
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[4,2]"), std::string::npos);
  }
}

TEST(Softmax, SymmetryAndStability) {
  auto y = softmax(Td::from({2}, {0, 0}));
  EXPECT_DOUBLE_EQ(y.values()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.values()[1], 0.5);
  auto s = softmax(Td::from({2}, {1e4, 0}));
  EXPECT_NEAR(s.values()[0], 1.0, 1e-6);
  EXPECT_NEAR(s.values()[1], 0.0, 1e-6);
  auto f = softmax(Tensor<float>::from({2}, {-1e4f, 1e4f}));
  EXPECT_FALSE(std::isnan(f.values()[0]));
  EXPECT_NEAR(f.values()[1], 1.0f, 1e-6f);
}

TEST(Softmax, MatchesExtendedPrecision) {
  auto y = softmax(Td::from({3}, {1, 2, 3}));
  long double denom = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.values()[i], static_cast<double>(std::exp(1.0L + i) / denom), 1e-15);
}

TEST(Softmax, RowsSumToOneOnAnyAxis) {
  auto x = scale(random_tensor({3, 4, 5}, 8), 30.0);
  for (long axis : {0L, 1L, 2L, -1L}) {
    auto y = softmax(x, axis);
    const std::size_t ax = axis < 0 ? 2 : static_cast<std::size_t>(axis);
    const Shape& s = x.shape();
    std::size_t inner = 1;
    for (std::size_t d = ax + 1; d < 3; ++d) inner *= s[d];
    std::size_t outer = 1;
    for (std::size_t d = 0; d < ax; ++d) outer *= s[d];
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        double acc = 0;
        for (std::size_t l = 0; l < s[ax]; ++l) {
          double v = y.values()[(o * s[ax] + l) * inner + i];
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
          acc += v;
        }
        EXPECT_NEAR(acc, 1.0, 1e-6);
      }
  }
}

TEST(LayerNorm, ConstantRowAndTwoPoint) {
  auto g = Td::full({4}, 1.0), b = Td::zeros({4});
  auto flat = layer_norm(Td::full({2, 4}, 3.5), g, b);
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);
  auto y = layer_norm(Td::from({1, 2}, {1, 3}), Td::full({2}, 1.0), Td::zeros({2}), 1e-12);
  EXPECT_NEAR(y.values()[0], -1.0, 1e-9);
  EXPECT_NEAR(y.values()[1], 1.0, 1e-9);
}

TEST(LayerNorm, RowStatistics) {
  auto y = layer_norm(scale(random_tensor({3, 8}, 4), 5.0), Td::full({8}, 1.0), Td::zeros({8}));
  for (std::size_t r = 0; r < 3; ++r) {
    double mu = 0, var = 0;
    for (std::size_t j = 0; j < 8; ++j) mu += y.values()[r * 8 + j];
    mu /= 8;
    for (std::size_t j = 0; j < 8; ++j) var += std::pow(y.values()[r * 8 + j] - mu, 2);
    var /= 8;
    EXPECT_LE(std::abs(mu), 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(LayerNorm, RejectsMismatchedAffine) {
  EXPECT_THROW(layer_norm(Td::zeros({2, 4}), Td::zeros({3}), Td::zeros({4})), DimensionError);
}

TEST(Gelu, ValuesAndAsymptotes) {
  auto y = gelu(Td::from({4}, {0.0, 1.0, 20.0, -20.0}));
  EXPECT_EQ(y.values()[0], 0.0);
  const long double phi1 = 0.5L * (1.0L + std::erf(1.0L / std::sqrt(2.0L)));
  EXPECT_NEAR(y.values()[1], static_cast<double>(phi1), 1e-7);
  EXPECT_NEAR(y.values()[2], 20.0, 1e-9);
  EXPECT_NEAR(y.values()[3], 0.0, 1e-9);
}

TEST(CrossEntropySoft, KnownValues) {
  auto l = cross_entropy_soft(Td::from({1, 2}, {0, 0}), Td::from({1, 2}, {1, 0}));
  EXPECT_NEAR(l.item(), std::log(2.0), 1e-15);
  double prev = 1e9;
  for (double gap : {1.0, 5.0, 20.0, 60.0}) {
    double v = cross_entropy_soft(Td::from({1, 2}, {gap, 0}), Td::from({1, 2}, {1, 0})).item();
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-20);
  // Soft target against long double oracle.
  const long double lse = std::log(std::exp(1.0L) + 1.0L);
  const long double expected = -0.5L * (1.0L - lse) - 0.5L * (0.0L - lse);
  auto s = cross_entropy_soft(Td::from({1, 2}, {1, 0}), Td::from({1, 2}, {0.5, 0.5}));
  EXPECT_NEAR(s.item(), static_cast<double>(expected), 1e-15);
}

TEST(CrossEntropySoft, GradientIsSoftmaxMinusTargetOverBatch) {
  auto z = random_tensor({3, 2}, 12, true);
  auto t = Td::from({3, 2}, {1, 0, 0.3, 0.7, 0.5, 0.5});
  cross_entropy_soft(z, t).backward();
  auto p = softmax(z.detach(), -1);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(z.grad()[i], (p.values()[i] - t.values()[i]) / 3.0, 1e-15);
}

TEST(CrossEntropySoft, RejectsBadRowSum) {
  EXPECT_THROW(cross_entropy_soft(Td::from({1, 2}, {0, 0}), Td::from({1, 2}, {0.6, 0.6})), LabelError);
}

TEST(Backward, AnalyticCases) {
  auto x = Td::from({3}, {1, 2, 3}, true);
  sum(x).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 1, 1}));
  auto y = Td::from({2}, {1, 2}, true);
  sum(mul(y, y)).backward();
  EXPECT_EQ(std::vector<double>(y.grad().begin(), y.grad().end()), (std::vector<double>{2, 4}));
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto x = Td::from({2}, {1, 2}, true);
  auto loss = sum(scale(x, 3.0));
  loss.backward();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 6.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, FanOutSumsPathGradients) {
  auto x = Td::from({2}, {0.5, -1.5}, true);
  auto a = scale(x, 2.0);
  auto b = mul(x, x);
  sum(add(a, b)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 + 2 * 0.5);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0 - 2 * 1.5);
}

TEST(Backward, UnreachableLeafHasNoGradient) {
  auto x = Td::from({2}, {1, 2}, true);
  auto unused = Td::from({2}, {1, 2}, true);
  sum(x).backward();
  EXPECT_FALSE(unused.has_grad());
}

TEST(Backward, RejectsNonScalar) { EXPECT_THROW(Td::from({2}, {1, 2}, true).backward(), DimensionError); }

TEST(Backward, MicroMlpMatchesFiniteDifferences) {
  auto x = random_tensor({4, 3}, 20);
  auto w1 = random_tensor({3, 5}, 21, true), b1 = random_tensor({5}, 22, true);
  auto w2 = random_tensor({5, 2}, 23, true), b2 = random_tensor({2}, 24, true);
  auto t = Td::from({4, 2}, {1, 0, 0, 1, 0.25, 0.75, 1, 0});
  double err = grad_check(
      [&](const std::vector<Td>& p) {
        return cross_entropy_soft(linear(gelu(linear(x, p[0], p[1])), p[2], p[3]), t);
      },
      {w1, b1, w2, b2}, 1e-6);
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, LinearFunctionIsExact) {
  EXPECT_LE(grad_check([](const Td& x) { return sum(x); }, random_tensor({5}, 1), 1e-3), 1e-10);
}

TEST(GradCheck, SoftmaxPickFirst) {
  EXPECT_LT(grad_check([](const Td& x) { return element(softmax(x), 0); }, Td::from({3}, {0.2, -0.4, 1.1})), 1e-6);
}

TEST(GradCheck, RejectsBadStepAndNonScalar) {
  EXPECT_THROW(grad_check([](const Td& x) { return sum(x); }, Td::zeros({2}), 1e-2), std::invalid_argument);
  EXPECT_THROW(grad_check([](const Td& x) { return scale(x, 2.0); }, Td::zeros({2})), DimensionError);
}

// Every primitive passes the central-difference check in double precision.
TEST(GradCheck, EveryPrimitive) {
  struct Case {
    const char* name;
    std::function<Td(const std::vector<Td>&)> f;
    std::vector<Td> in;
  };
  std::vector<Case> cases = {
      {"matmul", [](auto& p) { return probe(matmul(p[0], p[1])); }, {random_tensor({2, 3, 4}, 1), random_tensor({4, 2}, 2)}},
      {"linear", [](auto& p) { return probe(linear(p[0], p[1], p[2])); },
       {random_tensor({2, 3, 4}, 3), random_tensor({4, 5}, 4), random_tensor({5}, 5)}},
      {"add_broadcast", [](auto& p) { return probe(add(p[0], p[1])); }, {random_tensor({2, 3, 4}, 6), random_tensor({3, 1}, 7)}},
      {"mul_broadcast", [](auto& p) { return probe(mul(p[0], p[1])); }, {random_tensor({2, 3, 4}, 8), random_tensor({2, 1, 4}, 9)}},
      {"scale", [](auto& p) { return probe(scale(p[0], -1.7)); }, {random_tensor({5}, 10)}},
      {"mean", [](auto& p) { return mean(mul(p[0], p[0])); }, {random_tensor({4, 2}, 11)}},
      {"mean_axis", [](auto& p) { return probe(mean_axis(p[0], 1)); }, {random_tensor({2, 3, 4}, 12)}},
      {"reshape", [](auto& p) { return probe(reshape(p[0], {4, 6})); }, {random_tensor({2, 3, 4}, 13)}},
      {"permute", [](auto& p) { return probe(permute(p[0], {2, 0, 1})); }, {random_tensor({2, 3, 4}, 14)}},
      {"roll", [](auto& p) { return probe(roll(p[0], 1, -2)); }, {random_tensor({2, 3, 4}, 15)}},
      {"select", [](auto& p) { return probe(select(p[0], 1)); }, {random_tensor({3, 2, 2}, 16)}},
      {"gather_rows", [](auto& p) { return probe(gather_rows(p[0], {2, 0, 2, 1})); }, {random_tensor({3, 2}, 17)}},
      {"softmax", [](auto& p) { return probe(softmax(p[0], 1)); }, {random_tensor({2, 4, 3}, 18)}},
      {"layer_norm", [](auto& p) { return probe(layer_norm(p[0], p[1], p[2])); },
       {random_tensor({3, 6}, 19), random_tensor({6}, 20), random_tensor({6}, 21)}},
      {"gelu", [](auto& p) { return probe(gelu(scale(p[0], 3.0))); }, {random_tensor({7}, 22)}},
      {"cross_entropy_soft", [](auto& p) { return cross_entropy_soft(p[0], Td::from({2, 2}, {0.2, 0.8, 1, 0})); },
       {random_tensor({2, 2}, 23)}},
  };
  for (auto& c : cases) {
    double err = grad_check(c.f, c.in, 1e-6);
    EXPECT_LT(err, 1e-4) << c.name;
  }
}

TEST(Tensor, ShapeValidation) {
  EXPECT_THROW(Td::from({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Td::from({0}, {}), DimensionError);
  EXPECT_THROW(reshape(Td::zeros({2, 3}), {4}), DimensionError);
}

TEST(Tensor, ConstantsRecordNoGraph) {
  auto y = add(Td::zeros({2}), Td::zeros({2}));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->parents.empty());
}
