#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "idslab/errors.hpp"
#include "idslab/numerics.hpp"
#include "support.hpp"

using namespace idslab;
using idslab::testing::random_vector;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}
}  // namespace

TEST_CASE("softmax examples") {
  auto p = softmax(vec({0, 0, 0, 0}));
  for (int i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.25));

  p = softmax(vec({std::log(2.0), 0}));
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  p = softmax(vec({1000, 0}));
  CHECK(all_finite(p));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);

  CHECK_THROWS_AS(softmax(Vector()), std::invalid_argument);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 2000; ++t) {
    const auto n = idslab::testing::uniform_int(rng, 1, 40);
    Vector z(static_cast<Eigen::Index>(n));
    for (auto& x : z) x = u(rng);
    const Vector p = softmax(z);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    CHECK((p.array() > 0.0).all());
    CHECK((p.array() <= 1.0).all());
    const Vector q = softmax((z.array() + 17.25).matrix());
    CHECK((p - q).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax agrees with the naive oracle") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    Vector z = random_vector(rng, 7, 3.0);
    auto want = idslab::testing::naive_softmax(std::vector<double>(z.data(), z.data() + z.size()));
    Vector got = softmax(z);
    for (int i = 0; i < 7; ++i) CHECK(got[i] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-13));
  }
}

TEST_CASE("percentile_rank examples") {
  std::vector<double> cache{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(percentile_rank(9.5, cache) == doctest::Approx(90.0));
  std::vector<double> same(7, 3.0);
  CHECK(percentile_rank(3.0, same) == 0.0);
  CHECK(percentile_rank(-4.0, std::vector<double>{}) == 100.0);
  CHECK(percentile_rank(0.0, cache) == 0.0);
  CHECK(percentile_rank(11.0, cache) == 100.0);
}

TEST_CASE("percentile_rank is monotone in the score") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> cache(idslab::testing::uniform_int(rng, 1, 60));
    for (auto& c : cache) c = std::round(g(rng) * 4) / 4;  // force ties
    double prev = -1.0;
    for (double s = -4.0; s <= 4.0; s += 0.125) {
      const double q = percentile_rank(s, cache);
      CHECK(q >= prev);
      CHECK(q >= 0.0);
      CHECK(q <= 100.0);
      prev = q;
    }
  }
}

TEST_CASE("average_ranks handles ties") {
  std::vector<double> v{10, 20, 10, 30};
  auto r = average_ranks(v);
  CHECK(r == std::vector<double>{1.5, 3, 1.5, 4});
}

TEST_CASE("spearman examples") {
  std::vector<double> a{1, 2, 3}, b{10, 20, 30}, c{3, 2, 1};
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  CHECK(spearman(a, c) == doctest::Approx(-1.0));

  std::vector<double> t{1, 1, 2}, u{1, 2, 3};
  const double want = idslab::testing::rank_formula_spearman(t, u);
  CHECK(spearman(t, u) == doctest::Approx(want).epsilon(1e-14));
  // ranks (1.5,1.5,3) vs (1,2,3): frozen value sqrt(3)/2
  CHECK(spearman(t, u) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));

  std::vector<double> k{2, 2, 2}, shorter{1, 2};
  CHECK_THROWS_AS(spearman(k, u), UndefinedCorrelation);
  CHECK_THROWS_AS(spearman(u, k), UndefinedCorrelation);
  CHECK_THROWS_AS(spearman(shorter, u), std::invalid_argument);
  std::vector<double> one{1};
  CHECK_THROWS_AS(spearman(one, one), std::invalid_argument);
}

TEST_CASE("spearman matches the rank-formula oracle and monotone invariance") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  for (int t = 0; t < 300; ++t) {
    const auto n = idslab::testing::uniform_int(rng, 3, 50);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::round(g(rng) * 3);  // ties on purpose
      b[i] = a[i] * 0.5 + g(rng);
    }
    bool constant = std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; });
    if (constant) continue;
    const double rho = spearman(a, b);
    CHECK(rho == doctest::Approx(idslab::testing::rank_formula_spearman(a, b)).epsilon(1e-12));

    std::vector<double> ta(n), tb(n);
    for (std::size_t i = 0; i < n; ++i) {
      ta[i] = std::exp(a[i]);
      tb[i] = b[i] * b[i] * b[i] + 5.0;
    }
    CHECK(spearman(ta, tb) == doctest::Approx(rho).epsilon(1e-12));
    CHECK(spearman(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("pearson basics") {
  std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8.5};
  const double r = pearson(a, b);
  CHECK(r > 0.99);
  CHECK(r <= 1.0);
  std::vector<double> k{1, 1, 1, 1};
  CHECK_THROWS_AS(pearson(a, k), UndefinedCorrelation);
}

TEST_CASE("cosine_similarity examples") {
  CHECK(cosine_similarity(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({-1, 0})) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), std::invalid_argument);
  CHECK_THROWS_AS(cosine_similarity(vec({1, 0, 0}), vec({1, 0})), DimensionError);
}

TEST_CASE("rolling_mean examples") {
  std::vector<double> a{1, 2, 3};
  CHECK(rolling_mean(a, 1) == a);
  std::vector<double> b{1, 2, 3, 4};
  CHECK(rolling_mean(b, 2) == std::vector<double>{1, 1.5, 2.5, 3.5});
  std::vector<double> c(20, 4.25);
  for (double x : rolling_mean(c, 6)) CHECK(x == doctest::Approx(4.25));
  CHECK_THROWS_AS(rolling_mean(a, 0), std::invalid_argument);
  CHECK(rolling_mean(std::vector<double>{}, 3).empty());
}

TEST_CASE("rolling_mean matches a direct window average") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<double> s(300);
  for (auto& x : s) x = g(rng);
  for (std::size_t w : {1u, 2u, 7u, 50u, 400u}) {
    auto got = rolling_mean(s, w);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
      double sum = 0;
      for (std::size_t j = lo; j <= i; ++j) sum += s[j];
      CHECK(got[i] == doctest::Approx(sum / static_cast<double>(i - lo + 1)).epsilon(1e-10));
    }
  }
}

TEST_CASE("jaccard examples and properties") {
  CHECK(jaccard({1, 2, 3}, {2, 3, 4}) == doctest::Approx(0.5));
  CHECK(jaccard({1, 2}, {1, 2}) == 1.0);
  CHECK(jaccard({1, 2}, {3}) == 0.0);
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard({}, {1}) == 0.0);

  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    IdSet a, b;
    const auto na = idslab::testing::uniform_int(rng, 1, 12), nb = idslab::testing::uniform_int(rng, 1, 12);
    for (std::size_t i = 0; i < na; ++i) a.insert(idslab::testing::uniform_int(rng, 0, 15));
    for (std::size_t i = 0; i < nb; ++i) b.insert(idslab::testing::uniform_int(rng, 0, 15));
    CHECK(jaccard(a, b) == jaccard(b, a));
    CHECK((jaccard(a, b) == 1.0) == (a == b));
  }
}

TEST_CASE("argmax and all_finite") {
  CHECK(argmax(vec({1, 3, 3, 2})) == 1);
  CHECK(argmax(vec({-1})) == 0);
  CHECK_THROWS(argmax(Vector()));
  CHECK(all_finite(vec({1, 2})));
  CHECK_FALSE(all_finite(vec({1, std::nan("")})));
  CHECK_FALSE(all_finite(vec({1, HUGE_VAL})));
}
