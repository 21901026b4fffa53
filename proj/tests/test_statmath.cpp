#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "gsyn/statmath.hpp"
#include "test_util.hpp"

using namespace gsyn;
using tu::Mat;
using tu::Vec;

TEST_CASE("gaussian_logpdf known constants") {
  const GaussianParams g1{Vec::Zero(1), Mat::Identity(1, 1)};
  CHECK(gaussian_logpdf(Vec::Zero(1), g1) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  const GaussianParams g2{Vec::Zero(2), Mat::Identity(2, 2)};
  CHECK(gaussian_logpdf(Vec::Zero(2), g2) ==
        doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("gaussian_logpdf matches direct formula, d=3") {
  std::mt19937_64 g(7);
  for (int c = 0; c < 20; ++c) {
    const GaussianParams p = tu::random_gaussian(3, g);
    const Vec x = tu::random_vec(3, g);
    CHECK(std::abs(gaussian_logpdf(x, p) - tu::ref_logpdf(x, p.mean, p.cov)) < 1e-10);
  }
}

TEST_CASE("gaussian_logpdf integrates to one (importance sampling)") {
  std::mt19937_64 g(11);
  for (int d = 1; d <= 3; ++d) {
    const GaussianParams p = tu::random_gaussian(d, g);
    const GaussianParams q{p.mean, 2.0 * p.cov};  // wider proposal
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const Vec z = tu::sample_gaussian(q, g);
      acc += std::exp(gaussian_logpdf(z, p) - tu::ref_logpdf(z, q.mean, q.cov));
    }
    CHECK(acc / n == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("kl_gaussian basics") {
  std::mt19937_64 g(3);
  const GaussianParams p = tu::random_gaussian(3, g);
  CHECK(kl_gaussian(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kl_gaussian(p, p) >= 0.0);

  // 1-D unit variances, means 0 and 1 -> 1/2 (mu-shift term only).
  const GaussianParams a{Vec::Zero(1), Mat::Identity(1, 1)};
  Vec mu1(1);
  mu1 << 1.0;
  const GaussianParams b{mu1, Mat::Identity(1, 1)};
  CHECK(kl_gaussian(a, b) == doctest::Approx(0.5).epsilon(1e-12));

  GaussianParams c = p;
  c.mean[0] += 0.05;
  CHECK(kl_gaussian(p, c) > 1e-9);  // zero only at equality

  const GaussianParams d2 = tu::random_gaussian(2, g);
  CHECK_THROWS_AS(kl_gaussian(p, d2), Error);
}

TEST_CASE("kl_gaussian matches Monte-Carlo oracle") {
  std::mt19937_64 g(19);
  for (int c = 0; c < 5; ++c) {
    const int d = 1 + c % 3;
    const GaussianParams p = tu::random_gaussian(d, g);
    const GaussianParams q = tu::random_gaussian(d, g);
    const Mat pinv = p.cov.inverse();
    const Mat qinv = q.cov.inverse();
    const double plog = std::log(p.cov.determinant());
    const double qlog = std::log(q.cov.determinant());
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const Vec z = tu::sample_gaussian(p, g);
      const Vec rp = z - p.mean;
      const Vec rq = z - q.mean;
      acc += -0.5 * (plog + rp.dot(pinv * rp)) + 0.5 * (qlog + rq.dot(qinv * rq));
    }
    CHECK(std::abs(kl_gaussian(p, q) - acc / n) < 1e-2);
  }
}

TEST_CASE("kl_gaussian nonnegative on random pairs") {
  std::mt19937_64 g(23);
  for (int c = 0; c < 50; ++c) {
    const int d = 1 + c % 4;
    CHECK(kl_gaussian(tu::random_gaussian(d, g), tu::random_gaussian(d, g)) >= 0.0);
  }
}

TEST_CASE("cca self and affine invariance") {
  std::mt19937_64 g(5);
  const Mat x = tu::random_mat(200, 3, g);
  for (double r : cca(x, x)) CHECK(r == doctest::Approx(1.0).epsilon(1e-6));

  Mat a = tu::random_mat(3, 3, g);
  a += 3.0 * Mat::Identity(3, 3);  // keep it invertible
  Mat y = x * a;
  y.rowwise() += tu::random_vec(3, g).transpose();
  for (double r : cca(x, y)) CHECK(r == doctest::Approx(1.0).epsilon(1e-6));

  // Invariance on an unrelated block as well.
  const Mat z = tu::random_mat(200, 2, g);
  const auto base = cca(x, z);
  const auto mapped = cca(x, z * Mat(Mat::Identity(2, 2) * 2.5));
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(base[i] == doctest::Approx(mapped[i]).epsilon(1e-6));
}

TEST_CASE("cca scalar case equals correlation ratio") {
  std::mt19937_64 g(13);
  const Mat x = tu::random_mat(500, 1, g);
  Mat y = 0.6 * x + 0.8 * tu::random_mat(500, 1, g);
  const double rho = cca(x, y).front();

  const Vec xc = x.col(0).array() - x.col(0).mean();
  const Vec yc = y.col(0).array() - y.col(0).mean();
  const double n1 = 499.0;
  const double cxy = xc.dot(yc) / n1;
  const double cxx = xc.dot(xc) / n1;
  const double cyy = yc.dot(yc) / n1;
  // Oracle reproduces the documented ridge on the auto-covariances.
  const double ridge = 1e-8;
  CHECK(rho ==
        doctest::Approx(std::abs(cxy) / std::sqrt((cxx + ridge) * (cyy + ridge)))
            .epsilon(1e-10));
  CHECK(rho == doctest::Approx(std::abs(cxy) / std::sqrt(cxx * cyy)).epsilon(1e-6));
}

TEST_CASE("cca output shape, range, order, preconditions") {
  std::mt19937_64 g(29);
  const Mat x = tu::random_mat(50, 3, g);
  const Mat y = tu::random_mat(50, 2, g);
  const auto r = cca(x, y);
  CHECK(r.size() == 2);
  for (size_t i = 0; i + 1 < r.size(); ++i) CHECK(r[i] >= r[i + 1]);
  for (double v : r) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(cca(tu::random_mat(4, 3, g), tu::random_mat(4, 3, g)), DataError);
  // Constant column: rank deficient beyond the ridge.
  Mat c = x;
  c.col(0).setConstant(2.0);
  c.col(1) = c.col(0);
  c.col(2) = c.col(0);
  CHECK_THROWS_AS(cca(c, y), NumericError);
}

TEST_CASE("linf_distance examples and metric properties") {
  Mat a(2, 2), b(2, 2);
  a << 1, 0, 0, 1;
  b << 0, 1, 1, 0;
  CHECK(linf_distance(a, a) == 0.0);
  CHECK(linf_distance(a, b) == 1.0);
  CHECK_THROWS_AS(linf_distance(a, Mat::Zero(3, 2)), DataError);

  std::mt19937_64 g(31);
  for (int c = 0; c < 200; ++c) {
    const Mat x = tu::random_stochastic(3, g);
    const Mat y = tu::random_stochastic(3, g);
    const Mat z = tu::random_stochastic(3, g);
    CHECK(linf_distance(x, y) == doctest::Approx(linf_distance(y, x)).epsilon(1e-15));
    CHECK(linf_distance(x, x) == 0.0);
    CHECK(linf_distance(x, z) <= linf_distance(x, y) + linf_distance(y, z) + 1e-15);
  }
}

TEST_CASE("kruskal_wallis matches hand formula and handles ties") {
  const std::vector<std::vector<double>> groups{{1, 2, 3}, {4, 5, 6}};
  const auto r = kruskal_wallis(groups);
  // Ranks 1..6, no ties: H = 12/(6*7) * (3*2^2 + 3*5^2) - 3*7.
  const double h_ref = 12.0 / 42.0 * (3.0 * 4.0 + 3.0 * 25.0) - 21.0;
  CHECK(r.h == doctest::Approx(h_ref).epsilon(1e-12));
  CHECK(r.p_value > 0.0);
  CHECK(r.p_value < 1.0);

  const auto tied = kruskal_wallis({{2.0, 2.0, 2.0}, {2.0, 2.0, 2.0}});
  CHECK(tied.h == 0.0);
  CHECK(tied.p_value == 1.0);

  CHECK_THROWS_AS(kruskal_wallis({{1.0, 2.0}}), DataError);
}

TEST_CASE("kruskal_wallis null calibration") {
  std::mt19937_64 g(101);
  std::normal_distribution<double> nd(0.0, 1.0);
  int rejections = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::vector<double>> groups(3);
    for (auto& grp : groups)
      for (int i = 0; i < 100; ++i) grp.push_back(nd(g));
    if (kruskal_wallis(groups).p_value < 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / trials;
  CHECK(rate >= 0.03);
  CHECK(rate <= 0.07);
}

TEST_CASE("dunn_sidak_pairs") {
  std::mt19937_64 g(41);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> a, b, c;
  for (int i = 0; i < 40; ++i) {
    a.push_back(nd(g));
    b.push_back(nd(g));
    c.push_back(nd(g) + 50.0);  // far shift
  }
  CHECK(dunn_sidak_pairs({a, a}, 0.05).empty());

  const auto rejected = dunn_sidak_pairs({a, b, c}, 0.05);
  REQUIRE(rejected.size() == 2);
  for (const auto& [i, j] : rejected) CHECK(j == 2);  // only pairs with group c

  // m = 1: the Sidak level reduces to alpha itself; a clear shift rejects.
  std::vector<double> d;
  for (int i = 0; i < 40; ++i) d.push_back(nd(g) + 3.0);
  CHECK(dunn_sidak_pairs({a, d}, 0.05).size() == 1);
}
