#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "hmm_core.hpp"
#include "test_util.hpp"

using namespace gsyn;
using namespace gsyn::detail;
using tu::Mat;
using tu::Vec;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("logsumexp") {
  Vec one(1);
  one << -3.5;
  CHECK(logsumexp(one) == doctest::Approx(-3.5));

  Vec two(2);
  two << std::log(1.0), std::log(3.0);
  CHECK(logsumexp(two) == doctest::Approx(std::log(4.0)));

  Vec big(2);
  big << 1000.0, 1000.0;  // would overflow a naive exp-sum
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)));

  Vec ninf(3);
  ninf << -kInf, -kInf, -kInf;
  CHECK(logsumexp(ninf) == -kInf);

  Vec mixed(3);
  mixed << -kInf, 2.0, -kInf;
  CHECK(logsumexp(mixed) == doctest::Approx(2.0));
}

TEST_CASE("safe_log clamps at zero") {
  Vec v(3);
  v << 0.5, 0.0, -0.2;
  const Vec lv = safe_log(v);
  CHECK(lv[0] == doctest::Approx(std::log(0.5)));
  CHECK(lv[1] == -kInf);
  CHECK(lv[2] == -kInf);
}

TEST_CASE("forward-backward matches exhaustive enumeration") {
  std::mt19937_64 g(42);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 1 + trial % 3;
    const Eigen::Index t_len = 1 + (trial / 3) % 6;
    const Mat log_obs = tu::random_mat(t_len, n, g, 2.0);
    const Vec log_prior = tu::random_simplex(n, g).array().log();

    // Per-frame transition slices: every frame gets its own matrix.
    std::vector<Mat> slices;
    for (Eigen::Index t = 0; t < t_len; ++t)
      slices.push_back(tu::random_stochastic(n, g).array().log());
    std::vector<const Mat*> log_trans;
    for (const auto& s : slices) log_trans.push_back(&s);

    const auto oracle = tu::enumerate_hmm(log_obs, log_prior, log_trans);
    const FbResult fb = forward_backward(log_obs, log_prior, log_trans);
    CHECK(std::abs(fb.log_evidence - oracle.log_evidence) < 1e-10);
    CHECK(std::abs(forward_evidence(log_obs, log_prior, log_trans) -
                   oracle.log_evidence) < 1e-12);

    const Mat gam = gammas(fb);
    CHECK((gam - oracle.gamma).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index t = 0; t < t_len; ++t)
      CHECK(std::abs(gam.row(t).sum() - 1.0) < 1e-14);

    const auto path = viterbi_path(log_obs, log_prior, log_trans);
    REQUIRE(path.size() == static_cast<size_t>(t_len));
    CHECK(path == oracle.best_path);
  }
}

TEST_CASE("structural zeros propagate without NaN") {
  std::mt19937_64 g(43);
  const Eigen::Index n = 3, t_len = 5;
  const Mat log_obs = tu::random_mat(t_len, n, g);
  Vec prior(3);
  prior << 0.5, 0.5, 0.0;  // state 2 unreachable at t=0
  Mat trans(3, 3);
  trans << 0.9, 0.1, 0.0,  // state 2 unreachable from 0 and 1
      0.2, 0.8, 0.0,       //
      0.3, 0.3, 0.4;
  const Vec log_prior = safe_log(prior);
  const Mat log_tr = safe_log(trans);
  std::vector<const Mat*> log_trans(static_cast<size_t>(t_len), &log_tr);

  const FbResult fb = forward_backward(log_obs, log_prior, log_trans);
  const Mat gam = gammas(fb);
  CHECK(gam.allFinite());
  // State 2 can never be entered, so its posterior mass is exactly zero.
  for (Eigen::Index t = 0; t < t_len; ++t) CHECK(gam(t, 2) == 0.0);

  const auto oracle = tu::enumerate_hmm(log_obs, log_prior, log_trans);
  CHECK((gam - oracle.gamma).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dead-end frame raises a numeric error naming the frame") {
  std::mt19937_64 g(44);
  Mat log_obs = tu::random_mat(4, 2, g);
  log_obs.row(2).setConstant(-kInf);
  Vec log_prior(2);
  log_prior << std::log(0.5), std::log(0.5);
  const Mat log_tr = Mat::Constant(2, 2, std::log(0.5));
  std::vector<const Mat*> log_trans(4, &log_tr);

  CHECK_THROWS_WITH_AS(forward_backward(log_obs, log_prior, log_trans),
                       "inference: no admissible state at frame 2", NumericError);
  CHECK_THROWS_AS(forward_evidence(log_obs, log_prior, log_trans), NumericError);
  CHECK_THROWS_AS(viterbi_path(log_obs, log_prior, log_trans), NumericError);

  Mat dead0 = tu::random_mat(3, 2, g);
  dead0.row(0).setConstant(-kInf);
  std::vector<const Mat*> lt3(3, &log_tr);
  CHECK_THROWS_WITH_AS(forward_backward(dead0, log_prior, lt3),
                       "inference: no admissible state at frame 0", NumericError);
}

TEST_CASE("indicator gammas are one-hot") {
  const Mat g = indicator_gammas({2, 0, 1}, 3);
  REQUIRE(g.rows() == 3);
  CHECK(g(0, 2) == 1.0);
  CHECK(g(1, 0) == 1.0);
  CHECK(g(2, 1) == 1.0);
  CHECK(g.sum() == doctest::Approx(3.0));
  CHECK(g.minCoeff() == 0.0);
}

TEST_CASE("single state chain is certain") {
  std::mt19937_64 g(45);
  const Mat log_obs = tu::random_mat(6, 1, g);
  Vec log_prior(1);
  log_prior << 0.0;
  const Mat log_tr = Mat::Zero(1, 1);
  std::vector<const Mat*> log_trans(6, &log_tr);
  const FbResult fb = forward_backward(log_obs, log_prior, log_trans);
  CHECK(std::abs(fb.log_evidence - log_obs.sum()) < 1e-12);
  const Mat gam = gammas(fb);
  CHECK((gam.array() - 1.0).cwiseAbs().maxCoeff() == 0.0);
}
