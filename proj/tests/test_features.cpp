#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <optional>
#include <random>

#include "doctest.h"
#include "gsyn/features.hpp"
#include "test_util.hpp"

using namespace gsyn;
using tu::Mat;
using tu::Vec;

namespace {

ProsodyContour make_contour(std::vector<std::optional<double>> f0,
                            std::vector<double> energy, double rate = 60.0) {
  ProsodyContour c;
  c.f0 = std::move(f0);
  c.energy = std::move(energy);
  c.frame_rate = rate;
  return c;
}

}  // namespace

TEST_CASE("interpolate_unvoiced") {
  const auto all_voiced =
      make_contour({100.0, 105.0, 110.0}, {1.0, 1.0, 1.0});
  const auto same = interpolate_unvoiced(all_voiced);
  for (size_t i = 0; i < 3; ++i)
    CHECK(*same.f0[i] == *all_voiced.f0[i]);

  const auto gap = interpolate_unvoiced(
      make_contour({100.0, std::nullopt, std::nullopt, 130.0}, {1, 1, 1, 1}));
  CHECK(*gap.f0[0] == doctest::Approx(100.0));
  CHECK(*gap.f0[1] == doctest::Approx(110.0));
  CHECK(*gap.f0[2] == doctest::Approx(120.0));
  CHECK(*gap.f0[3] == doctest::Approx(130.0));

  const auto edge =
      interpolate_unvoiced(make_contour({std::nullopt, 90.0, 95.0}, {1, 1, 1}));
  CHECK(*edge.f0[0] == doctest::Approx(90.0));
  CHECK(*edge.f0[1] == doctest::Approx(90.0));
  CHECK(*edge.f0[2] == doctest::Approx(95.0));

  CHECK_THROWS_AS(interpolate_unvoiced(make_contour(
                      {std::nullopt, std::nullopt}, {1, 1})),
                  DataError);

  // Idempotence.
  const auto twice = interpolate_unvoiced(gap);
  for (size_t i = 0; i < 4; ++i) CHECK(*twice.f0[i] == *gap.f0[i]);
}

TEST_CASE("expand_derivatives") {
  const Mat c = expand_derivatives({5.0, 5.0, 5.0, 5.0});
  CHECK(c.rows() == 4);
  CHECK(c.cols() == 3);
  CHECK(c.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.col(2).cwiseAbs().maxCoeff() == 0.0);

  // Ramp with slope 2: interior deltas exactly 2, second derivative 0.
  const Mat ramp = expand_derivatives({0.0, 2.0, 4.0, 6.0, 8.0});
  for (Eigen::Index t = 1; t < 4; ++t) {
    CHECK(ramp(t, 1) == doctest::Approx(2.0));
    CHECK(ramp(t, 2) == doctest::Approx(0.0));
  }

  // Quadratic t^2 at integer samples: central differences give exactly 2t and 2.
  std::vector<double> quad;
  for (int t = 0; t <= 6; ++t) quad.push_back(static_cast<double>(t * t));
  const Mat q = expand_derivatives(quad);
  for (Eigen::Index t = 2; t < 5; ++t) {
    CHECK(q(t, 1) == doctest::Approx(2.0 * static_cast<double>(t)));
    CHECK(q(t, 2) == doctest::Approx(2.0));
  }

  CHECK_THROWS_AS(expand_derivatives({1.0, 2.0}), DataError);
}

TEST_CASE("resample") {
  Mat con(3, 2);
  con << 4, 7, 4, 7, 4, 7;
  const Mat up = resample(con, 60.0, 120.0);
  CHECK(up.rows() == 6);
  for (Eigen::Index t = 0; t < up.rows(); ++t) {
    CHECK(up(t, 0) == doctest::Approx(4.0));
    CHECK(up(t, 1) == doctest::Approx(7.0));
  }

  Mat two(2, 1);
  two << 0, 1;
  const Mat r = resample(two, 60.0, 120.0);
  REQUIRE(r.rows() == 4);
  CHECK(r(0, 0) == doctest::Approx(0.0));
  CHECK(r(1, 0) == doctest::Approx(0.5));
  CHECK(r(2, 0) == doctest::Approx(1.0));
  CHECK(r(3, 0) == doctest::Approx(1.0));  // boundary hold

  std::mt19937_64 g(2);
  const Mat x = tu::random_mat(10, 3, g);
  const Mat same = resample(x, 50.0, 50.0);
  CHECK((same - x).cwiseAbs().maxCoeff() == 0.0);

  // Round trip is exact for linear signals.
  Mat lin(5, 1);
  lin << 0, 1, 2, 3, 4;
  const Mat back = resample(resample(lin, 60.0, 120.0), 120.0, 60.0);
  REQUIRE(back.rows() == 5);
  CHECK((back - lin).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(resample(Mat(0, 2), 60.0, 120.0), DataError);
}

TEST_CASE("znorm_per_subject") {
  Mat frames(2, 1);
  frames << 1, 3;
  const auto r = znorm_per_subject(frames, {"s", "s"});
  // Sample-std convention: std([1,3]) = sqrt(2), so outputs are +-1/sqrt(2).
  CHECK(r.frames(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(r.frames(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));

  // Two subjects with different offsets normalize independently.
  Mat two(6, 2);
  two << 1, 2, 2, 4, 3, 6, 101, 202, 102, 204, 103, 206;
  const auto rr = znorm_per_subject(two, {"a", "a", "a", "b", "b", "b"});
  for (const char* subj : {"a", "b"}) {
    CHECK(rr.stats.count(subj) == 1);
  }
  // Each subject's rows have mean 0 and sample std 1 per dim.
  for (int s = 0; s < 2; ++s) {
    const Mat block = rr.frames.middleRows(3 * s, 3);
    for (Eigen::Index c = 0; c < 2; ++c) {
      CHECK(block.col(c).mean() == doctest::Approx(0.0).epsilon(1e-9));
      const double sd = std::sqrt((block.col(c).array() - block.col(c).mean())
                                      .square()
                                      .sum() /
                                  2.0);
      CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  // Round trip through the returned stats.
  const Mat rec_a = denormalize(rr.frames.topRows(3), rr.stats.at("a"));
  CHECK((rec_a - two.topRows(3)).cwiseAbs().maxCoeff() < 1e-9);

  // Zero-variance dimension: centered only and flagged.
  Mat flat(3, 2);
  flat << 5, 1, 5, 2, 5, 3;
  const auto rf = znorm_per_subject(flat, {"x", "x", "x"});
  CHECK(rf.stats.at("x").flat_dims == std::vector<int>{0});
  CHECK(rf.frames.col(0).cwiseAbs().maxCoeff() == 0.0);  // centered, not scaled

  CHECK_THROWS_AS(znorm_per_subject(frames, {"a", "b"}), DataError);  // < 2 frames
}

TEST_CASE("build_speech_features shape and consistency") {
  ProsodyContour c;
  c.frame_rate = 60.0;
  const int t60 = 30;
  for (int t = 0; t < t60; ++t) {
    c.f0.push_back(120.0 + 10.0 * std::sin(0.2 * t));
    c.energy.push_back(1.0 + 0.3 * std::cos(0.15 * t));
  }
  c.f0[4].reset();
  c.f0[5].reset();
  const Mat f = build_speech_features(c, 120.0);
  CHECK(f.rows() == 2 * t60);
  CHECK(f.cols() == 6);
  CHECK(f.allFinite());

  // Column order: f0, energy, then their first and second derivatives; the
  // energy column at even rows matches the 60 fps contour exactly.
  for (int t = 0; t < t60; ++t)
    CHECK(f(2 * t, 1) == doctest::Approx(c.energy[static_cast<size_t>(t)]));
}
