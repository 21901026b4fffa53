#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "gsyn/retrieval.hpp"
#include "test_util.hpp"

using namespace gsyn;
using tu::Mat;
using tu::Vec;

namespace {

Mat sine_block(int frames, int dims, int axis, double freq_hz, double amp,
               double fps = 120.0) {
  Mat m = Mat::Zero(frames, dims);
  for (int t = 0; t < frames; ++t)
    m(t, axis) = amp * std::sin(2.0 * M_PI * freq_hz * t / fps);
  return m;
}

Mat vstack(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

// Direct quadratic-time DTAK recomputation with a full table.
double dtak_ref(const Mat& a, const Mat& b, double sigma) {
  const auto n = a.rows(), m = b.rows();
  Mat u(n, m);
  auto kappa = [&](Eigen::Index i, Eigen::Index j) {
    return std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2.0 * sigma * sigma));
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double k = kappa(i, j);
      if (i == 0 && j == 0)
        u(i, j) = 2.0 * k;
      else if (i == 0)
        u(i, j) = u(i, j - 1) + k;
      else if (j == 0)
        u(i, j) = u(i - 1, j) + k;
      else
        u(i, j) = std::max({u(i - 1, j) + k, u(i - 1, j - 1) + 2.0 * k, u(i, j - 1) + k});
    }
  return u(n - 1, m - 1) / static_cast<double>(n + m);
}

}  // namespace

TEST_CASE("nonuniform_downsample") {
  Mat constant = Mat::Constant(20, 3, 2.5);
  CHECK(nonuniform_downsample(constant, 0.5) == std::vector<Eigen::Index>{0, 19});

  Mat stairs(6, 1);
  stairs << 0, 0, 0, 1, 1, 2;
  CHECK(nonuniform_downsample(stairs, 0.5) == std::vector<Eigen::Index>{0, 3, 5});

  std::mt19937_64 g(81);
  const Mat distinct = tu::random_mat(15, 2, g, 5.0);
  const auto all = nonuniform_downsample(distinct, 1e-12);
  CHECK(all.size() == 15);  // every step exceeds a tiny tolerance

  CHECK_THROWS_AS(nonuniform_downsample(Mat(0, 2), 0.5), DataError);
  CHECK_THROWS_AS(nonuniform_downsample(constant, 0.0), DataError);
  CHECK_THROWS_AS(nonuniform_downsample(constant, -1.0), DataError);
}

TEST_CASE("multiscale_windows") {
  std::vector<Eigen::Index> idx;
  for (int i = 0; i < 10; ++i) idx.push_back(3 * i);  // 0,3,...,27
  const auto w = multiscale_windows(idx, {2, 4}, 7);
  CHECK(w.size() == 9 + 7);
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  for (const auto& s : w) {
    CHECK(s.turn == 7);
    CHECK(s.start < s.end);
    CHECK(std::binary_search(idx.begin(), idx.end(), s.start));
    CHECK(std::binary_search(idx.begin(), idx.end(), s.end - 1));
    seen.insert({s.start, s.end});
  }
  CHECK(seen.size() == w.size());  // all windows distinct

  // The scale counts retained samples: scale 2 windows span adjacent
  // retained indices.
  CHECK(w[0].start == 0);
  CHECK(w[0].end == 4);  // second retained index (3) + 1

  CHECK_THROWS_AS(multiscale_windows(idx, {1}, 0), DataError);
  CHECK_THROWS_AS(multiscale_windows(idx, {}, 0), DataError);
  CHECK_THROWS_AS(multiscale_windows({}, {2}, 0), DataError);
  CHECK_THROWS_AS(multiscale_windows({3, 3}, {2}, 0), DataError);
}

TEST_CASE("segment_summary") {
  Mat seg(3, 2);
  seg << 0, 10, 2, 10, 4, 10;
  const Vec f = segment_summary(seg);
  REQUIRE(f.size() == 6);
  CHECK(f[0] == doctest::Approx(2.0));   // mean dim 0
  CHECK(f[1] == doctest::Approx(10.0));  // mean dim 1
  CHECK(f[2] == doctest::Approx(2.0));   // sample std dim 0
  CHECK(f[3] == doctest::Approx(0.0));   // flat dim
  CHECK(f[4] == doctest::Approx(4.0));   // range dim 0
  CHECK(f[5] == doctest::Approx(0.0));
  CHECK_THROWS_AS(segment_summary(Mat(0, 2)), DataError);
}

TEST_CASE("envelope admits exemplars and rejects blow-ups") {
  std::vector<Mat> exemplars;
  for (int i = 0; i < 3; ++i)
    exemplars.push_back(sine_block(60, 2, 0, 2.0 + 0.1 * i, 10.0 + i));
  const GaussianEnvelope env = fit_envelope(exemplars, 3.0);

  for (const auto& e : exemplars) CHECK(env.admits(segment_summary(e)));

  const Mat outlier = sine_block(60, 2, 0, 2.0, 1000.0);  // 100x amplitude
  CHECK(!env.admits(segment_summary(outlier)));

  GaussianEnvelope loose = env;
  loose.radius = 1e12;
  CHECK(loose.admits(segment_summary(outlier)));

  CHECK_THROWS_AS(fit_envelope({}, 3.0), DataError);
}

TEST_CASE("screen keeps admitted windows and checks bounds") {
  std::vector<Mat> exemplars{sine_block(40, 1, 0, 2.0, 10.0)};
  const GaussianEnvelope env = fit_envelope(exemplars, 3.0);
  const Mat traj = vstack(sine_block(40, 1, 0, 2.0, 10.0), Mat::Zero(40, 1));

  Segment in_gesture{0, 0, 40, 0.0, ""};
  Segment in_flat{0, 40, 80, 0.0, ""};
  const auto kept = screen({in_gesture, in_flat}, traj, env);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].start == 0);

  Segment oob{0, 70, 90, 0.0, ""};
  CHECK_THROWS_AS(screen({oob}, traj, env), DataError);
  Segment inverted{0, 30, 30, 0.0, ""};
  CHECK_THROWS_AS(screen({inverted}, traj, env), DataError);
}

TEST_CASE("dtak identities") {
  std::mt19937_64 g(82);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + i % 8, m = 2 + (i / 3) % 8;
    const Mat a = tu::random_mat(n, 3, g, 2.0);
    const Mat b = tu::random_mat(m, 3, g, 2.0);
    const double s = dtak(a, b, 1.5);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(std::abs(dtak(a, a, 1.5) - 1.0) < 1e-9);          // self-similarity
    CHECK(std::abs(s - dtak(b, a, 1.5)) < 1e-12);           // symmetry
    CHECK(std::abs(s - dtak_ref(a, b, 1.5)) < 1e-12);       // full-table oracle
  }

  // One-frame segments reduce to the frame kernel itself.
  Mat x(1, 1), y(1, 1);
  x << 0.0;
  y << 2.0;
  CHECK(dtak(x, x, 1.0) == doctest::Approx(1.0));
  CHECK(dtak(x, y, 1.0) == doctest::Approx(std::exp(-2.0)));

  // Two-frame case against the recurrence written out by hand.
  Mat a2(2, 1), b2(2, 1);
  a2 << 0.0, 1.0;
  b2 << 0.5, 2.0;
  auto kraw = [](double p, double q) { return std::exp(-(p - q) * (p - q) / 2.0); };
  const double u11 = 2.0 * kraw(0.0, 0.5);
  const double u12 = u11 + kraw(0.0, 2.0);
  const double u21 = u11 + kraw(1.0, 0.5);
  const double u22 =
      std::max({u12 + kraw(1.0, 2.0), u11 + 2.0 * kraw(1.0, 2.0), u21 + kraw(1.0, 2.0)});
  CHECK(dtak(a2, b2, 1.0) == doctest::Approx(u22 / 4.0));

  CHECK_THROWS_AS(dtak(Mat(0, 1), x, 1.0), DataError);
  CHECK_THROWS_AS(dtak(x, tu::random_mat(2, 2, g), 1.0), DataError);  // dims
  CHECK_THROWS_AS(dtak(x, y, 0.0), DataError);
}

TEST_CASE("median_frame_distance") {
  Mat e(3, 1);
  e << 0, 1, 3;
  CHECK(median_frame_distance({e}) == doctest::Approx(2.0));  // distances 1,2,3

  Mat same(2, 1);
  same << 5, 5;
  CHECK(median_frame_distance({same}) == doctest::Approx(1.0));  // degenerate fallback

  Mat single(1, 1);
  single << 3;
  CHECK(median_frame_distance({single}) == doctest::Approx(1.0));
}

TEST_CASE("select_thresholds maximizes precision, ties to higher") {
  // Separable: precision 1 is reached at the top score already, and ties
  // along the descending sweep keep the highest threshold.
  std::vector<ScoredCandidate> dev{
      {0, 0.9, true}, {0, 0.8, true}, {0, 0.3, false}, {0, 0.2, false},
      {1, 0.7, true}, {1, 0.6, false},
  };
  const auto thr = select_thresholds(dev);
  CHECK(thr.at(0) == doctest::Approx(0.9));
  CHECK(thr.at(1) == doctest::Approx(0.7));

  // No positives for a subject is an error naming the subject.
  std::vector<ScoredCandidate> bad{{3, 0.5, false}};
  CHECK_THROWS_WITH_AS(select_thresholds(bad),
                       "select_thresholds: subject 3 has no positive dev segment", DataError);
  CHECK_THROWS_AS(select_thresholds({}), DataError);

  // Randomized agreement with an exhaustive oracle over all candidate
  // thresholds (drawn from a small score alphabet to force ties).
  std::mt19937_64 g(83);
  std::uniform_int_distribution<int> score_pick(0, 4);
  std::uniform_int_distribution<int> flag(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredCandidate> cands;
    bool any_pos = false;
    for (int i = 0; i < 30; ++i) {
      ScoredCandidate c;
      c.subject = 0;
      c.score = 0.2 * score_pick(g);
      c.positive = flag(g) == 1;
      any_pos = any_pos || c.positive;
      cands.push_back(c);
    }
    if (!any_pos) cands.push_back({0, 0.2, true});

    double best_prec = -1.0, best_thr = 0.0;
    std::set<double> levels;
    for (const auto& c : cands) levels.insert(c.score);
    for (double theta : levels) {
      long tp = 0, fp = 0;
      for (const auto& c : cands)
        if (c.score >= theta) (c.positive ? tp : fp) += 1;
      if (tp + fp == 0) continue;
      const double prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
      if (prec > best_prec || (prec == best_prec && theta > best_thr)) {
        best_prec = prec;
        best_thr = theta;
      }
    }
    CHECK(select_thresholds(cands).at(0) == doctest::Approx(best_thr));
  }
}

TEST_CASE("retrieval finds planted gestures with high precision") {
  const int flat = 100, block = 72;
  const Mat wave = sine_block(block, 3, 0, 2.0, 10.0);
  const Mat circle = sine_block(block, 3, 1, 2.5, 10.0);
  const Mat pad = Mat::Zero(flat, 3);

  std::vector<RetrievalInput> turns;
  std::vector<GestureTruth> truth;
  for (int i = 0; i < 6; ++i) {
    const Mat& gesture = (i % 2 == 0) ? wave : circle;
    RetrievalInput in;
    in.turn = i;
    in.subject = i % 2;
    in.motion = vstack(vstack(pad, gesture), pad);
    turns.push_back(std::move(in));
    truth.push_back({(i % 2 == 0) ? "wave" : "circle", i, flat, flat + block});
  }

  std::map<std::string, std::vector<Mat>> exemplars;
  exemplars["wave"] = {wave};
  exemplars["circle"] = {circle};

  // Default radius: the envelope screen must reject windows that drag in the
  // flat padding, or they out-score the aligned ones on the sparse timeline.
  RetrievalConfig cfg;
  cfg.tolerance = 0.5;
  // Scale: how many retained samples the planted span produces in situ.
  for (int probe : {0, 1}) {
    int inside = 0;
    for (Eigen::Index t : nonuniform_downsample(turns[static_cast<size_t>(probe)].motion,
                                                cfg.tolerance))
      if (t >= flat && t < flat + block) ++inside;
    cfg.scales.push_back(std::max(2, inside));
  }
  std::sort(cfg.scales.begin(), cfg.scales.end());
  cfg.scales.erase(std::unique(cfg.scales.begin(), cfg.scales.end()), cfg.scales.end());
  cfg.thresholds = {{0, 0.9}, {1, 0.9}};

  const RetrievalResult r = retrieve(turns, exemplars, cfg, &truth);
  REQUIRE(!r.segments.empty());
  CHECK(r.detections.at("wave") >= 3);
  CHECK(r.detections.at("circle") >= 3);
  CHECK(r.precision.at("wave") >= 0.9);
  CHECK(r.precision.at("circle") >= 0.9);
  CHECK(r.overall_precision >= 0.9);

  // Kept detections never overlap each other within a turn.
  for (size_t i = 0; i < r.segments.size(); ++i)
    for (size_t j = i + 1; j < r.segments.size(); ++j) {
      const auto& a = r.segments[i];
      const auto& b = r.segments[j];
      if (a.turn != b.turn) continue;
      CHECK((a.end <= b.start || b.end <= a.start));
    }

  // An impossibly high uniform threshold suppresses every detection.
  RetrievalConfig strict = cfg;
  strict.thresholds = {{0, 2.0}, {1, 2.0}};
  const RetrievalResult none = retrieve(turns, exemplars, strict, &truth);
  CHECK(none.segments.empty());
}

TEST_CASE("retrieval input validation") {
  RetrievalConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  RetrievalConfig bad = cfg;
  bad.scales = {1};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.scales.clear();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.threads = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.radius = -1.0;
  CHECK_THROWS_AS(bad.validate(), DataError);

  std::vector<RetrievalInput> turns(1);
  turns[0].motion = Mat::Zero(10, 1);
  CHECK_THROWS_AS(retrieve(turns, {}, cfg, nullptr), DataError);
  std::map<std::string, std::vector<Mat>> empty_label{{"wave", {}}};
  CHECK_THROWS_AS(retrieve(turns, empty_label, cfg, nullptr), DataError);
}
