#include "gsyn/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <future>

namespace gsyn {

std::vector<Eigen::Index> nonuniform_downsample(const Mat& traj, double tolerance) {
  if (traj.rows() == 0) throw DataError("nonuniform_downsample: empty trajectory");
  if (!(tolerance > 0)) throw DataError("nonuniform_downsample: tolerance must be positive");
  std::vector<Eigen::Index> keep{0};
  for (Eigen::Index t = 1; t < traj.rows(); ++t)
    if ((traj.row(t) - traj.row(keep.back())).norm() > tolerance) keep.push_back(t);
  if (keep.back() != traj.rows() - 1) keep.push_back(traj.rows() - 1);
  return keep;
}

std::vector<Segment> multiscale_windows(const std::vector<Eigen::Index>& indices,
                                        const std::vector<int>& scales, int turn) {
  if (indices.empty()) throw DataError("multiscale_windows: no retained indices");
  for (size_t i = 1; i < indices.size(); ++i)
    if (indices[i] <= indices[i - 1])
      throw DataError("multiscale_windows: indices must be strictly increasing");
  if (scales.empty()) throw DataError("multiscale_windows: no scales");
  std::vector<Segment> out;
  const auto l = static_cast<long>(indices.size());
  for (int s : scales) {
    if (s < 2) throw DataError("multiscale_windows: scales must be >= 2");
    for (long p = 0; p + s <= l; ++p) {
      Segment seg;
      seg.turn = turn;
      seg.start = indices[static_cast<size_t>(p)];
      seg.end = indices[static_cast<size_t>(p + s - 1)] + 1;
      out.push_back(std::move(seg));
    }
  }
  return out;
}

Vec segment_summary(const Mat& frames) {
  if (frames.rows() == 0) throw DataError("segment_summary: empty segment");
  const auto d = frames.cols();
  Vec f(3 * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = frames.col(j);
    const double mean = col.mean();
    double sd = 0.0;
    if (frames.rows() >= 2)
      sd = std::sqrt((col.array() - mean).square().sum() /
                     static_cast<double>(frames.rows() - 1));
    f[j] = mean;
    f[d + j] = sd;
    f[2 * d + j] = col.maxCoeff() - col.minCoeff();
  }
  return f;
}

double GaussianEnvelope::distance(const Vec& features) const {
  if (features.size() != mean.size())
    throw DataError("GaussianEnvelope: feature size mismatch");
  const Vec z = ((features - mean).array() / std.array()).matrix();
  return std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
}

GaussianEnvelope fit_envelope(const std::vector<Mat>& exemplars, double radius) {
  if (exemplars.empty()) throw DataError("fit_envelope: need at least one exemplar");
  std::vector<Vec> feats;
  feats.reserve(exemplars.size());
  for (const auto& e : exemplars) feats.push_back(segment_summary(e));
  const auto fd = feats.front().size();
  for (const auto& f : feats)
    if (f.size() != fd) throw DataError("fit_envelope: exemplar dimensions differ");

  GaussianEnvelope env;
  env.radius = radius;
  env.mean = Vec::Zero(fd);
  for (const auto& f : feats) env.mean += f;
  env.mean /= static_cast<double>(feats.size());
  env.std = Vec::Zero(fd);
  if (feats.size() >= 2) {
    for (const auto& f : feats) env.std += (f - env.mean).cwiseAbs2();
    env.std = (env.std / static_cast<double>(feats.size() - 1)).cwiseSqrt();
  }
  // Floor keeps near-constant features from rejecting benign jitter while a
  // 100x range blow-up still lands far outside.
  for (Eigen::Index i = 0; i < fd; ++i)
    env.std[i] = std::max({env.std[i], 1e-8, 0.05 * std::abs(env.mean[i])});
  return env;
}

std::vector<Segment> screen(const std::vector<Segment>& candidates, const Mat& traj,
                            const GaussianEnvelope& envelope) {
  std::vector<Segment> out;
  for (const auto& c : candidates) {
    if (c.start < 0 || c.end > traj.rows() || c.start >= c.end)
      throw DataError("screen: segment out of trajectory bounds");
    if (envelope.admits(segment_summary(traj.middleRows(c.start, c.end - c.start))))
      out.push_back(c);
  }
  return out;
}

double dtak(const Mat& a, const Mat& b, double sigma) {
  if (a.rows() == 0 || b.rows() == 0) throw DataError("dtak: empty segment");
  if (a.cols() != b.cols()) throw DataError("dtak: dimension mismatch");
  if (!(sigma > 0)) throw DataError("dtak: sigma must be positive");
  const auto n = a.rows(), m = b.rows();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const auto kappa = [&](Eigen::Index i, Eigen::Index j) {
    return std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  };
  Vec prev(m), cur(m);
  prev[0] = 2.0 * kappa(0, 0);
  for (Eigen::Index j = 1; j < m; ++j) prev[j] = prev[j - 1] + kappa(0, j);
  for (Eigen::Index i = 1; i < n; ++i) {
    cur[0] = prev[0] + kappa(i, 0);
    for (Eigen::Index j = 1; j < m; ++j) {
      const double k = kappa(i, j);
      cur[j] = std::max({prev[j] + k, prev[j - 1] + 2.0 * k, cur[j - 1] + k});
    }
    std::swap(prev, cur);
  }
  return prev[m - 1] / static_cast<double>(n + m);
}

double median_frame_distance(const std::vector<Mat>& exemplars) {
  std::vector<Vec> frames;
  for (const auto& e : exemplars)
    for (Eigen::Index t = 0; t < e.rows(); ++t) frames.push_back(e.row(t).transpose());
  if (frames.size() < 2) return 1.0;
  std::vector<double> d;
  d.reserve(frames.size() * (frames.size() - 1) / 2);
  for (size_t i = 0; i < frames.size(); ++i)
    for (size_t j = i + 1; j < frames.size(); ++j) d.push_back((frames[i] - frames[j]).norm());
  const auto mid = d.begin() + static_cast<long>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (*mid > 0) return *mid;
  double sum = 0;
  size_t n_pos = 0;
  for (double x : d)
    if (x > 0) {
      sum += x;
      ++n_pos;
    }
  return n_pos ? sum / static_cast<double>(n_pos) : 1.0;
}

std::map<int, double> select_thresholds(const std::vector<ScoredCandidate>& dev) {
  if (dev.empty()) throw DataError("select_thresholds: empty dev set");
  std::map<int, std::vector<ScoredCandidate>> by_subject;
  for (const auto& c : dev) by_subject[c.subject].push_back(c);

  std::map<int, double> out;
  for (auto& [subject, cands] : by_subject) {
    bool any_pos = false;
    for (const auto& c : cands) any_pos = any_pos || c.positive;
    if (!any_pos)
      throw DataError("select_thresholds: subject " + std::to_string(subject) +
                      " has no positive dev segment");
    std::sort(cands.begin(), cands.end(),
              [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.score > b.score; });
    double best_prec = -1.0, best_thr = 0.0;
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < cands.size()) {
      const double s = cands[i].score;
      for (; i < cands.size() && cands[i].score == s; ++i)
        (cands[i].positive ? tp : fp) += 1;
      const double prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
      // Descending sweep: the first maximum is the highest qualifying threshold.
      if (prec > best_prec) {
        best_prec = prec;
        best_thr = s;
      }
    }
    out[subject] = best_thr;
  }
  return out;
}

void RetrievalConfig::validate() const {
  if (scales.empty()) throw DataError("RetrievalConfig: no scales");
  for (int s : scales)
    if (s < 2) throw DataError("RetrievalConfig: scales must be >= 2");
  if (!(tolerance > 0)) throw DataError("RetrievalConfig: tolerance must be positive");
  if (radius < 0) throw DataError("RetrievalConfig: negative screen radius");
  if (threads < 1) throw DataError("RetrievalConfig: need at least one thread");
}

namespace {

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> cursor{0};
  auto worker = [&] {
    for (size_t i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) fn(i);
  };
  std::vector<std::future<void>> futures;
  for (int k = 0; k < threads; ++k) futures.push_back(std::async(std::launch::async, worker));
  for (auto& f : futures) f.get();
}

Mat rows_at(const Mat& traj, const std::vector<Eigen::Index>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), traj.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = traj.row(idx[i]);
  return out;
}

bool overlaps(const Segment& a, const Segment& b) {
  return a.turn == b.turn && a.start < b.end && b.start < a.end;
}

}  // namespace

RetrievalResult retrieve(const std::vector<RetrievalInput>& turns,
                         const std::map<std::string, std::vector<Mat>>& exemplars,
                         const RetrievalConfig& config,
                         const std::vector<GestureTruth>* truth) {
  config.validate();
  if (exemplars.empty()) throw DataError("retrieve: no exemplars");
  for (const auto& [label, exs] : exemplars)
    if (exs.empty()) throw DataError("retrieve: gesture '" + label + "' has no exemplars");

  double sigma = config.sigma;
  if (sigma <= 0) {
    std::vector<Mat> all;
    for (const auto& [label, exs] : exemplars) all.insert(all.end(), exs.begin(), exs.end());
    sigma = std::max(median_frame_distance(all), 1e-6);
  }

  struct GestureModel {
    std::string label;
    GaussianEnvelope env;
    std::vector<Mat> ds_exemplars;  // DTAK runs on the downsampled timeline
  };
  std::vector<GestureModel> gestures;
  for (const auto& [label, exs] : exemplars) {
    GestureModel g;
    g.label = label;
    g.env = fit_envelope(exs, config.radius);
    for (const auto& e : exs) g.ds_exemplars.push_back(rows_at(e, nonuniform_downsample(e, config.tolerance)));
    gestures.push_back(std::move(g));
  }

  std::vector<Segment> surviving;
  for (const auto& turn : turns) {
    if (turn.motion.rows() == 0) throw DataError("retrieve: empty turn motion");
    const auto idx = nonuniform_downsample(turn.motion, config.tolerance);
    const auto cands = multiscale_windows(idx, config.scales, turn.turn);
    if (cands.empty()) continue;
    const Mat ds = rows_at(turn.motion, idx);

    std::vector<Vec> summaries(cands.size());
    for (size_t c = 0; c < cands.size(); ++c)
      summaries[c] =
          segment_summary(turn.motion.middleRows(cands[c].start, cands[c].end - cands[c].start));

    const auto thr_it = config.thresholds.find(turn.subject);
    for (const auto& g : gestures) {
      std::vector<size_t> admitted;
      for (size_t c = 0; c < cands.size(); ++c)
        if (g.env.admits(summaries[c])) admitted.push_back(c);

      std::vector<double> scores(admitted.size(), 0.0);
      parallel_for(admitted.size(), config.threads, [&](size_t a) {
        const auto& seg = cands[admitted[a]];
        // Downsampled span of this candidate.
        const auto lo = std::lower_bound(idx.begin(), idx.end(), seg.start) - idx.begin();
        const auto hi = std::lower_bound(idx.begin(), idx.end(), seg.end) - idx.begin();
        const Mat span = ds.middleRows(lo, hi - lo);
        double best = 0.0;
        for (const auto& ex : g.ds_exemplars) best = std::max(best, dtak(span, ex, sigma));
        scores[a] = best;
      });

      for (size_t a = 0; a < admitted.size(); ++a) {
        if (thr_it != config.thresholds.end() && scores[a] < thr_it->second) continue;
        Segment seg = cands[admitted[a]];
        seg.score = scores[a];
        seg.label = g.label;
        surviving.push_back(std::move(seg));
      }
    }
  }

  // Overlap removal: best score wins, deterministic tie-break.
  std::sort(surviving.begin(), surviving.end(), [](const Segment& a, const Segment& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.turn != b.turn) return a.turn < b.turn;
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.label < b.label;
  });
  RetrievalResult result;
  for (const auto& c : surviving) {
    bool blocked = false;
    for (const auto& kept : result.segments)
      if (overlaps(c, kept)) {
        blocked = true;
        break;
      }
    if (!blocked) result.segments.push_back(c);
  }

  for (const auto& seg : result.segments) result.detections[seg.label] += 1;
  if (truth) {
    std::map<std::string, long> total, correct;
    for (const auto& seg : result.segments) {
      total[seg.label] += 1;
      for (const auto& t : *truth) {
        if (t.label != seg.label || t.turn != seg.turn) continue;
        const auto inter =
            std::min(seg.end, t.end) - std::max(seg.start, t.start);
        if (2 * inter >= seg.end - seg.start) {
          correct[seg.label] += 1;
          break;
        }
      }
    }
    long all_total = 0, all_correct = 0;
    for (const auto& [label, n] : total) {
      result.precision[label] =
          static_cast<double>(correct[label]) / static_cast<double>(n);
      all_total += n;
      all_correct += correct[label];
    }
    if (all_total > 0)
      result.overall_precision =
          static_cast<double>(all_correct) / static_cast<double>(all_total);
  }
  return result;
}

}  // namespace gsyn
