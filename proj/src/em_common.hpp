// Internal helpers shared by the baseline and constrained EM trainers.
#pragma once

#include <atomic>
#include <cmath>
#include <future>
#include <vector>

#include "gsyn/common.hpp"
#include "gsyn/states.hpp"
#include "gsyn/statmath.hpp"

namespace gsyn::detail {

struct Evaluators {
  std::vector<GaussianEvaluator> speech;
  std::vector<GaussianEvaluator> motion;

  explicit Evaluators(const std::vector<GaussianState>& states) {
    speech.reserve(states.size());
    motion.reserve(states.size());
    for (const auto& s : states) {
      speech.emplace_back(s.speech);
      motion.emplace_back(s.motion);
    }
  }
};

// T x N per-state frame log likelihoods; motion == nullptr gives the partial
// observation probability (speech only).
inline Mat log_obs_matrix(const Evaluators& ev, const Mat& speech, const Mat* motion) {
  const auto t_len = speech.rows();
  const auto n = static_cast<Eigen::Index>(ev.speech.size());
  Mat lo(t_len, n);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Vec sf = speech.row(t).transpose();
    for (Eigen::Index i = 0; i < n; ++i)
      lo(t, i) = ev.speech[static_cast<size_t>(i)].logpdf(sf);
    if (motion) {
      const Vec mf = motion->row(t).transpose();
      for (Eigen::Index i = 0; i < n; ++i)
        lo(t, i) += ev.motion[static_cast<size_t>(i)].logpdf(mf);
    }
  }
  return lo;
}

inline std::vector<const Mat*> constant_slices(const Mat& log_trans, Eigen::Index t_len) {
  return std::vector<const Mat*>(static_cast<size_t>(t_len), &log_trans);
}

// Map per item (possibly in parallel), then reduce in item order so the
// result is independent of the thread count.
template <class Stats, class Make, class PerItem>
Stats ordered_map_reduce(size_t n_items, int threads, Make&& make, PerItem&& per_item) {
  std::vector<Stats> per;
  per.reserve(n_items);
  for (size_t i = 0; i < n_items; ++i) per.push_back(make());
  if (threads <= 1 || n_items <= 1) {
    for (size_t i = 0; i < n_items; ++i) per[i] = per_item(i);
  } else {
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      for (size_t i = cursor.fetch_add(1); i < n_items; i = cursor.fetch_add(1))
        per[i] = per_item(i);
    };
    std::vector<std::future<void>> futures;
    for (int k = 0; k < threads; ++k)
      futures.push_back(std::async(std::launch::async, worker));
    for (auto& f : futures) f.get();
  }
  Stats total = make();
  for (const auto& st : per) total.add(st);
  return total;
}

// Occupancy below this is treated as a starved state.
constexpr double kStarvation = 1e-3;

// Zeroth/first/second weighted moments of the emission data.
struct GaussianMoments {
  Vec gamma_sum;
  Mat speech_m1;
  Mat motion_m1;
  std::vector<Mat> speech_m2;
  std::vector<Mat> motion_m2;

  GaussianMoments(int n, int ds, int dm)
      : gamma_sum(Vec::Zero(n)),
        speech_m1(Mat::Zero(n, ds)),
        motion_m1(Mat::Zero(n, dm)),
        speech_m2(static_cast<size_t>(n), Mat::Zero(ds, ds)),
        motion_m2(static_cast<size_t>(n), Mat::Zero(dm, dm)) {}

  void add(const GaussianMoments& o) {
    gamma_sum += o.gamma_sum;
    speech_m1 += o.speech_m1;
    motion_m1 += o.motion_m1;
    for (size_t i = 0; i < speech_m2.size(); ++i) {
      speech_m2[i] += o.speech_m2[i];
      motion_m2[i] += o.motion_m2[i];
    }
  }

  void accumulate(const Mat& gamma, const Mat& speech, const Mat& motion) {
    gamma_sum += gamma.colwise().sum().transpose();
    speech_m1 += gamma.transpose() * speech;
    motion_m1 += gamma.transpose() * motion;
    for (Eigen::Index i = 0; i < gamma.cols(); ++i) {
      const auto& w = gamma.col(i).array();
      const Mat ws = speech.array().colwise() * w;
      const Mat wm = motion.array().colwise() * w;
      speech_m2[static_cast<size_t>(i)] += speech.transpose() * ws;
      motion_m2[static_cast<size_t>(i)] += motion.transpose() * wm;
    }
  }
};

inline void mstep_gaussian(GaussianParams& g, double weight, const Vec& m1, const Mat& m2) {
  g.mean = m1 / weight;
  Mat cov = m2 / weight - g.mean * g.mean.transpose();
  cov = 0.5 * (cov + cov.transpose());
  if (Eigen::LLT<Mat>(cov).info() != Eigen::Success)
    cov.diagonal().array() += std::max(kCovRegEps * cov.diagonal().mean(), 1e-300);
  g.cov = cov;
}

// Re-estimates every adequately occupied state; starved ones are left to the
// caller's respawn policy.
inline void mstep_all_gaussians(std::vector<GaussianState>& states, const GaussianMoments& mo) {
  for (size_t i = 0; i < states.size(); ++i) {
    const double w = mo.gamma_sum[static_cast<Eigen::Index>(i)];
    if (w < kStarvation) continue;
    mstep_gaussian(states[i].speech, w, mo.speech_m1.row(static_cast<Eigen::Index>(i)).transpose(),
                   mo.speech_m2[i]);
    mstep_gaussian(states[i].motion, w, mo.motion_m1.row(static_cast<Eigen::Index>(i)).transpose(),
                   mo.motion_m2[i]);
  }
}

// Deterministic restart next to a donor state: copy, then shift the mean by a
// tenth of the donor's per-dimension spread.
inline void shift_from_donor(GaussianState& s, const GaussianState& donor) {
  s = donor;
  s.speech.mean += 0.1 * donor.speech.cov.diagonal().cwiseSqrt();
  s.motion.mean += 0.1 * donor.motion.cov.diagonal().cwiseSqrt();
}

}  // namespace gsyn::detail
