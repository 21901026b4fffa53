#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gsyn/states.hpp"

namespace gsyn {

// Joint speech-motion model: one discrete hidden state with conditionally
// independent Gaussian emissions per modality, ergodic first-order
// transitions.
struct DbnModel {
  std::vector<GaussianState> states;
  Mat trans;  // N x N row-stochastic
  Vec prior;  // N simplex

  int n_states() const { return static_cast<int>(states.size()); }
  int speech_dim() const { return states.empty() ? 0 : states[0].speech.dim(); }
  int motion_dim() const { return states.empty() ? 0 : states[0].motion.dim(); }
  void validate() const;
};

// Smoothed: forward-backward posteriors. Viterbi: indicator rows on the
// max-probability path.
enum class GammaMode { kSmoothed, kViterbi };

enum class ObsMode { kFull, kPartial };

struct Sequence {
  Mat speech;  // T x d_s
  Mat motion;  // T x d_m
};

// Full (speech + motion) or partial (speech only, motion == nullptr)
// observation log probability of one frame under state i.
double obs_logprob(const DbnModel& model, const Vec& speech, const Vec* motion, int state);

// State posteriors given the speech sequence only (partial observations).
// T x N; smoothed rows sum to 1, viterbi rows are indicators.
Mat posterior_gamma(const DbnModel& model, const Mat& speech,
                    GammaMode mode = GammaMode::kSmoothed);

struct EmOptions {
  int max_iter = 50;
  double tol = 1e-6;
  int threads = 1;
  bool freeze_gaussians = false;
  std::function<void(const std::string&)> warn;  // starvation notices etc.
};

struct EmResult {
  DbnModel model;
  std::vector<double> llr_history;  // log evidence per frame, one entry per iteration
  Vec occupancy;                    // final per-state gamma mass
  int respawns = 0;
};

// Baum-Welch on full observations, full covariances, log-space throughout.
EmResult em_train(const DbnModel& init, const std::vector<Sequence>& seqs,
                  const EmOptions& opts = {});

// Expected-value trajectory: motion_t = sum_i gamma_t(i) * motion_mean_i,
// conditioning on the whole utterance.
Mat synthesize(const DbnModel& model, const Mat& speech, GammaMode mode = GammaMode::kSmoothed);

// Total forward log evidence divided by total frame count.
double loglik_rate(const DbnModel& model, const std::vector<Sequence>& seqs, ObsMode obs);

}  // namespace gsyn
