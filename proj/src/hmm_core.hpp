#pragma once

// Log-space forward-backward / Viterbi core shared by the baseline and the
// constraint-conditioned model. The per-frame transition indirection is what
// lets both models run the exact same arithmetic: the baseline passes T
// pointers to one matrix, the constrained model picks a slice per frame.

#include <cmath>
#include <vector>

#include "gsyn/common.hpp"

namespace gsyn::detail {

double logsumexp(const Eigen::Ref<const Vec>& v);

// Elementwise exp that maps -inf to exactly +0. Eigen's vectorized exp clamps
// its argument to the finite range first, so exp(-inf) comes back as a
// subnormal and structural zeros stop being zero.
template <class Derived>
auto exp0(const Eigen::ArrayBase<Derived>& a) {
  return a.unaryExpr([](double v) { return std::exp(v); });
}

struct FbResult {
  Mat log_alpha;  // T x N
  Mat log_beta;   // T x N
  double log_evidence = 0.0;
};

// log_trans[t] applies entering frame t (t >= 1); log_trans[0] is unused.
// Throws NumericError naming the frame when every state goes to -inf.
FbResult forward_backward(const Mat& log_obs, const Vec& log_prior,
                          const std::vector<const Mat*>& log_trans);

// Forward pass only; returns the log evidence.
double forward_evidence(const Mat& log_obs, const Vec& log_prior,
                        const std::vector<const Mat*>& log_trans);

// Row-normalized state posteriors from a forward-backward result.
Mat gammas(const FbResult& fb);

std::vector<int> viterbi_path(const Mat& log_obs, const Vec& log_prior,
                              const std::vector<const Mat*>& log_trans);

// One-hot gammas from a Viterbi path.
inline Mat indicator_gammas(const std::vector<int>& path, Eigen::Index n) {
  Mat g = Mat::Zero(static_cast<Eigen::Index>(path.size()), n);
  for (size_t t = 0; t < path.size(); ++t)
    g(static_cast<Eigen::Index>(t), path[t]) = 1.0;
  return g;
}

inline Vec safe_log(const Vec& v) {
  return v.array().max(0.0).log().matrix();  // log(0) = -inf by IEEE
}

inline Mat safe_log(const Mat& m) { return m.array().max(0.0).log().matrix(); }

}  // namespace gsyn::detail
