#include "hmm_core.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gsyn::detail {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double logsumexp(const Eigen::Ref<const Vec>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf propagates)
  return m + std::log(exp0(v.array() - m).sum());
}

FbResult forward_backward(const Mat& log_obs, const Vec& log_prior,
                          const std::vector<const Mat*>& log_trans) {
  const auto t_len = log_obs.rows();
  const auto n = log_obs.cols();
  FbResult fb;
  fb.log_alpha.resize(t_len, n);
  fb.log_beta.resize(t_len, n);

  fb.log_alpha.row(0) = (log_prior + log_obs.row(0).transpose()).transpose();
  if (logsumexp(fb.log_alpha.row(0)) == kNegInf)
    throw NumericError("inference: no admissible state at frame 0");
  Vec scratch(n);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const Mat& lt = *log_trans[static_cast<size_t>(t)];
    const Vec prev = fb.log_alpha.row(t - 1).transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      scratch = prev + lt.col(j);
      fb.log_alpha(t, j) = logsumexp(scratch) + log_obs(t, j);
    }
    if (logsumexp(fb.log_alpha.row(t)) == kNegInf)
      throw NumericError("inference: no admissible state at frame " + std::to_string(t));
  }
  fb.log_evidence = logsumexp(fb.log_alpha.row(t_len - 1));

  fb.log_beta.row(t_len - 1).setZero();
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const Mat& lt = *log_trans[static_cast<size_t>(t + 1)];
    const Vec next = (log_obs.row(t + 1) + fb.log_beta.row(t + 1)).transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      scratch = lt.row(i).transpose() + next;
      fb.log_beta(t, i) = logsumexp(scratch);
    }
  }
  return fb;
}

double forward_evidence(const Mat& log_obs, const Vec& log_prior,
                        const std::vector<const Mat*>& log_trans) {
  const auto t_len = log_obs.rows();
  const auto n = log_obs.cols();
  Vec alpha = log_prior + log_obs.row(0).transpose();
  if (logsumexp(alpha) == kNegInf)
    throw NumericError("inference: no admissible state at frame 0");
  Vec next(n), scratch(n);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const Mat& lt = *log_trans[static_cast<size_t>(t)];
    for (Eigen::Index j = 0; j < n; ++j) {
      scratch = alpha + lt.col(j);
      next[j] = logsumexp(scratch) + log_obs(t, j);
    }
    alpha = next;
    if (logsumexp(alpha) == kNegInf)
      throw NumericError("inference: no admissible state at frame " + std::to_string(t));
  }
  return logsumexp(alpha);
}

Mat gammas(const FbResult& fb) {
  const auto t_len = fb.log_alpha.rows();
  const auto n = fb.log_alpha.cols();
  Mat g(t_len, n);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Vec row = (fb.log_alpha.row(t) + fb.log_beta.row(t)).transpose();
    const double z = logsumexp(row);
    g.row(t) = exp0(row.array() - z).transpose();
    g.row(t) /= g.row(t).sum();  // absorb roundoff so rows sum to 1 exactly
  }
  return g;
}

std::vector<int> viterbi_path(const Mat& log_obs, const Vec& log_prior,
                              const std::vector<const Mat*>& log_trans) {
  const auto t_len = log_obs.rows();
  const auto n = log_obs.cols();
  Mat delta(t_len, n);
  Eigen::MatrixXi psi(t_len, n);
  delta.row(0) = (log_prior + log_obs.row(0).transpose()).transpose();
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const Mat& lt = *log_trans[static_cast<size_t>(t)];
    for (Eigen::Index j = 0; j < n; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = delta(t - 1, i) + lt(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      delta(t, j) = best + log_obs(t, j);
      psi(t, j) = arg;
    }
    if (delta.row(t).maxCoeff() == kNegInf)
      throw NumericError("viterbi: no admissible state at frame " + std::to_string(t));
  }
  std::vector<int> path(static_cast<size_t>(t_len));
  Eigen::Index arg = 0;
  delta.row(t_len - 1).maxCoeff(&arg);
  path.back() = static_cast<int>(arg);
  for (Eigen::Index t = t_len - 1; t > 0; --t)
    path[static_cast<size_t>(t - 1)] = psi(t, path[static_cast<size_t>(t)]);
  return path;
}

}  // namespace gsyn::detail
