#pragma once

#include <utility>
#include <vector>

#include "gsyn/common.hpp"

namespace gsyn {

// Relative ridge added to a covariance diagonal when Cholesky fails.
inline constexpr double kCovRegEps = 1e-6;

struct GaussianParams {
  Vec mean;
  Mat cov;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;  // symmetry within 1e-9, mean/cov shapes agree
};

// Cholesky with an eps*mean(diag) ridge fallback. Throws NumericError if the
// matrix is still not positive definite after regularization.
Eigen::LLT<Mat> robust_llt(const Mat& cov);

// log N(x; mean, cov) through the Cholesky factor; the non-log density is
// never formed.
double gaussian_logpdf(const Vec& x, const GaussianParams& g);

// Factors the covariance once; use inside per-frame loops.
class GaussianEvaluator {
 public:
  explicit GaussianEvaluator(const GaussianParams& g);
  double logpdf(const Vec& x) const;

 private:
  Vec mean_;
  Eigen::LLT<Mat> llt_;
  double log_norm_;  // -0.5 * (d ln 2pi + ln det cov)
};

// KL(P || Q) for multivariate Gaussians, closed form with the log-determinant
// ratio. Clamped at 0 against -eps roundoff.
double kl_gaussian(const GaussianParams& p, const GaussianParams& q);

// Canonical correlations of the column blocks X (n x p) and Y (n x q),
// descending, length min(p, q). Whitened cross-covariance SVD with a ridge on
// the auto-covariance blocks; throws NumericError when a block is rank
// deficient beyond the ridge.
std::vector<double> cca(const Mat& x, const Mat& y, double ridge = 1e-8);

// max_ij |a_ij - b_ij|
double linf_distance(const Mat& a, const Mat& b);

bool is_row_stochastic(const Mat& m, double tol = 1e-9);
bool is_simplex(const Vec& v, double tol = 1e-9);

struct KruskalWallisResult {
  double h;        // tie-corrected statistic
  double p_value;  // chi-square approximation, k-1 dof
};

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Pairwise rank z-tests at the Sidak-corrected level 1-(1-alpha)^(1/m).
// Returns the (i, j) group index pairs whose corrected test rejects.
std::vector<std::pair<int, int>> dunn_sidak_pairs(
    const std::vector<std::vector<double>>& groups, double alpha);

}  // namespace gsyn
