#include "gsyn/statmath.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsyn {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

void GaussianParams::validate() const {
  const int d = dim();
  if (cov.rows() != d || cov.cols() != d)
    throw DataError("GaussianParams: covariance shape does not match mean");
  if (!mean.allFinite() || !cov.allFinite())
    throw DataError("GaussianParams: non-finite entries");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw DataError("GaussianParams: covariance not symmetric within 1e-9");
}

Eigen::LLT<Mat> robust_llt(const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) return llt;
  const double eps = kCovRegEps * cov.diagonal().mean();
  Mat reg = cov;
  reg.diagonal().array() += std::max(eps, 1e-300);
  llt.compute(reg);
  if (llt.info() != Eigen::Success)
    throw NumericError("covariance not positive definite after regularization");
  return llt;
}

namespace {

double log_det_from_llt(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

GaussianEvaluator::GaussianEvaluator(const GaussianParams& g)
    : mean_(g.mean), llt_(robust_llt(g.cov)) {
  log_norm_ = -0.5 * (g.dim() * kLog2Pi + log_det_from_llt(llt_));
}

double GaussianEvaluator::logpdf(const Vec& x) const {
  if (x.size() != mean_.size())
    throw DataError("gaussian_logpdf: dimension mismatch");
  const Vec centered = x - mean_;
  // quadratic form through the factor: || L^-1 (x - mu) ||^2
  const Vec half = llt_.matrixL().solve(centered);
  return log_norm_ - 0.5 * half.squaredNorm();
}

double gaussian_logpdf(const Vec& x, const GaussianParams& g) {
  return GaussianEvaluator(g).logpdf(x);
}

double kl_gaussian(const GaussianParams& p, const GaussianParams& q) {
  const int d = p.dim();
  if (q.dim() != d) throw DataError("kl_gaussian: dimension mismatch");
  const auto llt_q = robust_llt(q.cov);
  const auto llt_p = robust_llt(p.cov);
  const double log_det_ratio = log_det_from_llt(llt_p) - log_det_from_llt(llt_q);
  const double trace_term = llt_q.solve(p.cov).trace();
  const Vec dmu = q.mean - p.mean;
  const double quad = dmu.dot(llt_q.solve(dmu));
  const double kl = 0.5 * (trace_term - log_det_ratio - d + quad);
  return std::max(kl, 0.0);
}

namespace {

// Symmetric inverse square root via eigendecomposition. Throws when the
// spectrum collapses onto the ridge, i.e. the block is rank deficient.
Mat inv_sqrt_spd(const Mat& m, double ridge) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw NumericError("cca: eigensolver failed");
  const Vec& ev = es.eigenvalues();
  if (ev.minCoeff() < 10.0 * ridge)
    throw NumericError("cca: rank-deficient block beyond regularization");
  const Vec inv_sqrt = ev.array().rsqrt();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

std::vector<double> cca(const Mat& x, const Mat& y, double ridge) {
  const auto n = x.rows();
  if (y.rows() != n) throw DataError("cca: row counts differ");
  const auto p = x.cols(), q = y.cols();
  if (n <= std::max(p, q) + 1)
    throw DataError("cca: need more rows than max(p, q) + 1");
  if (!x.allFinite() || !y.allFinite()) throw DataError("cca: non-finite input");

  const Mat xc = x.rowwise() - x.colwise().mean();
  const Mat yc = y.rowwise() - y.colwise().mean();
  const double scale = 1.0 / static_cast<double>(n - 1);
  Mat cxx = scale * xc.transpose() * xc;
  Mat cyy = scale * yc.transpose() * yc;
  const Mat cxy = scale * xc.transpose() * yc;
  cxx.diagonal().array() += ridge;
  cyy.diagonal().array() += ridge;

  const Mat w = inv_sqrt_spd(cxx, ridge) * cxy * inv_sqrt_spd(cyy, ridge);
  Eigen::JacobiSVD<Mat> svd(w);
  const Vec& sv = svd.singularValues();
  std::vector<double> out(static_cast<size_t>(std::min(p, q)));
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = std::clamp(sv[static_cast<Eigen::Index>(i)], 0.0, 1.0);
  return out;
}

double linf_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DataError("linf_distance: shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

bool is_row_stochastic(const Mat& m, double tol) {
  if (m.size() == 0) return false;
  if ((m.array() < -tol).any()) return false;
  return ((m.rowwise().sum().array() - 1.0).abs() <= tol).all();
}

bool is_simplex(const Vec& v, double tol) {
  if (v.size() == 0) return false;
  if ((v.array() < -tol).any()) return false;
  return std::abs(v.sum() - 1.0) <= tol;
}

namespace {

// Midranks of the pooled sample plus the tie-size list.
struct Ranked {
  std::vector<double> ranks;     // aligned with the pooled values
  std::vector<int> group_of;     // group index per pooled value
  std::vector<long> tie_sizes;   // size of each tie run (> 1 only)
  int n = 0;
};

Ranked rank_groups(const std::vector<std::vector<double>>& groups) {
  Ranked r;
  std::vector<std::pair<double, int>> pooled;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw DataError("rank test: empty group");
    for (double v : groups[g]) {
      if (!std::isfinite(v)) throw DataError("rank test: non-finite value");
      pooled.emplace_back(v, static_cast<int>(g));
    }
  }
  r.n = static_cast<int>(pooled.size());
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  r.ranks.resize(pooled.size());
  r.group_of.resize(pooled.size());
  size_t i = 0;
  while (i < pooled.size()) {
    size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      r.ranks[k] = mid;
      r.group_of[k] = pooled[k].second;
    }
    if (j - i > 1) r.tie_sizes.push_back(static_cast<long>(j - i));
    i = j;
  }
  return r;
}

double tie_sum(const std::vector<long>& tie_sizes) {
  double s = 0;
  for (long t : tie_sizes) s += static_cast<double>(t) * t * t - t;
  return s;
}

}  // namespace

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw DataError("kruskal_wallis: need at least 2 groups");
  const Ranked r = rank_groups(groups);
  const double n = r.n;
  if (r.n < 3) throw DataError("kruskal_wallis: need total n >= 3");

  std::vector<double> rank_sum(groups.size(), 0.0);
  std::vector<long> sizes(groups.size(), 0);
  for (size_t i = 0; i < r.ranks.size(); ++i) {
    rank_sum[static_cast<size_t>(r.group_of[i])] += r.ranks[i];
    ++sizes[static_cast<size_t>(r.group_of[i])];
  }
  double h = 0;
  for (size_t g = 0; g < groups.size(); ++g)
    h += rank_sum[g] * rank_sum[g] / static_cast<double>(sizes[g]);
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

  const double ties = tie_sum(r.tie_sizes);
  const double denom = 1.0 - ties / (n * n * n - n);
  if (denom <= 0.0) return {0.0, 1.0};  // every value tied
  h /= denom;
  h = std::max(h, 0.0);

  boost::math::chi_squared chi2(k - 1);
  const double p = boost::math::cdf(boost::math::complement(chi2, h));
  return {h, p};
}

std::vector<std::pair<int, int>> dunn_sidak_pairs(
    const std::vector<std::vector<double>>& groups, double alpha) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw DataError("dunn_sidak_pairs: need at least 2 groups");
  const Ranked r = rank_groups(groups);
  const double n = r.n;
  if (r.n < 3) throw DataError("dunn_sidak_pairs: need total n >= 3");

  std::vector<double> mean_rank(groups.size(), 0.0);
  std::vector<long> sizes(groups.size(), 0);
  for (size_t i = 0; i < r.ranks.size(); ++i) {
    mean_rank[static_cast<size_t>(r.group_of[i])] += r.ranks[i];
    ++sizes[static_cast<size_t>(r.group_of[i])];
  }
  for (size_t g = 0; g < groups.size(); ++g) mean_rank[g] /= static_cast<double>(sizes[g]);

  // Dunn's rank variance with tie correction.
  const double var_base = n * (n + 1.0) / 12.0 - tie_sum(r.tie_sizes) / (12.0 * (n - 1.0));
  const int m = k * (k - 1) / 2;
  const double level = 1.0 - std::pow(1.0 - alpha, 1.0 / m);

  boost::math::normal norm01;
  std::vector<std::pair<int, int>> rejected;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      const double se = std::sqrt(var_base * (1.0 / sizes[static_cast<size_t>(a)] +
                                              1.0 / sizes[static_cast<size_t>(b)]));
      if (se == 0.0) continue;  // all values tied
      const double z =
          std::abs(mean_rank[static_cast<size_t>(a)] - mean_rank[static_cast<size_t>(b)]) / se;
      const double p = 2.0 * boost::math::cdf(boost::math::complement(norm01, z));
      if (p < level) rejected.emplace_back(a, b);
    }
  }
  return rejected;
}

}  // namespace gsyn
