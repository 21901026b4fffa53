#include "gsyn/features.hpp"

#include <cmath>

namespace gsyn {

void ProsodyContour::validate() const {
  if (f0.size() != energy.size())
    throw DataError("ProsodyContour: f0 and energy lengths differ");
  if (frame_rate <= 0) throw DataError("ProsodyContour: frame_rate must be > 0");
  for (double e : energy)
    if (!(e >= 0) || !std::isfinite(e))
      throw DataError("ProsodyContour: energy must be finite and >= 0");
  for (const auto& v : f0)
    if (v && !std::isfinite(*v)) throw DataError("ProsodyContour: non-finite f0");
}

ProsodyContour interpolate_unvoiced(const ProsodyContour& contour) {
  contour.validate();
  const auto n = contour.f0.size();
  std::vector<size_t> voiced;
  for (size_t i = 0; i < n; ++i)
    if (contour.f0[i]) voiced.push_back(i);
  if (voiced.empty())
    throw DataError("interpolate_unvoiced: contour has no voiced frames");

  ProsodyContour out = contour;
  // leading/trailing holds
  for (size_t i = 0; i < voiced.front(); ++i) out.f0[i] = *contour.f0[voiced.front()];
  for (size_t i = voiced.back() + 1; i < n; ++i) out.f0[i] = *contour.f0[voiced.back()];
  // interior gaps, linear between the surrounding voiced frames
  for (size_t v = 0; v + 1 < voiced.size(); ++v) {
    const size_t a = voiced[v], b = voiced[v + 1];
    const double fa = *contour.f0[a], fb = *contour.f0[b];
    for (size_t i = a + 1; i < b; ++i) {
      const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
      out.f0[i] = fa + t * (fb - fa);
    }
  }
  return out;
}

Mat expand_derivatives(const std::vector<double>& seq) {
  const auto n = seq.size();
  if (n < 3) throw DataError("expand_derivatives: need length >= 3");
  Mat out(static_cast<Eigen::Index>(n), 3);
  for (size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), 0) = seq[i];

  auto central = [n](auto&& col, auto&& src) {
    col(0) = src(1) - src(0);
    for (Eigen::Index t = 1; t + 1 < static_cast<Eigen::Index>(n); ++t)
      col(t) = 0.5 * (src(t + 1) - src(t - 1));
    col(static_cast<Eigen::Index>(n) - 1) =
        src(static_cast<Eigen::Index>(n) - 1) - src(static_cast<Eigen::Index>(n) - 2);
  };
  central(out.col(1), out.col(0));
  central(out.col(2), out.col(1));
  return out;
}

Mat resample(const Mat& seq, double from_rate, double to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw DataError("resample: rates must be > 0");
  if (seq.rows() == 0) throw DataError("resample: empty input");
  const auto t_in = seq.rows();
  const auto t_out = static_cast<Eigen::Index>(
      std::llround(static_cast<double>(t_in) * to_rate / from_rate));
  Mat out(t_out, seq.cols());
  const double step = from_rate / to_rate;
  for (Eigen::Index j = 0; j < t_out; ++j) {
    const double pos = static_cast<double>(j) * step;
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    if (lo >= t_in - 1) {
      out.row(j) = seq.row(t_in - 1);  // boundary hold
    } else {
      const double frac = pos - static_cast<double>(lo);
      out.row(j) = (1.0 - frac) * seq.row(lo) + frac * seq.row(lo + 1);
    }
  }
  return out;
}

Mat build_speech_features(const ProsodyContour& contour, double out_rate) {
  const ProsodyContour filled = interpolate_unvoiced(contour);
  std::vector<double> f0(filled.f0.size());
  for (size_t i = 0; i < f0.size(); ++i) f0[i] = *filled.f0[i];
  const Mat df0 = expand_derivatives(f0);
  const Mat den = expand_derivatives(filled.energy);
  Mat stacked(df0.rows(), 6);
  stacked.col(0) = df0.col(0);
  stacked.col(1) = den.col(0);
  stacked.col(2) = df0.col(1);
  stacked.col(3) = den.col(1);
  stacked.col(4) = df0.col(2);
  stacked.col(5) = den.col(2);
  return resample(stacked, contour.frame_rate, out_rate);
}

ZNormResult znorm_per_subject(const Mat& frames, const std::vector<std::string>& subject_ids) {
  if (frames.rows() != static_cast<Eigen::Index>(subject_ids.size()))
    throw DataError("znorm_per_subject: frame/subject counts differ");
  std::map<std::string, std::vector<Eigen::Index>> rows;
  for (size_t i = 0; i < subject_ids.size(); ++i)
    rows[subject_ids[i]].push_back(static_cast<Eigen::Index>(i));

  ZNormResult result;
  result.frames = frames;
  for (const auto& [subject, idx] : rows) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    if (n < 2) throw DataError("znorm_per_subject: subject '" + subject + "' has < 2 frames");
    Mat block(n, frames.cols());
    for (Eigen::Index r = 0; r < n; ++r) block.row(r) = frames.row(idx[static_cast<size_t>(r)]);

    NormStats stats;
    stats.mean = block.colwise().mean();
    const Mat centered = block.rowwise() - stats.mean.transpose();
    stats.std = (centered.colwise().squaredNorm() / static_cast<double>(n - 1))
                    .cwiseSqrt()
                    .transpose();
    for (Eigen::Index d = 0; d < stats.std.size(); ++d) {
      if (stats.std[d] < 1e-12) {
        stats.std[d] = 1.0;
        stats.flat_dims.push_back(static_cast<int>(d));
      }
    }
    for (Eigen::Index r = 0; r < n; ++r)
      result.frames.row(idx[static_cast<size_t>(r)]) =
          (centered.row(r).transpose().array() / stats.std.array()).transpose();
    result.stats[subject] = std::move(stats);
  }
  return result;
}

Mat apply_znorm(const Mat& frames, const NormStats& stats) {
  if (frames.cols() != stats.mean.size())
    throw DataError("apply_znorm: dimension mismatch");
  return ((frames.rowwise() - stats.mean.transpose()).array().rowwise() /
          stats.std.transpose().array())
      .matrix();
}

Mat denormalize(const Mat& frames, const NormStats& stats) {
  if (frames.cols() != stats.mean.size())
    throw DataError("denormalize: dimension mismatch");
  return ((frames.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() +
          stats.mean.transpose());
}

}  // namespace gsyn
