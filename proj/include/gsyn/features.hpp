#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gsyn/common.hpp"

namespace gsyn {

// Raw prosody contour before derivative expansion. Absent f0 entries mark
// unvoiced frames. Ingestion contract: contours arrive already sampled at a
// consistent rate (nominally 60 fps); no waveform processing happens here.
struct ProsodyContour {
  std::vector<std::optional<double>> f0;
  std::vector<double> energy;
  double frame_rate = 60.0;

  void validate() const;
};

// Fills unvoiced gaps: linear interpolation between the nearest voiced
// neighbors, hold at the edges. Throws DataError on an all-unvoiced contour.
ProsodyContour interpolate_unvoiced(const ProsodyContour& contour);

// T x 3 matrix of (value, delta, delta-delta). Central differences with
// one-sided boundaries; requires length >= 3.
Mat expand_derivatives(const std::vector<double>& seq);

// Linear time-axis resampling, boundary hold. Output length
// round(T * to_rate / from_rate). Rows are frames.
Mat resample(const Mat& seq, double from_rate, double to_rate);

// Full pipeline: interpolate f0, expand both contours to (v, d, dd), stack as
// [f0 energy df0 denergy ddf0 ddenergy], resample to out_rate.
Mat build_speech_features(const ProsodyContour& contour, double out_rate = 120.0);

struct NormStats {
  Vec mean;
  Vec std;                     // 1.0 on flat dimensions
  std::vector<int> flat_dims;  // dimensions passed through centered only
};

struct ZNormResult {
  Mat frames;
  std::map<std::string, NormStats> stats;
};

// Per-subject, per-dimension z-normalization with the sample (n-1) standard
// deviation. Each subject needs at least 2 frames. Zero-variance dimensions
// are centered only and flagged.
ZNormResult znorm_per_subject(const Mat& frames, const std::vector<std::string>& subject_ids);

Mat apply_znorm(const Mat& frames, const NormStats& stats);
Mat denormalize(const Mat& frames, const NormStats& stats);

}  // namespace gsyn
