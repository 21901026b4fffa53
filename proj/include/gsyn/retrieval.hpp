// Exemplar-based retrieval of prototypical gesture segments: nonuniform
// downsampling, multi-scale candidate windows, an envelope screen, DTAK
// scoring, and precision-maximizing per-subject thresholds.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "gsyn/common.hpp"

namespace gsyn {

struct Segment {
  int turn = 0;
  Eigen::Index start = 0;  // inclusive frame index
  Eigen::Index end = 0;    // exclusive
  double score = 0.0;      // DTAK similarity in [0, 1]
  std::string label;
};

// Greedy cluster walk: keep a frame once it moves more than `tolerance` from
// the last kept frame. First and last frames always kept.
std::vector<Eigen::Index> nonuniform_downsample(const Mat& traj, double tolerance);

// Sliding windows over the downsampled timeline; `scales` count downsampled
// steps, segment bounds map back to original frames.
std::vector<Segment> multiscale_windows(const std::vector<Eigen::Index>& indices,
                                        const std::vector<int>& scales, int turn = 0);

// Per-dimension mean, std, range of a span of frames.
Vec segment_summary(const Mat& frames);

// Cheap candidate pruning stands in for the one-class SVM; pluggable: anything
// that maps a summary vector to keep/drop fits behind this interface.
struct GaussianEnvelope {
  Vec mean;
  Vec std;
  double radius = 3.0;

  // Dimension-normalized Mahalanobis distance (RMS z-score).
  double distance(const Vec& features) const;
  bool admits(const Vec& features) const { return distance(features) <= radius; }
};

GaussianEnvelope fit_envelope(const std::vector<Mat>& exemplars, double radius = 3.0);

std::vector<Segment> screen(const std::vector<Segment>& candidates, const Mat& traj,
                            const GaussianEnvelope& envelope);

// Dynamic time alignment kernel similarity in [0, 1]; 1 iff a perfect-kernel
// alignment path exists (in particular dtak(a, a) == 1).
double dtak(const Mat& a, const Mat& b, double sigma);

// Median heuristic for the DTAK bandwidth: median pairwise distance over all
// exemplar frames pooled.
double median_frame_distance(const std::vector<Mat>& exemplars);

struct ScoredCandidate {
  int subject = 0;
  double score = 0.0;
  bool positive = false;
};

// Per subject, the score threshold maximizing precision on the dev set; ties
// go to the higher threshold (fewer retrievals).
std::map<int, double> select_thresholds(const std::vector<ScoredCandidate>& dev);

struct RetrievalConfig {
  std::vector<int> scales{30, 60, 90, 120};  // in downsampled steps
  double tolerance = 0.5;                    // on normalized motion features
  double sigma = 0.0;                        // <= 0: median heuristic
  double radius = 3.0;
  std::map<int, double> thresholds;  // per subject; subjects absent keep everything
  int threads = 1;

  void validate() const;
};

struct RetrievalInput {
  int turn = 0;
  int subject = 0;
  Mat motion;
};

struct GestureTruth {
  std::string label;
  int turn = 0;
  Eigen::Index start = 0;
  Eigen::Index end = 0;
};

struct RetrievalResult {
  std::vector<Segment> segments;              // non-overlapping, scored, labeled
  std::map<std::string, double> precision;    // per gesture, when truth given
  std::map<std::string, int> detections;      // per gesture
  double overall_precision = 0.0;
};

// Full pipeline. A detection counts as correct when it overlaps a same-label
// truth span (same turn) over at least half the detection's length.
RetrievalResult retrieve(const std::vector<RetrievalInput>& turns,
                         const std::map<std::string, std::vector<Mat>>& exemplars,
                         const RetrievalConfig& config,
                         const std::vector<GestureTruth>* truth = nullptr);

}  // namespace gsyn
