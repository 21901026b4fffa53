// Objective metrics for synthesized trajectories: canonical correlations,
// distributional KLD, gesture-accuracy harness, state-count sweeps.
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gsyn/cdbn.hpp"

namespace gsyn {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;  // turns that contributed
};

// First canonical correlation for one pair of equally long sequences.
double first_cca(const Mat& x, const Mat& y);

// Per-turn first canonical correlation, aggregated as mean +- std. Turns with
// degenerate (constant or rank-deficient) blocks are skipped with a warning.
MeanStd cca_m(const std::vector<Mat>& original, const std::vector<Mat>& synthesized,
              const std::function<void(const std::string&)>& warn = {});
MeanStd cca_ms(const std::vector<Mat>& synthesized, const std::vector<Mat>& speech,
               const std::function<void(const std::string&)>& warn = {});

GaussianParams fit_gaussian_frames(const Mat& frames);

// KL(fit(original) || fit(synthesized)) with single full-covariance Gaussians.
double kld_metric(const Mat& original, const Mat& synthesized);

using Detector = std::function<bool(const Mat& traj)>;

// Fraction of mean-removed power carried by one axis.
double oscillation_power_fraction(const Mat& traj, int axis);
Detector oscillation_axis_detector(int axis, double min_power_fraction = 0.6);

// Correlates per-axis oscillation-power signatures (cosine similarity) with
// the generating template's signature.
Detector template_correlation_detector(const Mat& templ, double min_cosine = 0.8);

// Synthesize every turn under a constant target-constraint track and count
// detector successes.
double gesture_accuracy(const CdbnModel& model, const std::vector<Mat>& speech_turns,
                        const std::string& gesture, const Detector& detector);

struct SweepRow {
  int n_states = 0;
  double train_llr = 0.0;
  double val_llr = 0.0;
  double val_cca_m = 0.0;
};

// Baseline models trained per candidate N; rows sorted by N.
std::vector<SweepRow> state_count_sweep(const std::vector<Sequence>& train,
                                        const std::vector<Sequence>& val,
                                        std::vector<int> candidates, const EmOptions& opts);

struct EvalReport {
  MeanStd cca_m;
  MeanStd cca_ms;
  double kld = 0.0;
  double llr = 0.0;
  std::map<std::string, double> gesture_accuracy;
};

std::string format_report(const EvalReport& report);
std::string format_sweep(const std::vector<SweepRow>& rows);  // delimited plot data

}  // namespace gsyn
