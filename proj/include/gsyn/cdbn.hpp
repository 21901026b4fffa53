// Constraint-conditioned model: a discrete constraint variable acts as a
// parent of the hidden state, with per-constraint transition matrices and
// priors over a merged (shared + exclusive) state inventory.
#pragma once

#include <string>
#include <vector>

#include "gsyn/dbn.hpp"

namespace gsyn {

struct ConstraintSet {
  std::vector<std::string> labels;  // ordered; must contain "other"

  int size() const { return static_cast<int>(labels.size()); }
  bool has(const std::string& name) const;
  int index(const std::string& name) const;  // throws DataError on unknown label
  void validate() const;

  // Appends "other" if the given list lacks it.
  static ConstraintSet including_other(std::vector<std::string> names);
};

struct SupportMask {
  std::vector<std::vector<int>> support;  // per constraint, sorted state indices
  int global_state = -1;                  // shared state present in every support set

  bool contains(int constraint, int state) const;
  void validate(int n_states) const;
};

struct CdbnModel {
  ConstraintSet constraints;
  std::vector<GaussianState> states;  // merged inventory, global state last
  std::vector<Mat> trans;             // per constraint, n_states x n_states
  Mat priors;                         // n_constraints x n_states
  SupportMask mask;
  Vec constraint_prior;

  int n_constraints() const { return constraints.size(); }
  int n_states() const { return static_cast<int>(states.size()); }
  int speech_dim() const { return static_cast<int>(states.front().speech.dim()); }
  int motion_dim() const { return static_cast<int>(states.front().motion.dim()); }
  void validate() const;
};

struct LabeledSequence {
  Mat speech;
  Mat motion;
  std::vector<int> labels;  // per-frame constraint index

  Sequence unlabeled() const { return {speech, motion}; }
};

// Symmetrized KL over the speech (+) motion block-diagonal joint Gaussian.
double state_sym_kl(const GaussianState& a, const GaussianState& b);

struct PerConstraintStates {
  std::vector<std::vector<GaussianState>> states;  // one list per constraint
  std::vector<std::vector<double>> occupancy;      // matching soft frame counts
};

// VQ init + a short EM refinement on each constraint's labeled segments.
// Constraints with fewer than 10*n_per frames get a reduced state count (with
// a warning); zero frames is an error naming the label.
PerConstraintStates train_per_constraint_states(const std::vector<LabeledSequence>& seqs,
                                                const ConstraintSet& constraints, int n_per,
                                                const EmOptions& opts = {});

struct MergeResult {
  std::vector<GaussianState> states;
  std::vector<double> occupancy;
  SupportMask mask;
};

// Sequential merge in constraint label order. A state joins the closest
// existing state of another constraint when their symmetrized KL falls below
// the threshold (occupancy-weighted moment match); otherwise it is appended.
// The global state goes last and into every support set.
MergeResult merge_states(const PerConstraintStates& pcs, double threshold,
                         const GaussianState& global_state, double global_occupancy);

// Uniform over each support set; off-support rows hop to the global state so
// a constraint switch can never strand the chain.
std::vector<Mat> sparse_transition_init(const SupportMask& mask, int n_states);
Mat sparse_prior_init(const SupportMask& mask, int n_states);

CdbnModel make_cdbn(ConstraintSet constraints, const MergeResult& merged, Vec constraint_prior);

// K=1 wrapper around a baseline model; inference reduces bit-exactly.
CdbnModel cdbn_from_baseline(const DbnModel& base);

// Shared-state ablation: every constraint supports every state.
CdbnModel cdbn_full_support(ConstraintSet constraints, std::vector<GaussianState> states,
                            Vec constraint_prior);

Vec label_frequencies(const std::vector<LabeledSequence>& seqs, int n_constraints);

struct CdbnEmResult {
  CdbnModel model;
  std::vector<double> llr_history;
  Vec occupancy;
  int respawns = 0;
};

// EM with the per-frame transition slice picked by the constraint track.
// Structural zeros survive exactly; Gaussians are pooled across constraints.
CdbnEmResult constrained_em(const CdbnModel& init, const std::vector<LabeledSequence>& seqs,
                            const EmOptions& opts = {});

std::vector<int> track_indices(const ConstraintSet& constraints,
                               const std::vector<std::string>& names);

Mat constrained_posterior_gamma(const CdbnModel& model, const Mat& speech,
                                const std::vector<int>& track,
                                GammaMode mode = GammaMode::kSmoothed);

Mat constrained_synthesize(const CdbnModel& model, const Mat& speech,
                           const std::vector<int>& track,
                           GammaMode mode = GammaMode::kSmoothed);

double constrained_loglik_rate(const CdbnModel& model, const std::vector<LabeledSequence>& seqs,
                               ObsMode obs);

struct CdbnTrainOptions {
  int states_per_constraint = 7;
  double merge_threshold = 1.0;
  EmOptions refine = short_em(10);  // per-constraint pre-training
  EmOptions em;                     // final constrained EM

  static EmOptions short_em(int iters) {
    EmOptions o;
    o.max_iter = iters;
    return o;
  }
};

struct CdbnTrainReport {
  CdbnEmResult em;
  std::vector<int> states_per_constraint;  // after any data-driven reduction
  int merged_states = 0;
};

CdbnTrainReport train_cdbn(const std::vector<LabeledSequence>& seqs,
                           const ConstraintSet& constraints, const CdbnTrainOptions& opts);

}  // namespace gsyn
