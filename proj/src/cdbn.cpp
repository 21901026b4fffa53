#include "gsyn/cdbn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "em_common.hpp"
#include "gsyn/vq.hpp"
#include "hmm_core.hpp"

namespace gsyn {

using detail::Evaluators;
using detail::log_obs_matrix;

// ---------------------------------------------------------------- types

bool ConstraintSet::has(const std::string& name) const {
  return std::find(labels.begin(), labels.end(), name) != labels.end();
}

int ConstraintSet::index(const std::string& name) const {
  const auto it = std::find(labels.begin(), labels.end(), name);
  if (it == labels.end()) throw DataError("unknown constraint label '" + name + "'");
  return static_cast<int>(it - labels.begin());
}

void ConstraintSet::validate() const {
  if (labels.empty()) throw DataError("ConstraintSet: no labels");
  std::set<std::string> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw DataError("ConstraintSet: duplicate labels");
  if (!has("other")) throw DataError("ConstraintSet: must contain 'other'");
}

ConstraintSet ConstraintSet::including_other(std::vector<std::string> names) {
  ConstraintSet cs{std::move(names)};
  if (!cs.has("other")) cs.labels.emplace_back("other");
  cs.validate();
  return cs;
}

bool SupportMask::contains(int constraint, int state) const {
  const auto& sup = support[static_cast<size_t>(constraint)];
  return std::binary_search(sup.begin(), sup.end(), state);
}

void SupportMask::validate(int n_states) const {
  if (support.empty()) throw DataError("SupportMask: no constraints");
  if (global_state < 0 || global_state >= n_states)
    throw DataError("SupportMask: global state index out of range");
  std::vector<bool> seen(static_cast<size_t>(n_states), false);
  for (const auto& sup : support) {
    if (sup.empty()) throw DataError("SupportMask: empty support set");
    int prev = -1;
    bool has_global = false;
    for (int s : sup) {
      if (s < 0 || s >= n_states) throw DataError("SupportMask: state index out of range");
      if (s <= prev) throw DataError("SupportMask: support sets must be sorted and unique");
      prev = s;
      seen[static_cast<size_t>(s)] = true;
      has_global = has_global || s == global_state;
    }
    if (!has_global) throw DataError("SupportMask: global state missing from a support set");
  }
  for (bool b : seen)
    if (!b) throw DataError("SupportMask: state belongs to no support set");
}

void CdbnModel::validate() const {
  constraints.validate();
  if (states.empty()) throw DataError("CdbnModel: no states");
  const int kc = n_constraints();
  const int m = n_states();
  const int ds = speech_dim(), dm = motion_dim();
  for (const auto& s : states) {
    s.validate();
    if (s.speech.dim() != ds || s.motion.dim() != dm)
      throw DataError("CdbnModel: inconsistent state dimensions");
  }
  if (static_cast<int>(mask.support.size()) != kc)
    throw DataError("CdbnModel: mask/constraint count mismatch");
  mask.validate(m);
  if (static_cast<int>(trans.size()) != kc || priors.rows() != kc || priors.cols() != m ||
      constraint_prior.size() != kc)
    throw DataError("CdbnModel: parameter shapes do not match K x M");
  if (!is_simplex(constraint_prior)) throw DataError("CdbnModel: bad constraint prior");
  for (int k = 0; k < kc; ++k) {
    const Mat& a = trans[static_cast<size_t>(k)];
    if (a.rows() != m || a.cols() != m)
      throw DataError("CdbnModel: transition matrix shape mismatch");
    if (!is_row_stochastic(a))
      throw DataError("CdbnModel: transitions not row-stochastic (constraint '" +
                      constraints.labels[static_cast<size_t>(k)] + "')");
    if (!is_simplex(priors.row(k).transpose()))
      throw DataError("CdbnModel: bad prior row (constraint '" +
                      constraints.labels[static_cast<size_t>(k)] + "')");
    for (int j = 0; j < m; ++j) {
      if (mask.contains(k, j)) continue;
      if ((a.col(j).array() != 0.0).any() || priors(k, j) != 0.0)
        throw DataError("CdbnModel: probability mass on off-support state " +
                        std::to_string(j) + " under constraint '" +
                        constraints.labels[static_cast<size_t>(k)] + "'");
    }
  }
}

// ---------------------------------------------------------------- merging

double state_sym_kl(const GaussianState& a, const GaussianState& b) {
  const double ab = kl_gaussian(a.speech, b.speech) + kl_gaussian(a.motion, b.motion);
  const double ba = kl_gaussian(b.speech, a.speech) + kl_gaussian(b.motion, a.motion);
  return 0.5 * (ab + ba);
}

namespace {

GaussianParams pool_gaussian(const GaussianParams& a, double wa, const GaussianParams& b,
                             double wb) {
  const double w = wa + wb;
  GaussianParams out;
  out.mean = (wa * a.mean + wb * b.mean) / w;
  const Mat m2 = (wa * (a.cov + a.mean * a.mean.transpose()) +
                  wb * (b.cov + b.mean * b.mean.transpose())) /
                 w;
  Mat cov = m2 - out.mean * out.mean.transpose();
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

}  // namespace

MergeResult merge_states(const PerConstraintStates& pcs, double threshold,
                         const GaussianState& global_state, double global_occupancy) {
  if (threshold <= 0) throw DataError("merge_states: threshold must be positive");
  const size_t kc = pcs.states.size();
  if (kc == 0 || pcs.occupancy.size() != kc)
    throw DataError("merge_states: malformed per-constraint states");

  MergeResult r;
  r.mask.support.assign(kc, {});
  for (size_t k = 0; k < kc; ++k) {
    if (pcs.states[k].size() != pcs.occupancy[k].size())
      throw DataError("merge_states: occupancy/state count mismatch");
    auto& sup_k = r.mask.support[k];
    for (size_t s = 0; s < pcs.states[k].size(); ++s) {
      const auto& cand = pcs.states[k][s];
      const double occ = pcs.occupancy[k][s];
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (size_t e = 0; e < r.states.size(); ++e) {
        // Entries already claimed by this constraint are its own states, not
        // merge candidates.
        if (std::find(sup_k.begin(), sup_k.end(), static_cast<int>(e)) != sup_k.end()) continue;
        const double d = state_sym_kl(cand, r.states[e]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(e);
        }
      }
      if (best >= 0 && best_d < threshold) {
        auto& dst = r.states[static_cast<size_t>(best)];
        const double w_dst = r.occupancy[static_cast<size_t>(best)];
        dst.speech = pool_gaussian(dst.speech, w_dst, cand.speech, occ);
        dst.motion = pool_gaussian(dst.motion, w_dst, cand.motion, occ);
        r.occupancy[static_cast<size_t>(best)] += occ;
        sup_k.push_back(best);
      } else {
        r.states.push_back(cand);
        r.occupancy.push_back(occ);
        sup_k.push_back(static_cast<int>(r.states.size()) - 1);
      }
    }
  }

  r.states.push_back(global_state);
  r.occupancy.push_back(global_occupancy);
  const int g = static_cast<int>(r.states.size()) - 1;
  r.mask.global_state = g;
  for (auto& sup : r.mask.support) {
    sup.push_back(g);
    std::sort(sup.begin(), sup.end());
  }
  r.mask.validate(static_cast<int>(r.states.size()));
  return r;
}

// ---------------------------------------------------------------- assembly

std::vector<Mat> sparse_transition_init(const SupportMask& mask, int n_states) {
  mask.validate(n_states);
  std::vector<Mat> trans;
  trans.reserve(mask.support.size());
  for (const auto& sup : mask.support) {
    Mat a = Mat::Zero(n_states, n_states);
    const double u = 1.0 / static_cast<double>(sup.size());
    std::vector<bool> in(static_cast<size_t>(n_states), false);
    for (int i : sup) in[static_cast<size_t>(i)] = true;
    for (int i : sup)
      for (int j : sup) a(i, j) = u;
    for (int i = 0; i < n_states; ++i)
      if (!in[static_cast<size_t>(i)]) a(i, mask.global_state) = 1.0;
    trans.push_back(std::move(a));
  }
  return trans;
}

Mat sparse_prior_init(const SupportMask& mask, int n_states) {
  mask.validate(n_states);
  Mat p = Mat::Zero(static_cast<Eigen::Index>(mask.support.size()), n_states);
  for (size_t k = 0; k < mask.support.size(); ++k) {
    const double u = 1.0 / static_cast<double>(mask.support[k].size());
    for (int i : mask.support[k]) p(static_cast<Eigen::Index>(k), i) = u;
  }
  return p;
}

CdbnModel make_cdbn(ConstraintSet constraints, const MergeResult& merged, Vec constraint_prior) {
  CdbnModel m;
  m.constraints = std::move(constraints);
  m.states = merged.states;
  m.mask = merged.mask;
  m.trans = sparse_transition_init(m.mask, m.n_states());
  m.priors = sparse_prior_init(m.mask, m.n_states());
  m.constraint_prior = std::move(constraint_prior);
  m.validate();
  return m;
}

CdbnModel cdbn_from_baseline(const DbnModel& base) {
  base.validate();
  CdbnModel m;
  m.constraints.labels = {"other"};
  m.states = base.states;
  m.trans = {base.trans};
  m.priors = base.prior.transpose();
  std::vector<int> all(static_cast<size_t>(base.n_states()));
  for (int i = 0; i < base.n_states(); ++i) all[static_cast<size_t>(i)] = i;
  m.mask.support = {all};
  m.mask.global_state = base.n_states() - 1;
  m.constraint_prior = Vec::Ones(1);
  m.validate();
  return m;
}

CdbnModel cdbn_full_support(ConstraintSet constraints, std::vector<GaussianState> states,
                            Vec constraint_prior) {
  constraints.validate();
  CdbnModel m;
  m.constraints = std::move(constraints);
  m.states = std::move(states);
  std::vector<int> all(m.states.size());
  for (size_t i = 0; i < m.states.size(); ++i) all[i] = static_cast<int>(i);
  m.mask.support.assign(static_cast<size_t>(m.n_constraints()), all);
  m.mask.global_state = m.n_states() - 1;
  m.trans = sparse_transition_init(m.mask, m.n_states());
  m.priors = sparse_prior_init(m.mask, m.n_states());
  m.constraint_prior = std::move(constraint_prior);
  m.validate();
  return m;
}

// ---------------------------------------------------------------- training

namespace {

void validate_labeled(const std::vector<LabeledSequence>& seqs, int n_constraints,
                      const char* who) {
  if (seqs.empty()) throw DataError(std::string(who) + ": no sequences");
  for (const auto& s : seqs) {
    if (s.speech.rows() == 0) throw DataError(std::string(who) + ": empty sequence");
    if (s.speech.rows() != s.motion.rows())
      throw DataError(std::string(who) + ": speech/motion lengths differ");
    if (static_cast<Eigen::Index>(s.labels.size()) != s.speech.rows())
      throw DataError(std::string(who) + ": label track length mismatch");
    for (int l : s.labels)
      if (l < 0 || l >= n_constraints)
        throw DataError(std::string(who) + ": label index out of range");
  }
}

// Contiguous same-label runs, grouped by constraint.
std::vector<std::vector<Sequence>> split_segments(const std::vector<LabeledSequence>& seqs,
                                                  int n_constraints) {
  std::vector<std::vector<Sequence>> segs(static_cast<size_t>(n_constraints));
  for (const auto& seq : seqs) {
    const size_t t_len = seq.labels.size();
    size_t t = 0;
    while (t < t_len) {
      size_t e = t;
      while (e < t_len && seq.labels[e] == seq.labels[t]) ++e;
      Sequence s;
      s.speech = seq.speech.middleRows(static_cast<Eigen::Index>(t),
                                       static_cast<Eigen::Index>(e - t));
      s.motion = seq.motion.middleRows(static_cast<Eigen::Index>(t),
                                       static_cast<Eigen::Index>(e - t));
      segs[static_cast<size_t>(seq.labels[t])].push_back(std::move(s));
      t = e;
    }
  }
  return segs;
}

Mat stack_joint(const std::vector<Sequence>& segs, Eigen::Index ds, Eigen::Index dm) {
  Eigen::Index rows = 0;
  for (const auto& s : segs) rows += s.speech.rows();
  Mat joint(rows, ds + dm);
  Eigen::Index at = 0;
  for (const auto& s : segs) {
    joint.block(at, 0, s.speech.rows(), ds) = s.speech;
    joint.block(at, ds, s.motion.rows(), dm) = s.motion;
    at += s.speech.rows();
  }
  return joint;
}

GaussianState single_state_from_joint(const Mat& joint, Eigen::Index ds) {
  const Eigen::Index n = joint.rows();
  const Vec mean = joint.colwise().mean().transpose();
  Mat cov;
  if (n >= 2) {
    const Mat centered = joint.rowwise() - mean.transpose();
    cov = centered.transpose() * centered / static_cast<double>(n - 1);
    cov = 0.5 * (cov + cov.transpose());
  } else {
    cov = Mat::Identity(joint.cols(), joint.cols());
  }
  if (Eigen::LLT<Mat>(cov).info() != Eigen::Success)
    cov.diagonal().array() += kCovRegEps * std::max(cov.diagonal().mean(), 1.0);
  GaussianState s;
  s.speech.mean = mean.head(ds);
  s.speech.cov = cov.topLeftCorner(ds, ds);
  s.motion.mean = mean.tail(mean.size() - ds);
  s.motion.cov = cov.bottomRightCorner(cov.rows() - ds, cov.cols() - ds);
  return s;
}

}  // namespace

PerConstraintStates train_per_constraint_states(const std::vector<LabeledSequence>& seqs,
                                                const ConstraintSet& constraints, int n_per,
                                                const EmOptions& opts) {
  constraints.validate();
  if (n_per < 1) throw DataError("train_per_constraint_states: need n_per >= 1");
  const int kc = constraints.size();
  validate_labeled(seqs, kc, "train_per_constraint_states");
  const Eigen::Index ds = seqs.front().speech.cols();
  const Eigen::Index dm = seqs.front().motion.cols();

  const auto segs = split_segments(seqs, kc);
  PerConstraintStates out;
  out.states.resize(static_cast<size_t>(kc));
  out.occupancy.resize(static_cast<size_t>(kc));
  for (int k = 0; k < kc; ++k) {
    const auto& seg_k = segs[static_cast<size_t>(k)];
    Eigen::Index frames = 0;
    for (const auto& s : seg_k) frames += s.speech.rows();
    if (frames == 0)
      throw DataError("train_per_constraint_states: constraint '" +
                      constraints.labels[static_cast<size_t>(k)] + "' has no labeled frames");

    int n_k = n_per;
    if (frames < 10L * n_per) {
      n_k = std::max<int>(1, static_cast<int>(frames / 10));
      if (opts.warn)
        opts.warn("constraint '" + constraints.labels[static_cast<size_t>(k)] + "': only " +
                  std::to_string(frames) + " frames; reducing states " +
                  std::to_string(n_per) + " -> " + std::to_string(n_k));
    }

    const Mat joint = stack_joint(seg_k, ds, dm);
    std::vector<GaussianState> init_list;
    std::vector<double> init_occ;
    if (frames >= 10L * n_k) {
      StateInit si = init_states(joint, n_k, static_cast<int>(ds));
      init_list = std::move(si.states);
      init_occ = std::move(si.occupancy);
    } else {
      init_list = {single_state_from_joint(joint, ds)};
      init_occ = {static_cast<double>(frames)};
    }

    if (opts.max_iter > 0) {
      DbnModel m;
      m.states = std::move(init_list);
      const int n = m.n_states();
      m.trans = Mat::Constant(n, n, 1.0 / n);
      m.prior = Vec::Constant(n, 1.0 / n);
      EmResult em = em_train(m, seg_k, opts);
      out.states[static_cast<size_t>(k)] = std::move(em.model.states);
      out.occupancy[static_cast<size_t>(k)].assign(em.occupancy.data(),
                                                   em.occupancy.data() + em.occupancy.size());
    } else {
      out.states[static_cast<size_t>(k)] = std::move(init_list);
      out.occupancy[static_cast<size_t>(k)] = std::move(init_occ);
    }
  }
  return out;
}

Vec label_frequencies(const std::vector<LabeledSequence>& seqs, int n_constraints) {
  validate_labeled(seqs, n_constraints, "label_frequencies");
  Vec counts = Vec::Zero(n_constraints);
  for (const auto& s : seqs)
    for (int l : s.labels) counts[l] += 1.0;
  return counts / counts.sum();
}

// ---------------------------------------------------------------- EM

namespace {

std::vector<const Mat*> labeled_slices(const std::vector<Mat>& lts,
                                       const std::vector<int>& labels) {
  std::vector<const Mat*> s(labels.size());
  for (size_t t = 0; t < labels.size(); ++t) s[t] = &lts[static_cast<size_t>(labels[t])];
  return s;
}

struct CSuffStats {
  double loglik = 0;
  Mat prior_first;          // K x M
  std::vector<Mat> xi_sum;  // per constraint, M x M
  detail::GaussianMoments moments;

  CSuffStats(int kc, int n, int ds, int dm)
      : prior_first(Mat::Zero(kc, n)),
        xi_sum(static_cast<size_t>(kc), Mat::Zero(n, n)),
        moments(n, ds, dm) {}

  void add(const CSuffStats& o) {
    loglik += o.loglik;
    prior_first += o.prior_first;
    for (size_t k = 0; k < xi_sum.size(); ++k) xi_sum[k] += o.xi_sum[k];
    moments.add(o.moments);
  }
};

CSuffStats e_step_labeled(const Evaluators& ev, const std::vector<Mat>& lts, const Mat& lps,
                          const LabeledSequence& seq, int kc, int n, int ds, int dm) {
  CSuffStats st(kc, n, ds, dm);
  const Mat lo = log_obs_matrix(ev, seq.speech, &seq.motion);
  const auto slices = labeled_slices(lts, seq.labels);
  const Vec lp = lps.row(seq.labels.front()).transpose();
  const auto fb = detail::forward_backward(lo, lp, slices);
  const Mat gamma = detail::gammas(fb);
  st.loglik = fb.log_evidence;
  st.prior_first.row(seq.labels.front()) = gamma.row(0);
  Mat m(n, n);
  for (Eigen::Index t = 1; t < lo.rows(); ++t) {
    const int c = seq.labels[static_cast<size_t>(t)];
    m = lts[static_cast<size_t>(c)];
    m.colwise() += fb.log_alpha.row(t - 1).transpose();
    m.rowwise() += lo.row(t) + fb.log_beta.row(t);
    st.xi_sum[static_cast<size_t>(c)] += detail::exp0(m.array() - fb.log_evidence).matrix();
  }
  st.moments.accumulate(gamma, seq.speech, seq.motion);
  return st;
}

}  // namespace

CdbnEmResult constrained_em(const CdbnModel& init, const std::vector<LabeledSequence>& seqs,
                            const EmOptions& opts) {
  init.validate();
  const int kc = init.n_constraints();
  const int n = init.n_states();
  const int ds = init.speech_dim(), dm = init.motion_dim();
  validate_labeled(seqs, kc, "constrained_em");
  long total_frames = 0;
  for (const auto& s : seqs) {
    if (s.speech.cols() != ds || s.motion.cols() != dm)
      throw DataError("constrained_em: sequence dimensions do not match the model");
    total_frames += s.speech.rows();
  }

  CdbnEmResult result;
  result.model = init;
  double prev_llr = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    auto& model = result.model;
    const Evaluators ev(model.states);
    std::vector<Mat> lts;
    lts.reserve(static_cast<size_t>(kc));
    for (const auto& a : model.trans) lts.push_back(detail::safe_log(a));
    const Mat lps = detail::safe_log(model.priors);
    const CSuffStats stats = detail::ordered_map_reduce<CSuffStats>(
        seqs.size(), opts.threads, [&] { return CSuffStats(kc, n, ds, dm); },
        [&](size_t s) { return e_step_labeled(ev, lts, lps, seqs[s], kc, n, ds, dm); });

    const double llr = stats.loglik / static_cast<double>(total_frames);
    result.llr_history.push_back(llr);
    result.occupancy = stats.moments.gamma_sum;
    if (iter > 0 && std::abs(llr - prev_llr) < opts.tol) break;
    prev_llr = llr;

    // M-step. Dividing the accumulated xi by its row sum keeps structural
    // zeros exactly zero; rows with no mass under a constraint keep their
    // previous values (this preserves the off-support hop rows).
    for (int k = 0; k < kc; ++k) {
      auto& a = model.trans[static_cast<size_t>(k)];
      const Mat& xs = stats.xi_sum[static_cast<size_t>(k)];
      for (Eigen::Index i = 0; i < n; ++i) {
        const double row_sum = xs.row(i).sum();
        if (row_sum > 0) a.row(i) = xs.row(i) / row_sum;
      }
      const double p_sum = stats.prior_first.row(k).sum();
      if (p_sum > 0) model.priors.row(k) = stats.prior_first.row(k) / p_sum;
    }
    if (!opts.freeze_gaussians) detail::mstep_all_gaussians(model.states, stats.moments);

    // Starved states get only their Gaussians respawned; transition structure
    // (and with it the support mask) stays put.
    Eigen::Index busiest = 0;
    stats.moments.gamma_sum.maxCoeff(&busiest);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (stats.moments.gamma_sum[i] >= detail::kStarvation) continue;
      detail::shift_from_donor(model.states[static_cast<size_t>(i)],
                               model.states[static_cast<size_t>(busiest)]);
      ++result.respawns;
      if (opts.warn)
        opts.warn("constrained em: state " + std::to_string(i) + " starved (occupancy " +
                  std::to_string(stats.moments.gamma_sum[i]) + "); respawned from state " +
                  std::to_string(busiest));
    }
    model.validate();
  }
  return result;
}

// ---------------------------------------------------------------- inference

std::vector<int> track_indices(const ConstraintSet& constraints,
                               const std::vector<std::string>& names) {
  std::vector<int> idx;
  idx.reserve(names.size());
  for (const auto& name : names) idx.push_back(constraints.index(name));
  return idx;
}

namespace {

void check_track(const CdbnModel& model, const Mat& speech, const std::vector<int>& track) {
  if (speech.rows() == 0) throw DataError("constrained inference: empty sequence");
  if (speech.cols() != model.speech_dim())
    throw DataError("constrained inference: speech dimension mismatch");
  if (static_cast<Eigen::Index>(track.size()) != speech.rows())
    throw DataError("constrained inference: track length != sequence length");
  for (int l : track)
    if (l < 0 || l >= model.n_constraints())
      throw DataError("constrained inference: label index out of range");
}

}  // namespace

Mat constrained_posterior_gamma(const CdbnModel& model, const Mat& speech,
                                const std::vector<int>& track, GammaMode mode) {
  model.validate();
  check_track(model, speech, track);
  const Evaluators ev(model.states);
  const Mat lo = log_obs_matrix(ev, speech, nullptr);
  std::vector<Mat> lts;
  lts.reserve(model.trans.size());
  for (const auto& a : model.trans) lts.push_back(detail::safe_log(a));
  const Mat lps = detail::safe_log(model.priors);
  const auto slices = labeled_slices(lts, track);
  const Vec lp = lps.row(track.front()).transpose();
  if (mode == GammaMode::kViterbi)
    return detail::indicator_gammas(detail::viterbi_path(lo, lp, slices), model.n_states());
  return detail::gammas(detail::forward_backward(lo, lp, slices));
}

Mat constrained_synthesize(const CdbnModel& model, const Mat& speech,
                           const std::vector<int>& track, GammaMode mode) {
  const Mat gamma = constrained_posterior_gamma(model, speech, track, mode);
  Mat means(model.n_states(), model.motion_dim());
  for (int i = 0; i < model.n_states(); ++i)
    means.row(i) = model.states[static_cast<size_t>(i)].motion.mean.transpose();
  return gamma * means;
}

double constrained_loglik_rate(const CdbnModel& model, const std::vector<LabeledSequence>& seqs,
                               ObsMode obs) {
  model.validate();
  validate_labeled(seqs, model.n_constraints(), "constrained_loglik_rate");
  const Evaluators ev(model.states);
  std::vector<Mat> lts;
  lts.reserve(model.trans.size());
  for (const auto& a : model.trans) lts.push_back(detail::safe_log(a));
  const Mat lps = detail::safe_log(model.priors);
  double total_ll = 0;
  long total_frames = 0;
  for (const auto& seq : seqs) {
    const Mat lo =
        log_obs_matrix(ev, seq.speech, obs == ObsMode::kFull ? &seq.motion : nullptr);
    const Vec lp = lps.row(seq.labels.front()).transpose();
    total_ll += detail::forward_evidence(lo, lp, labeled_slices(lts, seq.labels));
    total_frames += lo.rows();
  }
  return total_ll / static_cast<double>(total_frames);
}

// ---------------------------------------------------------------- pipeline

CdbnTrainReport train_cdbn(const std::vector<LabeledSequence>& seqs,
                           const ConstraintSet& constraints, const CdbnTrainOptions& opts) {
  constraints.validate();
  validate_labeled(seqs, constraints.size(), "train_cdbn");

  PerConstraintStates pcs =
      train_per_constraint_states(seqs, constraints, opts.states_per_constraint, opts.refine);

  std::vector<Sequence> all;
  all.reserve(seqs.size());
  for (const auto& s : seqs) all.push_back(s.unlabeled());
  const Mat joint = stack_joint(all, seqs.front().speech.cols(), seqs.front().motion.cols());
  const GaussianState global_state = single_state_from_joint(joint, seqs.front().speech.cols());

  const MergeResult merged = merge_states(pcs, opts.merge_threshold, global_state,
                                          static_cast<double>(joint.rows()));
  const CdbnModel init =
      make_cdbn(constraints, merged, label_frequencies(seqs, constraints.size()));

  CdbnTrainReport report;
  for (const auto& list : pcs.states)
    report.states_per_constraint.push_back(static_cast<int>(list.size()));
  report.merged_states = static_cast<int>(merged.states.size());
  report.em = constrained_em(init, seqs, opts.em);
  return report;
}

}  // namespace gsyn
