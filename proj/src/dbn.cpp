#include "gsyn/dbn.hpp"

#include <cmath>
#include <limits>

#include "em_common.hpp"
#include "hmm_core.hpp"

namespace gsyn {

using detail::constant_slices;
using detail::Evaluators;
using detail::log_obs_matrix;

void DbnModel::validate() const {
  if (states.empty()) throw DataError("DbnModel: need at least one state");
  const int n = n_states();
  const int ds = speech_dim(), dm = motion_dim();
  for (const auto& s : states) {
    s.validate();
    if (s.speech.dim() != ds || s.motion.dim() != dm)
      throw DataError("DbnModel: inconsistent state dimensions");
  }
  if (trans.rows() != n || trans.cols() != n)
    throw DataError("DbnModel: transition matrix shape mismatch");
  if (!is_row_stochastic(trans)) throw DataError("DbnModel: transitions not row-stochastic");
  if (prior.size() != n || !is_simplex(prior)) throw DataError("DbnModel: bad prior");
}

double obs_logprob(const DbnModel& model, const Vec& speech, const Vec* motion, int state) {
  if (state < 0 || state >= model.n_states())
    throw DataError("obs_logprob: state index out of range");
  double lp = GaussianEvaluator(model.states[static_cast<size_t>(state)].speech).logpdf(speech);
  if (motion)
    lp += GaussianEvaluator(model.states[static_cast<size_t>(state)].motion).logpdf(*motion);
  return lp;
}

Mat posterior_gamma(const DbnModel& model, const Mat& speech, GammaMode mode) {
  model.validate();
  if (speech.rows() == 0) throw DataError("posterior_gamma: empty sequence");
  if (speech.cols() != model.speech_dim())
    throw DataError("posterior_gamma: speech dimension mismatch");
  const Evaluators ev(model.states);
  const Mat lo = log_obs_matrix(ev, speech, nullptr);
  const Mat lt = detail::safe_log(model.trans);
  const Vec lp = detail::safe_log(model.prior);
  const auto slices = constant_slices(lt, speech.rows());
  if (mode == GammaMode::kViterbi)
    return detail::indicator_gammas(detail::viterbi_path(lo, lp, slices), model.n_states());
  return detail::gammas(detail::forward_backward(lo, lp, slices));
}

Mat synthesize(const DbnModel& model, const Mat& speech, GammaMode mode) {
  const Mat gamma = posterior_gamma(model, speech, mode);
  Mat means(model.n_states(), model.motion_dim());
  for (int i = 0; i < model.n_states(); ++i)
    means.row(i) = model.states[static_cast<size_t>(i)].motion.mean.transpose();
  return gamma * means;
}

namespace {

struct SuffStats {
  double loglik = 0;
  Vec gamma_first;
  Mat xi_sum;
  detail::GaussianMoments moments;

  SuffStats(int n, int ds, int dm)
      : gamma_first(Vec::Zero(n)), xi_sum(Mat::Zero(n, n)), moments(n, ds, dm) {}

  void add(const SuffStats& o) {
    loglik += o.loglik;
    gamma_first += o.gamma_first;
    xi_sum += o.xi_sum;
    moments.add(o.moments);
  }
};

void accumulate_xi(Mat& xi_sum, const detail::FbResult& fb, const Mat& lo, const Mat& lt) {
  Mat m(lt.rows(), lt.cols());
  for (Eigen::Index t = 1; t < lo.rows(); ++t) {
    m = lt;
    m.colwise() += fb.log_alpha.row(t - 1).transpose();
    m.rowwise() += lo.row(t) + fb.log_beta.row(t);
    xi_sum += detail::exp0(m.array() - fb.log_evidence).matrix();
  }
}

SuffStats e_step_sequence(const Evaluators& ev, const Mat& lt, const Vec& lp,
                          const Sequence& seq, int n, int ds, int dm) {
  SuffStats st(n, ds, dm);
  const Mat lo = log_obs_matrix(ev, seq.speech, &seq.motion);
  const auto fb = detail::forward_backward(lo, lp, constant_slices(lt, lo.rows()));
  const Mat gamma = detail::gammas(fb);
  st.loglik = fb.log_evidence;
  st.gamma_first = gamma.row(0).transpose();
  accumulate_xi(st.xi_sum, fb, lo, lt);
  st.moments.accumulate(gamma, seq.speech, seq.motion);
  return st;
}

int respawn_starved(DbnModel& model, const Vec& occupancy, const EmOptions& opts) {
  int respawns = 0;
  Eigen::Index busiest = 0;
  occupancy.maxCoeff(&busiest);
  for (Eigen::Index i = 0; i < occupancy.size(); ++i) {
    if (occupancy[i] >= detail::kStarvation) continue;
    detail::shift_from_donor(model.states[static_cast<size_t>(i)],
                             model.states[static_cast<size_t>(busiest)]);
    model.trans.row(i).setConstant(1.0 / model.n_states());
    model.prior[i] = 1.0 / model.n_states();
    ++respawns;
    if (opts.warn)
      opts.warn("em: state " + std::to_string(i) + " starved (occupancy " +
                std::to_string(occupancy[i]) + "); respawned from state " +
                std::to_string(busiest));
  }
  if (respawns > 0) model.prior /= model.prior.sum();
  return respawns;
}

}  // namespace

EmResult em_train(const DbnModel& init, const std::vector<Sequence>& seqs,
                  const EmOptions& opts) {
  init.validate();
  if (seqs.empty()) throw DataError("em_train: no sequences");
  const int n = init.n_states();
  const int ds = init.speech_dim(), dm = init.motion_dim();
  long total_frames = 0;
  for (const auto& s : seqs) {
    if (s.speech.rows() != s.motion.rows())
      throw DataError("em_train: speech/motion lengths differ");
    if (s.speech.rows() == 0) throw DataError("em_train: empty sequence");
    if (s.speech.cols() != ds || s.motion.cols() != dm)
      throw DataError("em_train: sequence dimensions do not match the model");
    total_frames += s.speech.rows();
  }

  EmResult result;
  result.model = init;
  double prev_llr = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Evaluators ev(result.model.states);
    const Mat lt = detail::safe_log(result.model.trans);
    const Vec lp = detail::safe_log(result.model.prior);
    const SuffStats stats = detail::ordered_map_reduce<SuffStats>(
        seqs.size(), opts.threads, [&] { return SuffStats(n, ds, dm); },
        [&](size_t s) { return e_step_sequence(ev, lt, lp, seqs[s], n, ds, dm); });

    const double llr = stats.loglik / static_cast<double>(total_frames);
    result.llr_history.push_back(llr);
    result.occupancy = stats.moments.gamma_sum;
    if (iter > 0 && std::abs(llr - prev_llr) < opts.tol) break;
    prev_llr = llr;

    auto& model = result.model;
    model.prior = stats.gamma_first / stats.gamma_first.sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double row_sum = stats.xi_sum.row(i).sum();
      if (row_sum > 0) model.trans.row(i) = stats.xi_sum.row(i) / row_sum;
    }
    if (!opts.freeze_gaussians) detail::mstep_all_gaussians(model.states, stats.moments);
    result.respawns += respawn_starved(model, stats.moments.gamma_sum, opts);
  }
  return result;
}

double loglik_rate(const DbnModel& model, const std::vector<Sequence>& seqs, ObsMode obs) {
  model.validate();
  if (seqs.empty()) throw DataError("loglik_rate: no sequences");
  const Evaluators ev(model.states);
  const Mat lt = detail::safe_log(model.trans);
  const Vec lp = detail::safe_log(model.prior);
  double total_ll = 0;
  long total_frames = 0;
  for (const auto& seq : seqs) {
    const Mat lo =
        log_obs_matrix(ev, seq.speech, obs == ObsMode::kFull ? &seq.motion : nullptr);
    total_ll += detail::forward_evidence(lo, lp, constant_slices(lt, lo.rows()));
    total_frames += lo.rows();
  }
  return total_ll / static_cast<double>(total_frames);
}

}  // namespace gsyn
