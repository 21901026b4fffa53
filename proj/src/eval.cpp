#include "gsyn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gsyn/vq.hpp"

namespace gsyn {

double first_cca(const Mat& x, const Mat& y) {
  const auto rho = cca(x, y);
  return rho.front();
}

namespace {

MeanStd mean_first_cca(const std::vector<Mat>& a, const std::vector<Mat>& b, const char* who,
                       const std::function<void(const std::string&)>& warn) {
  if (a.size() != b.size()) throw DataError(std::string(who) + ": turn counts differ");
  if (a.empty()) throw DataError(std::string(who) + ": no turns");
  std::vector<double> vals;
  for (size_t i = 0; i < a.size(); ++i) {
    try {
      vals.push_back(first_cca(a[i], b[i]));
    } catch (const Error& e) {
      if (warn)
        warn(std::string(who) + ": turn " + std::to_string(i) + " skipped (" + e.what() + ")");
    }
  }
  MeanStd out;
  out.n = static_cast<int>(vals.size());
  if (vals.empty()) return out;
  for (double v : vals) out.mean += v;
  out.mean /= static_cast<double>(vals.size());
  if (vals.size() >= 2) {
    double ss = 0;
    for (double v : vals) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  }
  return out;
}

}  // namespace

MeanStd cca_m(const std::vector<Mat>& original, const std::vector<Mat>& synthesized,
              const std::function<void(const std::string&)>& warn) {
  return mean_first_cca(original, synthesized, "cca_m", warn);
}

MeanStd cca_ms(const std::vector<Mat>& synthesized, const std::vector<Mat>& speech,
               const std::function<void(const std::string&)>& warn) {
  return mean_first_cca(synthesized, speech, "cca_ms", warn);
}

GaussianParams fit_gaussian_frames(const Mat& frames) {
  if (frames.rows() < 2) throw DataError("fit_gaussian_frames: need at least two frames");
  GaussianParams g;
  g.mean = frames.colwise().mean().transpose();
  const Mat centered = frames.rowwise() - g.mean.transpose();
  Mat cov = centered.transpose() * centered / static_cast<double>(frames.rows() - 1);
  cov = 0.5 * (cov + cov.transpose());
  if (Eigen::LLT<Mat>(cov).info() != Eigen::Success)
    cov.diagonal().array() += kCovRegEps * std::max(cov.diagonal().mean(), 1.0);
  g.cov = cov;
  return g;
}

double kld_metric(const Mat& original, const Mat& synthesized) {
  if (original.cols() != synthesized.cols()) throw DataError("kld_metric: dimension mismatch");
  const auto d = original.cols();
  if (original.rows() <= d + 1 || synthesized.rows() <= d + 1)
    throw DataError("kld_metric: need more frames than dimensions");
  return kl_gaussian(fit_gaussian_frames(original), fit_gaussian_frames(synthesized));
}

double oscillation_power_fraction(const Mat& traj, int axis) {
  if (traj.rows() < 2) throw DataError("oscillation_power_fraction: too short");
  if (axis < 0 || axis >= traj.cols())
    throw DataError("oscillation_power_fraction: axis out of range");
  Vec power(traj.cols());
  for (Eigen::Index j = 0; j < traj.cols(); ++j) {
    const double mean = traj.col(j).mean();
    power[j] = (traj.col(j).array() - mean).square().sum();
  }
  const double total = power.sum();
  if (total <= 0) return 0.0;
  return power[axis] / total;
}

Detector oscillation_axis_detector(int axis, double min_power_fraction) {
  return [axis, min_power_fraction](const Mat& traj) {
    return oscillation_power_fraction(traj, axis) > min_power_fraction;
  };
}

namespace {

Vec power_signature(const Mat& traj) {
  Vec power(traj.cols());
  for (Eigen::Index j = 0; j < traj.cols(); ++j) {
    const double mean = traj.col(j).mean();
    power[j] = std::sqrt((traj.col(j).array() - mean).square().sum() /
                         static_cast<double>(traj.rows()));
  }
  return power;
}

}  // namespace

Detector template_correlation_detector(const Mat& templ, double min_cosine) {
  if (templ.rows() < 2) throw DataError("template_correlation_detector: template too short");
  const Vec sig = power_signature(templ);
  return [sig, min_cosine](const Mat& traj) {
    if (traj.cols() != sig.size()) throw DataError("template detector: dimension mismatch");
    const Vec p = power_signature(traj);
    const double denom = sig.norm() * p.norm();
    if (denom <= 0) return false;
    return sig.dot(p) / denom >= min_cosine;
  };
}

double gesture_accuracy(const CdbnModel& model, const std::vector<Mat>& speech_turns,
                        const std::string& gesture, const Detector& detector) {
  if (!detector) throw DataError("gesture_accuracy: no detector registered");
  if (speech_turns.empty()) throw DataError("gesture_accuracy: no turns");
  const int g = model.constraints.index(gesture);
  int hits = 0;
  for (const auto& sp : speech_turns) {
    const std::vector<int> track(static_cast<size_t>(sp.rows()), g);
    if (detector(constrained_synthesize(model, sp, track))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(speech_turns.size());
}

std::vector<SweepRow> state_count_sweep(const std::vector<Sequence>& train,
                                        const std::vector<Sequence>& val,
                                        std::vector<int> candidates, const EmOptions& opts) {
  if (candidates.empty()) throw DataError("state_count_sweep: no candidate state counts");
  if (train.empty() || val.empty()) throw DataError("state_count_sweep: empty split");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const auto ds = train.front().speech.cols();
  const auto dm = train.front().motion.cols();
  Eigen::Index rows = 0;
  for (const auto& s : train) rows += s.speech.rows();
  Mat joint(rows, ds + dm);
  Eigen::Index at = 0;
  for (const auto& s : train) {
    joint.block(at, 0, s.speech.rows(), ds) = s.speech;
    joint.block(at, ds, s.motion.rows(), dm) = s.motion;
    at += s.speech.rows();
  }

  std::vector<SweepRow> out;
  for (int n : candidates) {
    StateInit si = init_states(joint, n, static_cast<int>(ds));
    DbnModel init;
    init.states = std::move(si.states);
    init.trans = Mat::Constant(n, n, 1.0 / n);
    init.prior = Vec::Constant(n, 1.0 / n);
    const EmResult em = em_train(init, train, opts);

    SweepRow row;
    row.n_states = n;
    row.train_llr = loglik_rate(em.model, train, ObsMode::kFull);
    row.val_llr = loglik_rate(em.model, val, ObsMode::kFull);
    std::vector<Mat> orig, synth;
    for (const auto& s : val) {
      orig.push_back(s.motion);
      synth.push_back(synthesize(em.model, s.speech));
    }
    row.val_cca_m = cca_m(orig, synth).mean;
    out.push_back(row);
  }
  return out;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "cca_m\t" << report.cca_m.mean << "\t+-\t" << report.cca_m.std << "\tturns\t"
     << report.cca_m.n << "\n";
  os << "cca_ms\t" << report.cca_ms.mean << "\t+-\t" << report.cca_ms.std << "\tturns\t"
     << report.cca_ms.n << "\n";
  os << "kld\t" << report.kld << "\n";
  os << "llr\t" << report.llr << "\n";
  for (const auto& [gesture, acc] : report.gesture_accuracy)
    os << "accuracy\t" << gesture << "\t" << acc << "\n";
  return os.str();
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "n_states\ttrain_llr\tval_llr\tval_cca_m\n";
  for (const auto& r : rows)
    os << r.n_states << "\t" << r.train_llr << "\t" << r.val_llr << "\t" << r.val_cca_m << "\n";
  return os.str();
}

}  // namespace gsyn
