// Command-line front end: corpus generation, training, synthesis, retrieval,
// evaluation, and state-count sweeps over one shared config surface.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gsyn/corpus.hpp"
#include "gsyn/eval.hpp"
#include "gsyn/model_io.hpp"
#include "gsyn/retrieval.hpp"
#include "gsyn/smooth.hpp"
#include "gsyn/vq.hpp"
#include "json.hpp"

namespace {

using namespace gsyn;

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << content;
  if (!f) throw DataError("failed writing " + path);
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_tsv(const Mat& traj, double frame_rate) {
  std::string out;
  out.reserve(static_cast<size_t>(traj.rows()) * 96);
  for (Eigen::Index r = 0; r < traj.rows(); ++r) {
    out += fmt_full(static_cast<double>(r) / frame_rate);
    for (Eigen::Index c = 0; c < traj.cols(); ++c) {
      out += '\t';
      out += fmt_full(traj(r, c));
    }
    out += '\n';
  }
  return out;
}

int default_states(Region region, const std::string& mode) {
  if (mode == "none") return region == Region::kHead ? 7 : 12;
  if (mode == "discourse") return region == Region::kHead ? 7 : 8;
  return region == Region::kHead ? 8 : 9;  // gesture
}

GammaMode parse_gamma(const std::string& g) {
  return g == "viterbi" ? GammaMode::kViterbi : GammaMode::kSmoothed;
}

Mat stack_joint(const std::vector<Sequence>& seqs) {
  Eigen::Index total = 0;
  for (const auto& s : seqs) total += s.speech.rows();
  if (total == 0) throw DataError("no frames to train on");
  Mat joint(total, seqs.front().speech.cols() + seqs.front().motion.cols());
  Eigen::Index row = 0;
  for (const auto& s : seqs) {
    joint.block(row, 0, s.speech.rows(), s.speech.cols()) = s.speech;
    joint.block(row, s.speech.cols(), s.motion.rows(), s.motion.cols()) = s.motion;
    row += s.speech.rows();
  }
  return joint;
}

Mat stack_rows(const std::vector<Mat>& mats) {
  Eigen::Index total = 0;
  for (const auto& m : mats) total += m.rows();
  Mat out(total, mats.empty() ? 0 : mats.front().cols());
  Eigen::Index row = 0;
  for (const auto& m : mats) {
    out.middleRows(row, m.rows()) = m;
    row += m.rows();
  }
  return out;
}

const TurnRecord& find_turn(const Dataset& ds, int id) {
  for (const auto& t : ds.turns)
    if (t.id == id) return t;
  throw DataError("dataset has no turn with id " + std::to_string(id));
}

struct Opts {
  std::string data, model, out, specfile, emit_spec;
  std::string region = "head";
  std::string mode = "none";
  std::string gamma = "smoothed";
  std::string init = "vq";
  std::string splits = "tenfold";
  std::string exemplars;
  int states = 0;  // 0: default for region/constraint mode
  int max_iter = 50;
  double tol = 1e-6;
  int threads = 1;
  std::uint64_t seed = 1;
  int turns = 0;  // gen-corpus override
  int turn = 0;   // synth input turn id
  double rate = 0.0;
  bool squad = false;
  double merge_threshold = 1.0;
  std::vector<std::string> gestures;  // label=axis pairs for eval
  std::vector<int> scales{30, 60, 90, 120};
  double tolerance = 0.5;
  double sigma = 0.0;
  double radius = 3.0;
  double threshold = 0.0;
  std::vector<int> candidates;  // sweep-states
};

std::function<void(const std::string&)> warn_to_stderr() {
  return [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
}

EmOptions em_options(const Opts& o) {
  EmOptions em;
  em.max_iter = o.max_iter;
  em.tol = o.tol;
  em.threads = o.threads;
  em.warn = warn_to_stderr();
  return em;
}

void cmd_gen_corpus(const Opts& o) {
  SyntheticSpec spec;
  if (o.specfile.empty()) {
    spec = default_synthetic_spec(region_from_name(o.region));
  } else {
    spec = synthetic_spec_from_json(read_text_file(o.specfile));
  }
  if (o.turns > 0) spec.turns = o.turns;
  if (o.seed != 1) spec.seed = o.seed;
  spec.validate();
  if (!o.emit_spec.empty()) write_text_file(o.emit_spec, synthetic_spec_to_json(spec));
  const Dataset ds = generate_synthetic(spec);
  save_dataset(ds, o.out);
  Eigen::Index frames = 0;
  for (const auto& t : ds.turns) frames += t.speech.rows();
  std::cout << "dataset: " << o.out << "\n"
            << "region: " << region_name(ds.region) << "\n"
            << "constraints:";
  for (const auto& c : ds.constraints.labels) std::cout << ' ' << c;
  std::cout << "\nturns: " << ds.turns.size() << "\nsubjects: " << ds.subjects.size()
            << "\nframes: " << frames << "\n";
}

void cmd_train(const Opts& o) {
  const Dataset ds = load_dataset(o.data);
  const auto idx = all_turn_indices(ds);
  const int n_states = o.states > 0 ? o.states : default_states(ds.region, o.mode);
  const EmOptions em = em_options(o);
  std::vector<double> llr;
  if (o.mode == "none") {
    const auto seqs = to_sequences(ds, idx, true);
    const Mat joint = stack_joint(seqs);
    const StateInit si = o.init == "random"
                             ? init_states_random(joint, n_states, 6, o.seed)
                             : init_states(joint, n_states, 6);
    DbnModel init;
    init.states = si.states;
    init.trans = Mat::Constant(n_states, n_states, 1.0 / n_states);
    init.prior = Vec::Constant(n_states, 1.0 / n_states);
    const EmResult r = em_train(init, seqs, em);
    save_dbn(r.model, o.out);
    llr = r.llr_history;
    std::cout << "baseline model: " << n_states << " states\n";
  } else {
    const auto seqs = to_labeled(ds, idx, true);
    CdbnTrainOptions copts;
    copts.states_per_constraint = n_states;
    copts.merge_threshold = o.merge_threshold;
    copts.em = em;
    copts.refine.threads = o.threads;
    copts.refine.warn = em.warn;
    const CdbnTrainReport rep = train_cdbn(seqs, ds.constraints, copts);
    save_cdbn(rep.em.model, o.out);
    llr = rep.em.llr_history;
    std::cout << "cdbn model (" << o.mode << "): " << rep.em.model.n_states()
              << " merged states, " << n_states << " per constraint before merging\n";
  }
  std::string log = "iter\tllr\n";
  for (size_t i = 0; i < llr.size(); ++i)
    log += std::to_string(i) + "\t" + fmt_full(llr[i]) + "\n";
  write_text_file(o.out + ".log", log);
  std::cout << "iterations: " << llr.size() << "\nfinal llr: " << fmt_full(llr.back())
            << "\nmodel written to " << o.out << "\n";
}

void cmd_synth(const Opts& o) {
  const Dataset ds = load_dataset(o.data);
  const TurnRecord& turn = find_turn(ds, o.turn);
  const Mat speech = normalized_speech(ds, turn);
  const GammaMode gm = parse_gamma(o.gamma);
  Mat raw;
  if (model_format(o.model) == "gsyn-dbn") {
    raw = synthesize(load_dbn(o.model), speech, gm);
  } else {
    const CdbnModel m = load_cdbn(o.model);
    raw = constrained_synthesize(m, speech, track_indices(m.constraints, turn.labels), gm);
  }
  KeypointPlan plan = default_plan(ds.region);
  if (o.rate > 0) plan.rate = o.rate;
  plan.squad = o.squad;
  const Mat smoothed = smooth_trajectory(raw, ds.region, plan);
  write_text_file(o.out + "_raw.tsv", trajectory_tsv(raw, plan.frame_rate));
  write_text_file(o.out + "_smooth.tsv", trajectory_tsv(smoothed, plan.frame_rate));
  std::cout << "synthesized " << raw.rows() << " frames for turn " << o.turn << "\n"
            << "raw: " << o.out << "_raw.tsv\nsmoothed: " << o.out << "_smooth.tsv\n";
}

void cmd_eval(const Opts& o) {
  const Dataset ds = load_dataset(o.data);
  std::vector<int> eval_idx;
  if (o.splits == "all") {
    eval_idx = all_turn_indices(ds);
  } else {
    const Tenfold tf = tenfold_splits(ds, o.seed);
    for (const auto& round : tf.rounds)
      eval_idx.insert(eval_idx.end(), round.test.begin(), round.test.end());
    std::sort(eval_idx.begin(), eval_idx.end());
  }
  const GammaMode gm = parse_gamma(o.gamma);
  const auto warn = warn_to_stderr();
  EvalReport rep;
  std::vector<Mat> orig, synth, speech;
  if (model_format(o.model) == "gsyn-dbn") {
    const DbnModel m = load_dbn(o.model);
    const auto seqs = to_sequences(ds, eval_idx, true);
    for (const auto& s : seqs) {
      speech.push_back(s.speech);
      orig.push_back(s.motion);
      synth.push_back(synthesize(m, s.speech, gm));
    }
    rep.llr = loglik_rate(m, seqs, ObsMode::kFull);
    if (!o.gestures.empty())
      throw DataError("gesture accuracy needs a constraint-conditioned model");
  } else {
    const CdbnModel m = load_cdbn(o.model);
    if (m.constraints.labels != ds.constraints.labels)
      throw DataError("model constraint set does not match the dataset");
    const auto seqs = to_labeled(ds, eval_idx, true);
    for (const auto& s : seqs) {
      speech.push_back(s.speech);
      orig.push_back(s.motion);
      synth.push_back(constrained_synthesize(m, s.speech, s.labels, gm));
    }
    rep.llr = constrained_loglik_rate(m, seqs, ObsMode::kFull);
    for (const auto& spec : o.gestures) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos)
        throw DataError("--gesture expects label=axis, got '" + spec + "'");
      const std::string label = spec.substr(0, eq);
      int axis = 0;
      try {
        axis = std::stoi(spec.substr(eq + 1));
      } catch (const std::exception&) {
        throw DataError("--gesture axis is not a number in '" + spec + "'");
      }
      rep.gesture_accuracy[label] =
          gesture_accuracy(m, speech, label, oscillation_axis_detector(axis));
    }
  }
  rep.cca_m = cca_m(orig, synth, warn);
  rep.cca_ms = cca_ms(synth, speech, warn);
  rep.kld = kld_metric(stack_rows(orig), stack_rows(synth));
  const std::string text = format_report(rep);
  std::cout << text;
  if (!o.out.empty()) write_text_file(o.out, text);
}

void cmd_retrieve(const Opts& o) {
  const Dataset ds = load_dataset(o.data);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(o.exemplars));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("exemplar file is not valid JSON: " + std::string(e.what()));
  }
  std::map<std::string, std::vector<Mat>> exemplars;
  try {
    for (auto it = j.at("gestures").begin(); it != j.at("gestures").end(); ++it) {
      for (const auto& seg : it.value()) {
        const TurnRecord& turn = find_turn(ds, seg.at("turn").get<int>());
        const auto start = seg.at("start").get<Eigen::Index>();
        const auto end = seg.at("end").get<Eigen::Index>();
        if (start < 0 || end <= start || end > turn.motion.rows())
          throw DataError("exemplar span [" + std::to_string(start) + ", " +
                          std::to_string(end) + ") out of range for turn " +
                          std::to_string(turn.id));
        exemplars[it.key()].push_back(turn.motion.middleRows(start, end - start));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("exemplar file is malformed: " + std::string(e.what()));
  }
  if (exemplars.empty()) throw DataError("exemplar file lists no gestures");

  std::vector<GestureTruth> truth;
  for (const auto& t : ds.turns) {
    size_t start = 0;
    while (start < t.labels.size()) {
      size_t end = start;
      while (end < t.labels.size() && t.labels[end] == t.labels[start]) ++end;
      if (exemplars.count(t.labels[start]))
        truth.push_back(GestureTruth{t.labels[start], t.id,
                                     static_cast<Eigen::Index>(start),
                                     static_cast<Eigen::Index>(end)});
      start = end;
    }
  }

  std::vector<RetrievalInput> inputs;
  for (const auto& t : ds.turns)
    inputs.push_back(RetrievalInput{t.id, t.subject, t.motion});

  RetrievalConfig cfg;
  cfg.scales = o.scales;
  cfg.tolerance = o.tolerance;
  cfg.sigma = o.sigma;
  cfg.radius = o.radius;
  cfg.threads = o.threads;
  if (o.threshold > 0)
    for (int s : ds.subjects) cfg.thresholds[s] = o.threshold;
  const RetrievalResult res = retrieve(inputs, exemplars, cfg, &truth);

  std::string out = "turn\tstart\tend\tlabel\tscore\n";
  for (const auto& seg : res.segments)
    out += std::to_string(seg.turn) + "\t" + std::to_string(seg.start) + "\t" +
           std::to_string(seg.end) + "\t" + seg.label + "\t" + fmt_full(seg.score) + "\n";
  write_text_file(o.out, out);
  for (const auto& [label, prec] : res.precision)
    std::cout << label << ": precision " << prec << " over "
              << res.detections.at(label) << " detections\n";
  std::cout << "overall precision: " << res.overall_precision << "\nsegments written to "
            << o.out << "\n";
}

void cmd_sweep_states(const Opts& o) {
  const Dataset ds = load_dataset(o.data);
  const Tenfold tf = tenfold_splits(ds, o.seed);
  std::vector<int> train_idx;
  for (int f = 1; f < 10; ++f)
    train_idx.insert(train_idx.end(), tf.folds[static_cast<size_t>(f)].begin(),
                     tf.folds[static_cast<size_t>(f)].end());
  std::sort(train_idx.begin(), train_idx.end());
  const auto rows = state_count_sweep(to_sequences(ds, train_idx, true),
                                      to_sequences(ds, tf.folds[0], true), o.candidates,
                                      em_options(o));
  const std::string text = format_sweep(rows);
  std::cout << text;
  if (!o.out.empty()) write_text_file(o.out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained speech-driven behavior synthesis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (INI/TOML; keys mirror long flags)");
  Opts o;

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic dataset");
  gen->add_option("--spec", o.specfile, "Synthetic spec JSON (defaults per region)");
  gen->add_option("--region", o.region, "head|hand, used when no spec file is given")
      ->check(CLI::IsMember({"head", "hand"}));
  gen->add_option("--turns", o.turns, "Override turn count");
  gen->add_option("--seed", o.seed, "Override spec seed");
  gen->add_option("--emit-spec", o.emit_spec, "Also write the effective spec JSON here");
  gen->add_option("--out", o.out, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  train->add_option("--data", o.data, "Dataset directory")->required();
  train->add_option("--out", o.out, "Model file to write")->required();
  train->add_option("--constraint-mode", o.mode, "none|discourse|gesture")
      ->check(CLI::IsMember({"none", "discourse", "gesture"}));
  train->add_option("--states", o.states,
                    "States (baseline) or states per constraint (0: region default)");
  train->add_option("--init", o.init, "vq|random state initialization")
      ->check(CLI::IsMember({"vq", "random"}));
  train->add_option("--max-iter", o.max_iter, "EM iterations");
  train->add_option("--tol", o.tol, "EM convergence tolerance on LLR");
  train->add_option("--merge-threshold", o.merge_threshold, "KL merge threshold");
  train->add_option("--threads", o.threads, "Worker threads (1: bit-reproducible)");
  train->add_option("--seed", o.seed, "Seed for random initialization");

  auto* synth = app.add_subcommand("synth", "Synthesize motion for one dataset turn");
  synth->add_option("--model", o.model, "Trained model file")->required();
  synth->add_option("--data", o.data, "Dataset directory")->required();
  synth->add_option("--turn", o.turn, "Turn id supplying speech + constraint track")
      ->required();
  synth->add_option("--gamma", o.gamma, "smoothed|viterbi")
      ->check(CLI::IsMember({"smoothed", "viterbi"}));
  synth->add_option("--rate", o.rate, "Keypoints per second (0: region default)");
  synth->add_flag("--squad", o.squad, "Spline quaternion interpolation");
  synth->add_option("--out", o.out, "Output prefix (_raw.tsv, _smooth.tsv)")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a model on test folds");
  eval->add_option("--model", o.model, "Trained model file")->required();
  eval->add_option("--data", o.data, "Dataset directory")->required();
  eval->add_option("--splits", o.splits, "tenfold|all (default tenfold test folds)")
      ->check(CLI::IsMember({"tenfold", "all"}));
  eval->add_option("--gamma", o.gamma, "smoothed|viterbi")
      ->check(CLI::IsMember({"smoothed", "viterbi"}));
  eval->add_option("--seed", o.seed, "Split seed");
  eval->add_option("--gesture", o.gestures,
                   "label=axis -> also report gesture accuracy (repeatable)");
  eval->add_option("--out", o.out, "Report file (also printed)");

  auto* retr = app.add_subcommand("retrieve", "Retrieve gesture segments by exemplar");
  retr->add_option("--data", o.data, "Dataset directory")->required();
  retr->add_option("--exemplars", o.exemplars, "Exemplar spans JSON")->required();
  retr->add_option("--scales", o.scales, "Window scales in downsampled steps")
      ->delimiter(',');
  retr->add_option("--tolerance", o.tolerance, "Downsampling tolerance");
  retr->add_option("--sigma", o.sigma, "DTAK bandwidth (0: median heuristic)");
  retr->add_option("--radius", o.radius, "Envelope screen radius");
  retr->add_option("--threshold", o.threshold, "Score threshold for all subjects");
  retr->add_option("--threads", o.threads, "Worker threads");
  retr->add_option("--out", o.out, "Segment file to write")->required();

  auto* sweep = app.add_subcommand("sweep-states", "Train/validation sweep over N");
  sweep->add_option("--data", o.data, "Dataset directory")->required();
  sweep->add_option("--states-list", o.candidates, "Candidate state counts")
      ->delimiter(',')
      ->required();
  sweep->add_option("--max-iter", o.max_iter, "EM iterations");
  sweep->add_option("--tol", o.tol, "EM convergence tolerance on LLR");
  sweep->add_option("--threads", o.threads, "Worker threads");
  sweep->add_option("--seed", o.seed, "Split seed");
  sweep->add_option("--out", o.out, "Report file (also printed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(gen)) cmd_gen_corpus(o);
    if (app.got_subcommand(train)) cmd_train(o);
    if (app.got_subcommand(synth)) cmd_synth(o);
    if (app.got_subcommand(eval)) cmd_eval(o);
    if (app.got_subcommand(retr)) cmd_retrieve(o);
    if (app.got_subcommand(sweep)) cmd_sweep_states(o);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
