#include "gsyn/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gsyn {

namespace {

constexpr double kFrameRate = 120.0;
constexpr double kContourRate = 60.0;

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e)
    throw DataError("invalid numeric field '" + s + "' in " + where);
  return v;
}

std::string turn_filename(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "turn_%04d.tsv", id);
  return buf;
}

}  // namespace

void Dataset::validate() const {
  constraints.validate();
  if (subjects.empty()) throw DataError("dataset has no subjects");
  std::vector<int> sorted = subjects;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DataError("duplicate subject id in dataset");
  const Eigen::Index dm = motion_dim(region);
  for (const auto& t : turns) {
    if (t.region != region)
      throw DataError("turn " + std::to_string(t.id) +
                      " region differs from dataset region");
    if (std::find(subjects.begin(), subjects.end(), t.subject) ==
        subjects.end())
      throw DataError("turn " + std::to_string(t.id) +
                      " references unknown subject " +
                      std::to_string(t.subject));
    if (t.speech.rows() < 1)
      throw DataError("turn " + std::to_string(t.id) + " is empty");
    if (t.speech.cols() != 6)
      throw DataError("turn " + std::to_string(t.id) +
                      " speech must have 6 columns");
    if (t.motion.rows() != t.speech.rows() || t.motion.cols() != dm)
      throw DataError("turn " + std::to_string(t.id) +
                      " motion shape does not match speech/region");
    if (static_cast<Eigen::Index>(t.labels.size()) != t.speech.rows())
      throw DataError("turn " + std::to_string(t.id) +
                      " label track length mismatch");
    for (const auto& lab : t.labels) constraints.index(lab);  // throws if unknown
  }
  for (const auto& [subj, st] : norm) {
    if (st.mean.size() != 6 || st.std.size() != 6)
      throw DataError("normalization stats for subject " + subj +
                      " must cover 6 speech dims");
    if ((st.std.array() <= 0.0).any())
      throw DataError("normalization std must be positive (subject " + subj +
                      ")");
  }
}

std::map<std::string, NormStats> compute_speech_norm(const Dataset& ds) {
  Eigen::Index total = 0;
  for (const auto& t : ds.turns) total += t.speech.rows();
  if (total == 0) throw DataError("cannot compute norm stats: no frames");
  Mat stacked(total, 6);
  std::vector<std::string> ids;
  ids.reserve(static_cast<size_t>(total));
  Eigen::Index row = 0;
  for (const auto& t : ds.turns) {
    stacked.middleRows(row, t.speech.rows()) = t.speech;
    ids.insert(ids.end(), static_cast<size_t>(t.speech.rows()),
               std::to_string(t.subject));
    row += t.speech.rows();
  }
  return znorm_per_subject(stacked, ids).stats;
}

Mat normalized_speech(const Dataset& ds, const TurnRecord& turn) {
  auto it = ds.norm.find(std::to_string(turn.subject));
  if (it == ds.norm.end())
    throw DataError("no normalization stats for subject " +
                    std::to_string(turn.subject));
  return apply_znorm(turn.speech, it->second);
}

std::vector<int> all_turn_indices(const Dataset& ds) {
  std::vector<int> idx(ds.turns.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

std::vector<LabeledSequence> to_labeled(const Dataset& ds,
                                        const std::vector<int>& turn_idx,
                                        bool normalize) {
  std::vector<LabeledSequence> out;
  out.reserve(turn_idx.size());
  for (int i : turn_idx) {
    if (i < 0 || static_cast<size_t>(i) >= ds.turns.size())
      throw DataError("turn index " + std::to_string(i) + " out of range");
    const auto& t = ds.turns[static_cast<size_t>(i)];
    LabeledSequence seq;
    seq.speech = normalize ? normalized_speech(ds, t) : t.speech;
    seq.motion = t.motion;
    seq.labels.reserve(t.labels.size());
    for (const auto& lab : t.labels)
      seq.labels.push_back(ds.constraints.index(lab));
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<Sequence> to_sequences(const Dataset& ds,
                                   const std::vector<int>& turn_idx,
                                   bool normalize) {
  std::vector<Sequence> out;
  out.reserve(turn_idx.size());
  for (auto& seq : to_labeled(ds, turn_idx, normalize))
    out.push_back(Sequence{std::move(seq.speech), std::move(seq.motion)});
  return out;
}

void SyntheticSpec::validate() const {
  if (turns < 1) throw DataError("synthetic spec needs at least one turn");
  if (subjects < 1) throw DataError("synthetic spec needs at least one subject");
  if (!(min_len_s >= 0.5) || !(max_len_s >= min_len_s))
    throw DataError("synthetic turn length range is invalid");
  if (!(min_other_s >= 0.05) || !(max_other_s >= min_other_s) ||
      !(min_gesture_s >= 0.05) || !(max_gesture_s >= min_gesture_s))
    throw DataError("synthetic block length range is invalid");
  if (!(noise_std >= 0.0)) throw DataError("noise std must be >= 0");
  if (!(coupling_gain >= 0.0)) throw DataError("coupling gain must be >= 0");
  const int dm = static_cast<int>(motion_dim(region));
  std::vector<std::string> needed = gesture_names;
  needed.push_back("other");
  for (const auto& name : needed) {
    auto it = templates.find(name);
    if (it == templates.end())
      throw DataError("missing motion template for constraint '" + name + "'");
    const auto& tpl = it->second;
    if (tpl.axis < 0 || tpl.axis >= dm)
      throw DataError("template '" + name + "' axis out of range");
    if (!(tpl.freq_hz > 0.0) || !(tpl.freq_hz <= 10.0))
      throw DataError("template '" + name + "' frequency must be in (0, 10] Hz");
    if (!(tpl.amplitude > 0.0))
      throw DataError("template '" + name + "' amplitude must be positive");
  }
}

SyntheticSpec default_synthetic_spec(Region region) {
  SyntheticSpec spec;
  spec.region = region;
  if (region == Region::kHead) {
    spec.gesture_names = {"nod", "shake"};
    spec.templates["nod"] = MotionTemplate{0, 2.0, 12.0, 0.0};
    spec.templates["shake"] = MotionTemplate{1, 2.5, 12.0, 0.0};
    spec.templates["other"] = MotionTemplate{2, 0.7, 2.0, 0.0};
  } else {
    spec.gesture_names = {"to_fro", "so_what"};
    spec.templates["to_fro"] = MotionTemplate{0, 1.5, 15.0, 0.0};
    spec.templates["so_what"] = MotionTemplate{6, 2.0, 15.0, 0.0};
    spec.templates["other"] = MotionTemplate{3, 0.6, 3.0, 0.0};
  }
  return spec;
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("spec file is not valid JSON: " + std::string(e.what()));
  }
  try {
    const Region region =
        region_from_name(j.value("region", std::string("head")));
    SyntheticSpec spec = default_synthetic_spec(region);
    if (j.contains("gestures")) {
      spec.gesture_names = j.at("gestures").get<std::vector<std::string>>();
      // A custom gesture list invalidates the default templates for names no
      // longer present; keep "other" and any still-relevant entries.
      std::map<std::string, MotionTemplate> kept;
      kept["other"] = spec.templates.at("other");
      for (const auto& g : spec.gesture_names) {
        auto it = spec.templates.find(g);
        if (it != spec.templates.end()) kept[g] = it->second;
      }
      spec.templates = std::move(kept);
    }
    if (j.contains("templates"))
      for (auto it = j.at("templates").begin(); it != j.at("templates").end();
           ++it) {
        MotionTemplate tpl;
        auto existing = spec.templates.find(it.key());
        if (existing != spec.templates.end()) tpl = existing->second;
        const json& e = it.value();
        tpl.axis = e.value("axis", tpl.axis);
        tpl.freq_hz = e.value("freq_hz", tpl.freq_hz);
        tpl.amplitude = e.value("amplitude", tpl.amplitude);
        tpl.offset = e.value("offset", tpl.offset);
        spec.templates[it.key()] = tpl;
      }
    spec.coupling_gain = j.value("coupling_gain", spec.coupling_gain);
    spec.noise_std = j.value("noise_std", spec.noise_std);
    spec.turns = j.value("turns", spec.turns);
    spec.subjects = j.value("subjects", spec.subjects);
    spec.min_len_s = j.value("min_len_s", spec.min_len_s);
    spec.max_len_s = j.value("max_len_s", spec.max_len_s);
    spec.min_other_s = j.value("min_other_s", spec.min_other_s);
    spec.max_other_s = j.value("max_other_s", spec.max_other_s);
    spec.min_gesture_s = j.value("min_gesture_s", spec.min_gesture_s);
    spec.max_gesture_s = j.value("max_gesture_s", spec.max_gesture_s);
    spec.seed = j.value("seed", spec.seed);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw DataError("spec file is malformed: " + std::string(e.what()));
  }
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["region"] = region_name(spec.region);
  j["gestures"] = spec.gesture_names;
  json tpls = json::object();
  for (const auto& [name, tpl] : spec.templates) {
    json e;
    e["axis"] = tpl.axis;
    e["freq_hz"] = tpl.freq_hz;
    e["amplitude"] = tpl.amplitude;
    e["offset"] = tpl.offset;
    tpls[name] = std::move(e);
  }
  j["templates"] = std::move(tpls);
  j["coupling_gain"] = spec.coupling_gain;
  j["noise_std"] = spec.noise_std;
  j["turns"] = spec.turns;
  j["subjects"] = spec.subjects;
  j["min_len_s"] = spec.min_len_s;
  j["max_len_s"] = spec.max_len_s;
  j["min_other_s"] = spec.min_other_s;
  j["max_other_s"] = spec.max_other_s;
  j["min_gesture_s"] = spec.min_gesture_s;
  j["max_gesture_s"] = spec.max_gesture_s;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

Mat template_trajectory(const MotionTemplate& tpl, Region region,
                        Eigen::Index frames) {
  if (frames < 1) throw DataError("template trajectory needs frames >= 1");
  Mat out = Mat::Zero(frames, motion_dim(region));
  for (Eigen::Index t = 0; t < frames; ++t)
    out(t, tpl.axis) = tpl.offset + tpl.amplitude * std::sin(2.0 * M_PI * tpl.freq_hz *
                                                             static_cast<double>(t) / kFrameRate);
  return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uni = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto uni_int = [&rng](long lo, long hi) {
    return std::uniform_int_distribution<long>(lo, hi)(rng);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double two_pi = 2.0 * M_PI;
  const Eigen::Index dm = motion_dim(spec.region);

  Dataset ds;
  ds.region = spec.region;
  ds.constraints = ConstraintSet::including_other(spec.gesture_names);
  for (int s = 0; s < spec.subjects; ++s) ds.subjects.push_back(s);

  for (int turn = 0; turn < spec.turns; ++turn) {
    TurnRecord rec;
    rec.id = turn;
    rec.subject = turn % spec.subjects;
    rec.region = spec.region;

    const long t60 = uni_int(std::lround(spec.min_len_s * kContourRate),
                             std::lround(spec.max_len_s * kContourRate));
    const long t120 = 2 * t60;

    // Prosody: smooth sinusoidal energy around 1.0 and an f0 contour with
    // short unvoiced gaps, both on the 60 fps contour clock.
    const double ef = uni(0.2, 0.5), ep = uni(0.0, two_pi);
    const double pf = uni(0.3, 0.8), pp = uni(0.0, two_pi);
    const double f0_base = 110.0 + 15.0 * rec.subject;
    ProsodyContour contour;
    contour.frame_rate = kContourRate;
    contour.energy.resize(static_cast<size_t>(t60));
    contour.f0.resize(static_cast<size_t>(t60));
    for (long t = 0; t < t60; ++t) {
      const double tu = static_cast<double>(t) / kContourRate;
      contour.energy[static_cast<size_t>(t)] =
          1.0 + 0.5 * std::sin(two_pi * ef * tu + ep);
      contour.f0[static_cast<size_t>(t)] =
          f0_base + 25.0 * std::sin(two_pi * pf * tu + pp);
    }
    long cursor = 0;
    bool voiced = true;
    while (cursor < t60) {
      const long run = voiced ? uni_int(20, 60) : uni_int(3, 8);
      if (!voiced)
        for (long u = cursor; u < std::min(cursor + run, t60); ++u)
          contour.f0[static_cast<size_t>(u)].reset();
      cursor += run;
      voiced = !voiced;
    }
    rec.speech = build_speech_features(contour, kFrameRate);
    if (rec.speech.rows() != t120)
      throw NumericError("synthetic speech length mismatch");

    // Constraint track: alternating blocks of "other" and a random gesture.
    rec.labels.assign(static_cast<size_t>(t120), "other");
    bool gesture_block = false;
    long t = 0;
    while (t < t120) {
      const long lo = std::lround((gesture_block ? spec.min_gesture_s : spec.min_other_s) * kFrameRate);
      const long hi = std::lround((gesture_block ? spec.max_gesture_s : spec.max_other_s) * kFrameRate);
      const long dur = std::min(uni_int(lo, hi), t120 - t);
      if (gesture_block && !spec.gesture_names.empty()) {
        const auto& name = spec.gesture_names[static_cast<size_t>(uni_int(
            0, static_cast<long>(spec.gesture_names.size()) - 1))];
        for (long u = t; u < t + dur; ++u)
          rec.labels[static_cast<size_t>(u)] = name;
      }
      t += dur;
      gesture_block = !gesture_block;
    }

    // Motion: per-frame template sinusoid with energy-modulated amplitude.
    // The modulating energy is the value stored in the speech features, so
    // speech and motion stay mutually consistent.
    const Vec energy = rec.speech.col(1);
    rec.motion = Mat::Zero(t120, dm);
    for (long u = 0; u < t120; ++u) {
      const auto& tpl = spec.templates.at(rec.labels[static_cast<size_t>(u)]);
      const double amp =
          tpl.amplitude * (1.0 + spec.coupling_gain * (energy[u] - 1.0));
      rec.motion(u, tpl.axis) +=
          tpl.offset +
          amp * std::sin(two_pi * tpl.freq_hz * static_cast<double>(u) / kFrameRate);
      for (Eigen::Index d = 0; d < dm; ++d)
        rec.motion(u, d) += spec.noise_std * gauss(rng);
    }
    ds.turns.push_back(std::move(rec));
  }

  ds.norm = compute_speech_norm(ds);
  ds.validate();
  return ds;
}

Tenfold tenfold_splits(const Dataset& ds, std::uint64_t seed) {
  const int n = static_cast<int>(ds.turns.size());
  if (n < 10) throw DataError("tenfold split needs at least 10 turns");
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  // Fisher-Yates with explicit draws so the permutation depends only on the
  // seed, not on library shuffle internals.
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<size_t>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[j]);
  }
  Tenfold split;
  split.folds.assign(10, {});
  for (int i = 0; i < n; ++i)
    split.folds[static_cast<size_t>(i % 10)].push_back(order[static_cast<size_t>(i)]);
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  split.validation_fold = 0;
  for (int r = 1; r < 10; ++r) {
    SplitRound round;
    round.test = split.folds[static_cast<size_t>(r)];
    round.validation = split.folds[0];
    for (int f = 0; f < 10; ++f)
      if (f != r)
        round.train.insert(round.train.end(),
                           split.folds[static_cast<size_t>(f)].begin(),
                           split.folds[static_cast<size_t>(f)].end());
    std::sort(round.train.begin(), round.train.end());
    split.rounds.push_back(std::move(round));
  }
  return split;
}

namespace {

std::string turn_tsv(const TurnRecord& t) {
  std::string out;
  const auto rows = t.speech.rows();
  out.reserve(static_cast<size_t>(rows) * 160);
  for (Eigen::Index r = 0; r < rows; ++r) {
    out += fmt_full(static_cast<double>(r) / kFrameRate);
    for (Eigen::Index c = 0; c < t.speech.cols(); ++c) {
      out += '\t';
      out += fmt_full(t.speech(r, c));
    }
    for (Eigen::Index c = 0; c < t.motion.cols(); ++c) {
      out += '\t';
      out += fmt_full(t.motion(r, c));
    }
    out += '\t';
    out += t.labels[static_cast<size_t>(r)];
    out += '\n';
  }
  return out;
}

json norm_json(const std::map<std::string, NormStats>& norm) {
  json j = json::object();
  for (const auto& [subj, st] : norm) {
    json e;
    e["mean"] = std::vector<double>(st.mean.data(), st.mean.data() + st.mean.size());
    e["std"] = std::vector<double>(st.std.data(), st.std.data() + st.std.size());
    e["flat_dims"] = st.flat_dims;
    j[subj] = std::move(e);
  }
  return j;
}

std::map<std::string, NormStats> parse_norm(const json& j) {
  std::map<std::string, NormStats> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    NormStats st;
    const auto mean = it.value().at("mean").get<std::vector<double>>();
    const auto sd = it.value().at("std").get<std::vector<double>>();
    st.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    st.std = Eigen::Map<const Vec>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    st.flat_dims = it.value().at("flat_dims").get<std::vector<int>>();
    out[it.key()] = std::move(st);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  ds.validate();
  for (const auto& lab : ds.constraints.labels)
    if (lab.find_first_of("\t\n\r ") != std::string::npos)
      throw DataError("constraint label '" + lab + "' contains whitespace");
  fs::create_directories(dir);
  json turns = json::array();
  for (const auto& t : ds.turns) {
    const std::string content = turn_tsv(t);
    const std::string file = turn_filename(t.id);
    std::ofstream f(fs::path(dir) / file, std::ios::binary);
    if (!f) throw DataError("cannot write turn file " + file);
    f << content;
    if (!f) throw DataError("failed writing turn file " + file);
    json e;
    e["id"] = t.id;
    e["subject"] = t.subject;
    e["file"] = file;
    e["frames"] = static_cast<long>(t.speech.rows());
    e["checksum"] = to_hex(fnv1a64(content));
    turns.push_back(std::move(e));
  }
  json manifest;
  manifest["format"] = "gsyn-dataset";
  manifest["version"] = kDatasetFormatVersion;
  manifest["region"] = region_name(ds.region);
  manifest["constraints"] = ds.constraints.labels;
  manifest["subjects"] = ds.subjects;
  manifest["norm"] = norm_json(ds.norm);
  manifest["turns"] = std::move(turns);
  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw DataError("cannot write manifest.json in " + dir);
  mf << manifest.dump(2) << '\n';
  if (!mf) throw DataError("failed writing manifest.json in " + dir);
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  json manifest;
  try {
    manifest = json::parse(read_file(root / "manifest.json"));
  } catch (const json::exception& e) {
    throw DataError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format").get<std::string>() != "gsyn-dataset")
      throw DataError("not a dataset manifest: " + dir);
    const int version = manifest.at("version").get<int>();
    if (version != kDatasetFormatVersion)
      throw DataError("unsupported dataset format version " +
                      std::to_string(version) + " (reader supports " +
                      std::to_string(kDatasetFormatVersion) + ")");
    Dataset ds;
    ds.region = region_from_name(manifest.at("region").get<std::string>());
    ds.constraints.labels =
        manifest.at("constraints").get<std::vector<std::string>>();
    ds.subjects = manifest.at("subjects").get<std::vector<int>>();
    ds.norm = parse_norm(manifest.at("norm"));
    const Eigen::Index dm = motion_dim(ds.region);
    for (const auto& e : manifest.at("turns")) {
      TurnRecord rec;
      rec.id = e.at("id").get<int>();
      rec.subject = e.at("subject").get<int>();
      rec.region = ds.region;
      const auto file = e.at("file").get<std::string>();
      const auto frames = e.at("frames").get<long>();
      const std::string content = read_file(root / file);
      if (to_hex(fnv1a64(content)) != e.at("checksum").get<std::string>())
        throw DataError("checksum mismatch for turn file " + file);
      rec.speech.resize(frames, 6);
      rec.motion.resize(frames, dm);
      rec.labels.reserve(static_cast<size_t>(frames));
      std::istringstream lines(content);
      std::string line;
      Eigen::Index row = 0;
      const size_t n_cols = static_cast<size_t>(8 + dm);
      while (std::getline(lines, line)) {
        if (row >= frames)
          throw DataError("turn file " + file + " has more rows than declared");
        std::vector<std::string> cols;
        size_t start = 0;
        while (true) {
          const size_t tab = line.find('\t', start);
          cols.push_back(line.substr(start, tab - start));
          if (tab == std::string::npos) break;
          start = tab + 1;
        }
        if (cols.size() != n_cols)
          throw DataError("turn file " + file + " row " + std::to_string(row) +
                          " has " + std::to_string(cols.size()) +
                          " columns, expected " + std::to_string(n_cols));
        const std::string where = file + " row " + std::to_string(row);
        parse_double(cols[0], where);  // timestamp, informational only
        for (Eigen::Index c = 0; c < 6; ++c)
          rec.speech(row, c) = parse_double(cols[static_cast<size_t>(1 + c)], where);
        for (Eigen::Index c = 0; c < dm; ++c)
          rec.motion(row, c) = parse_double(cols[static_cast<size_t>(7 + c)], where);
        rec.labels.push_back(cols.back());
        ++row;
      }
      if (row != frames)
        throw DataError("turn file " + file + " has " + std::to_string(row) +
                        " rows, manifest declares " + std::to_string(frames));
      ds.turns.push_back(std::move(rec));
    }
    ds.validate();
    return ds;
  } catch (const json::exception& e) {
    throw DataError("dataset manifest malformed: " + std::string(e.what()));
  }
}

}  // namespace gsyn
