#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gsyn/cdbn.hpp"
#include "gsyn/features.hpp"

namespace gsyn {

inline constexpr int kDatasetFormatVersion = 1;

// One dialog turn: speech features and joint rotations on a shared 120 fps
// frame clock, plus a per-frame constraint label.
struct TurnRecord {
  int id = 0;
  int subject = 0;
  Region region = Region::kHead;
  Mat speech;                       // T x 6
  Mat motion;                       // T x motion_dim(region)
  std::vector<std::string> labels;  // size T
};

struct Dataset {
  Region region = Region::kHead;
  ConstraintSet constraints;
  std::vector<int> subjects;
  // Per-subject z-norm stats for the speech features, keyed by the decimal
  // subject id. Turn files always store raw features; normalization is
  // applied on conversion.
  std::map<std::string, NormStats> norm;
  std::vector<TurnRecord> turns;

  void validate() const;
};

std::map<std::string, NormStats> compute_speech_norm(const Dataset& ds);
Mat normalized_speech(const Dataset& ds, const TurnRecord& turn);

std::vector<int> all_turn_indices(const Dataset& ds);
std::vector<LabeledSequence> to_labeled(const Dataset& ds,
                                        const std::vector<int>& turn_idx,
                                        bool normalize);
std::vector<Sequence> to_sequences(const Dataset& ds,
                                   const std::vector<int>& turn_idx,
                                   bool normalize);

// Sinusoidal motion prototype for one constraint.
struct MotionTemplate {
  int axis = 0;
  double freq_hz = 2.0;
  double amplitude = 10.0;  // degrees
  double offset = 0.0;      // constant bias on the same axis
};

struct SyntheticSpec {
  Region region = Region::kHead;
  std::vector<std::string> gesture_names{"nod", "shake"};
  // Keyed by gesture name; must also contain "other".
  std::map<std::string, MotionTemplate> templates;
  double coupling_gain = 0.5;  // energy -> amplitude modulation strength
  double noise_std = 0.5;      // iid per-frame motion noise, degrees
  int turns = 20;
  int subjects = 2;
  double min_len_s = 2.0;
  double max_len_s = 10.0;
  // Constraint-track block lengths; tracks alternate other/gesture blocks.
  double min_other_s = 0.6;
  double max_other_s = 1.5;
  double min_gesture_s = 0.6;
  double max_gesture_s = 1.5;
  std::uint64_t seed = 1;

  void validate() const;
};

SyntheticSpec default_synthetic_spec(Region region);

// JSON round-trip for spec files. Parsing starts from the region's default
// spec, so partial files only override what they mention.
SyntheticSpec synthetic_spec_from_json(const std::string& text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);

// Noise-free template trajectory at unit energy (for detector signatures).
Mat template_trajectory(const MotionTemplate& tpl, Region region,
                        Eigen::Index frames);

Dataset generate_synthetic(const SyntheticSpec& spec);

struct SplitRound {
  std::vector<int> train, validation, test;  // turn indices
};

struct Tenfold {
  std::vector<std::vector<int>> folds;  // 10 disjoint index sets
  int validation_fold = 0;              // fixed across rounds
  std::vector<SplitRound> rounds;       // 9 test rotations
};

Tenfold tenfold_splits(const Dataset& ds, std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace gsyn
