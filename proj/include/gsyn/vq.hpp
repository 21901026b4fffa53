#pragma once

#include <cstdint>
#include <vector>

#include "gsyn/states.hpp"

namespace gsyn {

struct Codebook {
  Mat centroids;                 // size x d
  std::vector<int> assignments;  // nearest centroid per training vector
  double distortion = 0.0;       // mean squared quantization error
};

// Linde-Buzo-Gray split-and-refine quantization. size must be a power of two
// and n >= size. Starts from the global mean, splits each centroid into
// c*(1 +/- eps_split), then runs Lloyd iterations to convergence (relative
// distortion change < 1e-6 or max_iter).
Codebook lbg(const Mat& data, int size, double eps_split = 0.01, int max_iter = 100);

struct StateInit {
  std::vector<GaussianState> states;
  std::vector<double> occupancy;  // cluster sizes, aligned with states
};

// Turns joint (speech | motion) rows into N hidden-state Gaussians: LBG to the
// smallest power of two >= N, then merges the cheapest cluster pairs (pooled
// distortion increase, Ward) until N remain. Requires n >= 10 * N.
StateInit init_states(const Mat& joint_data, int n_states, int speech_dim);

// Random-partition baseline used only for initialization comparisons: each row
// is assigned to a uniformly random state, states take their partition moments.
StateInit init_states_random(const Mat& joint_data, int n_states, int speech_dim,
                             std::uint64_t seed);

}  // namespace gsyn
