#include "gsyn/vq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gsyn {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Assignment step. Returns new distortion; fills assignments and counts.
double assign_points(const Mat& data, const Mat& centroids, std::vector<int>& assignments,
                     std::vector<long>& counts) {
  const auto n = data.rows();
  const auto k = centroids.rows();
  counts.assign(static_cast<size_t>(k), 0);
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = (data.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignments[static_cast<size_t>(i)] = best;
    ++counts[static_cast<size_t>(best)];
    total += best_d;
  }
  return total / static_cast<double>(n);
}

// Reseed an empty centroid at the point of the largest cluster farthest from
// its centroid.
void reseed_empty(const Mat& data, Mat& centroids, std::vector<int>& assignments,
                  std::vector<long>& counts, int empty) {
  const int largest = static_cast<int>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
  double worst = -1;
  Eigen::Index pick = -1;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (assignments[static_cast<size_t>(i)] != largest) continue;
    const double d = (data.row(i) - centroids.row(largest)).squaredNorm();
    if (d > worst) {
      worst = d;
      pick = i;
    }
  }
  centroids.row(empty) = data.row(pick);
  assignments[static_cast<size_t>(pick)] = empty;
  ++counts[static_cast<size_t>(empty)];
  --counts[static_cast<size_t>(largest)];
}

double lloyd(const Mat& data, Mat& centroids, std::vector<int>& assignments, int max_iter) {
  std::vector<long> counts;
  double dist = assign_points(data, centroids, assignments, counts);
  for (int it = 0; it < max_iter; ++it) {
    // recompute means for current assignments, handle empties first
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
      while (counts[static_cast<size_t>(c)] == 0)
        reseed_empty(data, centroids, assignments, counts, static_cast<int>(c));
    Mat sums = Mat::Zero(centroids.rows(), centroids.cols());
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      sums.row(assignments[static_cast<size_t>(i)]) += data.row(i);
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
      centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<size_t>(c)]);

    const double next = assign_points(data, centroids, assignments, counts);
    if (next > dist * (1.0 + 1e-12) + 1e-30)
      throw NumericError("lbg: Lloyd step increased distortion");
    const double rel = dist > 0 ? (dist - next) / dist : 0.0;
    dist = next;
    if (rel < 1e-6) break;
  }
  return dist;
}

}  // namespace

Codebook lbg(const Mat& data, int size, double eps_split, int max_iter) {
  if (data.rows() == 0) throw DataError("lbg: empty data");
  if (!is_power_of_two(size)) throw DataError("lbg: size must be a power of two");
  if (data.rows() < size) throw DataError("lbg: fewer points than codebook size");

  Codebook cb;
  cb.centroids = data.colwise().mean();
  cb.assignments.assign(static_cast<size_t>(data.rows()), 0);
  std::vector<long> counts;
  cb.distortion = assign_points(data, cb.centroids, cb.assignments, counts);

  while (cb.centroids.rows() < size) {
    const auto k = cb.centroids.rows();
    Mat split(2 * k, cb.centroids.cols());
    for (Eigen::Index c = 0; c < k; ++c) {
      split.row(2 * c) = cb.centroids.row(c) * (1.0 + eps_split);
      split.row(2 * c + 1) = cb.centroids.row(c) * (1.0 - eps_split);
    }
    cb.centroids = std::move(split);
    const double prev = cb.distortion;
    cb.distortion = lloyd(data, cb.centroids, cb.assignments, max_iter);
    if (cb.distortion > prev * (1.0 + 1e-9) + 1e-30)
      throw NumericError("lbg: distortion increased across split");
  }
  return cb;
}

namespace {

void regularize_spd_inplace(Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) return;
  cov.diagonal().array() += std::max(kCovRegEps * cov.diagonal().mean(), 1e-300);
  if (Eigen::LLT<Mat>(cov).info() != Eigen::Success)
    throw NumericError("init_states: cluster covariance not PD after regularization");
}

GaussianState state_from_rows(const Mat& joint, const std::vector<Eigen::Index>& members,
                              int speech_dim) {
  const auto n = static_cast<Eigen::Index>(members.size());
  Mat block(n, joint.cols());
  for (Eigen::Index r = 0; r < n; ++r) block.row(r) = joint.row(members[static_cast<size_t>(r)]);
  const Vec mean = block.colwise().mean();
  const Mat centered = block.rowwise() - mean.transpose();
  Mat cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(n - 1));
  cov = 0.5 * (cov + cov.transpose());

  const auto d_m = joint.cols() - speech_dim;
  GaussianState s;
  s.speech.mean = mean.head(speech_dim);
  s.speech.cov = cov.topLeftCorner(speech_dim, speech_dim);
  s.motion.mean = mean.tail(d_m);
  s.motion.cov = cov.bottomRightCorner(d_m, d_m);
  regularize_spd_inplace(s.speech.cov);
  regularize_spd_inplace(s.motion.cov);
  return s;
}

StateInit states_from_assignments(const Mat& joint, const std::vector<int>& assignment,
                                  int n_states, int speech_dim) {
  std::vector<std::vector<Eigen::Index>> members(static_cast<size_t>(n_states));
  for (Eigen::Index i = 0; i < joint.rows(); ++i)
    members[static_cast<size_t>(assignment[static_cast<size_t>(i)])].push_back(i);

  StateInit out;
  for (int s = 0; s < n_states; ++s) {
    out.states.push_back(state_from_rows(joint, members[static_cast<size_t>(s)], speech_dim));
    out.occupancy.push_back(static_cast<double>(members[static_cast<size_t>(s)].size()));
  }
  return out;
}

}  // namespace

StateInit init_states(const Mat& joint_data, int n_states, int speech_dim) {
  if (n_states < 1) throw DataError("init_states: need N >= 1");
  if (joint_data.rows() < 10L * n_states)
    throw DataError("init_states: need at least 10*N data points");
  if (speech_dim <= 0 || speech_dim >= joint_data.cols())
    throw DataError("init_states: bad speech/motion split");

  int size = 1;
  while (size < n_states) size *= 2;
  Codebook cb = lbg(joint_data, size);

  // Merge the cheapest pairs (Ward's pooled-distortion increase) down to N.
  struct Cluster {
    Vec mean;
    long count;
    int label;  // index into the relabel map
  };
  std::vector<Cluster> clusters;
  std::vector<int> relabel(static_cast<size_t>(size));
  for (int c = 0; c < size; ++c) {
    long cnt = 0;
    for (int a : cb.assignments)
      if (a == c) ++cnt;
    relabel[static_cast<size_t>(c)] = c;
    clusters.push_back({cb.centroids.row(c).transpose(), cnt, c});
  }
  while (static_cast<int>(clusters.size()) > n_states) {
    double best = std::numeric_limits<double>::infinity();
    size_t bi = 0, bj = 1;
    for (size_t i = 0; i < clusters.size(); ++i) {
      for (size_t j = i + 1; j < clusters.size(); ++j) {
        const double na = static_cast<double>(clusters[i].count);
        const double nb = static_cast<double>(clusters[j].count);
        const double cost =
            na * nb / (na + nb) * (clusters[i].mean - clusters[j].mean).squaredNorm();
        if (cost < best) {
          best = cost;
          bi = i;
          bj = j;
        }
      }
    }
    auto& a = clusters[bi];
    auto& b = clusters[bj];
    const double na = static_cast<double>(a.count), nb = static_cast<double>(b.count);
    a.mean = (na * a.mean + nb * b.mean) / (na + nb);
    a.count += b.count;
    for (auto& r : relabel)
      if (r == b.label) r = a.label;
    clusters.erase(clusters.begin() + static_cast<long>(bj));
  }
  // compact labels to 0..N-1
  std::vector<int> compact(static_cast<size_t>(size), -1);
  int next = 0;
  for (size_t c = 0; c < clusters.size(); ++c) compact[static_cast<size_t>(clusters[c].label)] = next++;
  std::vector<int> assignment(cb.assignments.size());
  for (size_t i = 0; i < cb.assignments.size(); ++i)
    assignment[i] = compact[static_cast<size_t>(relabel[static_cast<size_t>(cb.assignments[i])])];

  return states_from_assignments(joint_data, assignment, n_states, speech_dim);
}

StateInit init_states_random(const Mat& joint_data, int n_states, int speech_dim,
                             std::uint64_t seed) {
  if (n_states < 1) throw DataError("init_states_random: need N >= 1");
  if (joint_data.rows() < 10L * n_states)
    throw DataError("init_states_random: need at least 10*N data points");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n_states - 1);
  std::vector<int> assignment(static_cast<size_t>(joint_data.rows()));
  std::vector<long> counts(static_cast<size_t>(n_states), 0);
  for (auto& a : assignment) {
    a = pick(rng);
    ++counts[static_cast<size_t>(a)];
  }
  // guarantee non-empty partitions
  for (int s = 0; s < n_states; ++s) {
    if (counts[static_cast<size_t>(s)] > 0) continue;
    for (size_t i = 0; i < assignment.size(); ++i) {
      if (counts[static_cast<size_t>(assignment[i])] > 1) {
        --counts[static_cast<size_t>(assignment[i])];
        assignment[i] = s;
        ++counts[static_cast<size_t>(s)];
        break;
      }
    }
  }
  return states_from_assignments(joint_data, assignment, n_states, speech_dim);
}

}  // namespace gsyn
