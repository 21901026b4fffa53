// Quaternion keypoint smoothing for synthesized rotation trajectories.
//
// Euler convention: intrinsic x-y-z (pitch, yaw, roll), degrees. A frame is
// converted per joint group to a unit quaternion, interpolated between
// equidistant keypoints (piecewise slerp by default, squad optionally), and
// converted back.
#pragma once

#include <Eigen/Geometry>
#include <array>
#include <vector>

#include "gsyn/common.hpp"

namespace gsyn {

struct KeypointPlan {
  double rate = 15.0;        // keypoints per second
  double frame_rate = 120.0; // Hz
  bool squad = false;        // spline interpolation instead of piecewise slerp

  void validate() const;  // 0 < rate <= frame_rate
};

KeypointPlan default_plan(Region region);  // head 15 kps/s, hand 12 kps/s

// A joint's rotation columns; 2-DOF groups carry -1 in the unused slot and
// get a zero third Euler angle for the quaternion conversion.
struct RotationGroup {
  std::array<int, 3> dims;
  int n_dofs;
};

std::vector<RotationGroup> rotation_groups(Region region);

// Equidistant keypoint frame indices; first and last frame always included.
std::vector<Eigen::Index> keypoint_indices(Eigen::Index t_len, const KeypointPlan& plan);

Eigen::Quaterniond euler_deg_to_quat(const Eigen::Vector3d& deg);
Eigen::Vector3d quat_to_euler_deg(const Eigen::Quaterniond& q);

// Shortest-path slerp: the far endpoint is negated when the dot is negative.
Eigen::Quaterniond quat_slerp(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b,
                              double u);

// traj: frames x motion_dim(region) Euler degrees. Output has the same shape;
// keypoint frames are reproduced exactly (within conversion roundtrip).
Mat smooth_trajectory(const Mat& traj, Region region, const KeypointPlan& plan);

}  // namespace gsyn
