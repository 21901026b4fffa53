#include "gsyn/smooth.hpp"

#include <algorithm>
#include <cmath>

namespace gsyn {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

using Quat = Eigen::Quaterniond;

// log of a unit quaternion as a pure-imaginary 3-vector.
Eigen::Vector3d quat_log(const Quat& q) {
  const double vn = q.vec().norm();
  if (vn < 1e-15) return Eigen::Vector3d::Zero();
  const double theta = std::atan2(vn, q.w());
  return q.vec() * (theta / vn);
}

Quat quat_exp(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  if (theta < 1e-15) return Quat::Identity();
  const Eigen::Vector3d axis = v / theta;
  Quat q;
  q.w() = std::cos(theta);
  q.vec() = axis * std::sin(theta);
  return q;
}

// Inner control point for squad through q_prev, q, q_next.
Quat squad_control(const Quat& q_prev, const Quat& q, const Quat& q_next) {
  const Quat qi = q.conjugate();
  const Eigen::Vector3d l = quat_log(qi * q_prev) + quat_log(qi * q_next);
  return q * quat_exp(-0.25 * l);
}

Quat squad_eval(const Quat& a, const Quat& b, const Quat& sa, const Quat& sb, double u) {
  const Quat outer = quat_slerp(a, b, u);
  const Quat inner = quat_slerp(sa, sb, u);
  return quat_slerp(outer, inner, 2.0 * u * (1.0 - u));
}

}  // namespace

void KeypointPlan::validate() const {
  if (!(rate > 0) || !(frame_rate > 0)) throw DataError("KeypointPlan: rates must be positive");
  if (rate > frame_rate) throw DataError("KeypointPlan: keypoint rate exceeds frame rate");
}

KeypointPlan default_plan(Region region) {
  KeypointPlan p;
  p.rate = region == Region::kHead ? 15.0 : 12.0;
  return p;
}

std::vector<RotationGroup> rotation_groups(Region region) {
  if (region == Region::kHead) return {{{0, 1, 2}, 3}};
  return {{{0, 1, 2}, 3}, {{3, 4, 5}, 3}, {{6, 7, -1}, 2}, {{8, 9, -1}, 2}};
}

std::vector<Eigen::Index> keypoint_indices(Eigen::Index t_len, const KeypointPlan& plan) {
  plan.validate();
  if (t_len < 2) throw DataError("keypoint_indices: need at least two frames");
  const auto span = static_cast<double>(t_len - 1);
  auto n_seg = static_cast<Eigen::Index>(std::llround(span * plan.rate / plan.frame_rate));
  n_seg = std::clamp<Eigen::Index>(n_seg, 1, t_len - 1);
  std::vector<Eigen::Index> kp(static_cast<size_t>(n_seg) + 1);
  const double step = span / static_cast<double>(n_seg);
  for (Eigen::Index i = 0; i <= n_seg; ++i)
    kp[static_cast<size_t>(i)] = static_cast<Eigen::Index>(std::llround(step * i));
  kp.front() = 0;
  kp.back() = t_len - 1;
  return kp;
}

Quat euler_deg_to_quat(const Eigen::Vector3d& deg) {
  const Eigen::Vector3d r = deg * kDegToRad;
  return Quat(Eigen::AngleAxisd(r.x(), Eigen::Vector3d::UnitX()) *
              Eigen::AngleAxisd(r.y(), Eigen::Vector3d::UnitY()) *
              Eigen::AngleAxisd(r.z(), Eigen::Vector3d::UnitZ()));
}

Eigen::Vector3d quat_to_euler_deg(const Quat& q) {
  // R = Rx(a) Ry(b) Rz(c):  R(0,2) = sin b;  R(1,2) = -sin a cos b;
  // R(2,2) = cos a cos b;  R(0,1) = -cos b sin c;  R(0,0) = cos b cos c.
  const Eigen::Matrix3d r = q.toRotationMatrix();
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  const double b = std::asin(sb);
  double a, c;
  if (std::abs(sb) < 1.0 - 1e-12) {
    a = std::atan2(-r(1, 2), r(2, 2));
    c = std::atan2(-r(0, 1), r(0, 0));
  } else {
    // Gimbal lock: pitch/roll are coupled; put everything into a.
    a = std::atan2(r(2, 1), r(1, 1));
    c = 0.0;
  }
  return Eigen::Vector3d(a, b, c) * kRadToDeg;
}

Quat quat_slerp(const Quat& a, const Quat& b, double u) {
  const Quat bb = a.dot(b) < 0.0 ? Quat(-b.coeffs()) : b;
  const double d = std::clamp(a.dot(bb), -1.0, 1.0);
  if (d > 1.0 - 1e-12) {
    // Nearly parallel: nlerp is exact enough and avoids 0/0.
    Quat out;
    out.coeffs() = (1.0 - u) * a.coeffs() + u * bb.coeffs();
    out.normalize();
    return out;
  }
  const double theta = std::acos(d);
  const double s = std::sin(theta);
  Quat out;
  out.coeffs() = (std::sin((1.0 - u) * theta) / s) * a.coeffs() +
                 (std::sin(u * theta) / s) * bb.coeffs();
  return out;
}

Mat smooth_trajectory(const Mat& traj, Region region, const KeypointPlan& plan) {
  plan.validate();
  if (traj.rows() < 2) throw DataError("smooth_trajectory: need at least two frames");
  if (traj.cols() != motion_dim(region))
    throw DataError("smooth_trajectory: trajectory width does not match the region");

  const auto kp = keypoint_indices(traj.rows(), plan);
  const auto n_kp = static_cast<Eigen::Index>(kp.size());
  Mat out = traj;

  for (const auto& group : rotation_groups(region)) {
    std::vector<Quat> q(static_cast<size_t>(n_kp));
    for (Eigen::Index i = 0; i < n_kp; ++i) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      for (int d = 0; d < group.n_dofs; ++d)
        e[d] = traj(kp[static_cast<size_t>(i)], group.dims[static_cast<size_t>(d)]);
      q[static_cast<size_t>(i)] = euler_deg_to_quat(e);
    }
    // Consistent hemisphere along the keypoint chain.
    for (size_t i = 1; i < q.size(); ++i)
      if (q[i - 1].dot(q[i]) < 0.0) q[i].coeffs() = -q[i].coeffs();

    std::vector<Quat> ctrl;
    if (plan.squad) {
      ctrl.resize(q.size());
      ctrl.front() = q.front();
      ctrl.back() = q.back();
      for (size_t i = 1; i + 1 < q.size(); ++i)
        ctrl[i] = squad_control(q[i - 1], q[i], q[i + 1]);
    }

    for (Eigen::Index seg = 0; seg + 1 < n_kp; ++seg) {
      const Eigen::Index t0 = kp[static_cast<size_t>(seg)];
      const Eigen::Index t1 = kp[static_cast<size_t>(seg + 1)];
      for (Eigen::Index t = t0; t <= t1; ++t) {
        const double u = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
        const auto& qa = q[static_cast<size_t>(seg)];
        const auto& qb = q[static_cast<size_t>(seg + 1)];
        Quat qt;
        if (u == 0.0) {
          qt = qa;
        } else if (u == 1.0) {
          qt = qb;
        } else if (plan.squad) {
          qt = squad_eval(qa, qb, ctrl[static_cast<size_t>(seg)],
                          ctrl[static_cast<size_t>(seg + 1)], u);
        } else {
          qt = quat_slerp(qa, qb, u);
        }
        const Eigen::Vector3d e = quat_to_euler_deg(qt);
        for (int d = 0; d < group.n_dofs; ++d)
          out(t, group.dims[static_cast<size_t>(d)]) = e[d];
      }
    }
  }
  return out;
}

}  // namespace gsyn
