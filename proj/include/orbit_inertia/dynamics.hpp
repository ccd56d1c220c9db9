#ifndef ORBIT_INERTIA_DYNAMICS_HPP_
#define ORBIT_INERTIA_DYNAMICS_HPP_

#include <vector>

#include "orbit_inertia/model.hpp"

// Tree dynamics in body coordinates (angular-above-linear). Inverse dynamics
// is a recursive Newton-Euler pass, the mass matrix a composite-rigid-body
// pass; M = J^T G J is kept as an independent identity for tests.

namespace orbit_inertia {

namespace detail {

/// Joint transform T_{parent<-link} for the current joint variable.
inline Pose joint_pose(const LinkModel& link, double angle) {
  if (link.joint == JointType::Revolute) {
    return link.origin * Pose{Eigen::AngleAxisd(angle, link.axis).toRotationMatrix(), Vec3::Zero()};
  }
  return link.origin;
}

/// Per-link kinematic quantities shared by the dynamics passes.
struct TreeKinematics {
  std::vector<Pose> parent_tf;   // T_{parent<-i}
  std::vector<Pose> world_tf;    // T_{world<-i}
  std::vector<Mat6> to_parent;   // Ad(T_{i<-parent}) : parent twist -> i twist
  std::vector<Vec6> vel;         // body twist of each link
  std::vector<Vec6> acc;         // body acceleration (gravity-augmented when asked)

  void compute_poses(const MultibodyModel& model, const VecX& q) {
    const int n = model.num_links();
    parent_tf.resize(n);
    world_tf.resize(n);
    const auto jidx = model.joint_indices();
    const int qoff = model.q_joint_offset();
    for (int i = 0; i < n; ++i) {
      const auto& link = model.links[i];
      if (i == 0) {
        parent_tf[0] = model.floating() ? base_pose(model, q) : link.origin;
        world_tf[0] = parent_tf[0];
      } else {
        const double angle = (jidx[i] >= 0) ? q[qoff + jidx[i]] : 0.0;
        parent_tf[i] = joint_pose(link, angle);
        world_tf[i] = world_tf[link.parent] * parent_tf[i];
      }
    }
  }

  void compute_velocities(const MultibodyModel& model, const VecX& nu) {
    const int n = model.num_links();
    to_parent.resize(n);
    vel.resize(n);
    const auto jidx = model.joint_indices();
    const int voff = model.nu_joint_offset();
    for (int i = 0; i < n; ++i) {
      to_parent[i] = parent_tf[i].inverse().adjoint();
      if (i == 0) {
        vel[0] = model.floating() ? Vec6(nu.head<6>()) : Vec6(Vec6::Zero());
      } else {
        vel[i] = to_parent[i] * vel[model.links[i].parent];
        if (jidx[i] >= 0) {
          vel[i].head<3>() += model.links[i].axis * nu[voff + jidx[i]];
        }
      }
    }
  }

  /// Accelerations with the gravity offset folded into the base term, so that
  /// G a + v x* G v directly yields the gravity-inclusive link wrench.
  void compute_accelerations(const MultibodyModel& model, const VecX& nu, const VecX& nudot) {
    const int n = model.num_links();
    acc.resize(n);
    const auto jidx = model.joint_indices();
    const int voff = model.nu_joint_offset();
    Vec6 a0 = Vec6::Zero();
    a0.tail<3>() = -(world_tf[0].R.transpose() * model.gravity);
    if (model.floating()) a0 += nudot.head<6>();
    acc[0] = a0;
    for (int i = 1; i < n; ++i) {
      acc[i] = to_parent[i] * acc[model.links[i].parent];
      if (jidx[i] >= 0) {
        Vec6 s = Vec6::Zero();
        s.head<3>() = model.links[i].axis;
        acc[i] += s * nudot[voff + jidx[i]] + cross_motion(vel[i]) * (s * nu[voff + jidx[i]]);
      }
    }
  }
};

}  // namespace detail

inline std::vector<Pose> forward_kinematics(const MultibodyModel& model, const VecX& q) {
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  return kin.world_tf;
}

/// Stacked body Jacobian (6 n_b x n_d): row-block i maps nu to the body twist
/// of link i in its own frame.
inline MatX link_jacobians(const MultibodyModel& model, const VecX& q) {
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  const int n = model.num_links();
  const int nd = model.dof();
  const auto jidx = model.joint_indices();
  MatX jac = MatX::Zero(6 * n, nd);
  // Walk up the support chain of every link.
  for (int i = 0; i < n; ++i) {
    Pose i_from_j = Pose::Identity();  // T_{i<-j} while walking ancestors j
    for (int j = i; j >= 0; j = model.links[j].parent) {
      if (model.links[j].joint == JointType::Revolute) {
        Vec6 s = Vec6::Zero();
        s.head<3>() = model.links[j].axis;
        jac.block<6, 1>(6 * i, model.nu_joint_offset() + jidx[j]) = i_from_j.adjoint() * s;
      } else if (j == 0 && model.floating()) {
        jac.block<6, 6>(6 * i, 0) = i_from_j.adjoint();
      }
      if (j > 0) i_from_j = i_from_j * kin.parent_tf[j].inverse();
    }
  }
  return jac;
}

/// Block-diagonal collection of all link spatial inertias (6 n_b x 6 n_b).
inline MatX spatial_inertia_collection(const MultibodyModel& model) {
  const int n = model.num_links();
  MatX g = MatX::Zero(6 * n, 6 * n);
  for (int i = 0; i < n; ++i) {
    g.block<6, 6>(6 * i, 6 * i) = spatial_inertia(model.links[i].phi);
  }
  return g;
}

/// Composite-rigid-body mass matrix.
inline MatX mass_matrix(const MultibodyModel& model, const VecX& q) {
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  const int n = model.num_links();
  const int nd = model.dof();
  const auto jidx = model.joint_indices();
  const int voff = model.nu_joint_offset();

  std::vector<Mat6> composite(n);
  for (int i = 0; i < n; ++i) composite[i] = spatial_inertia(model.links[i].phi);
  std::vector<Mat6> to_parent(n);
  for (int i = 1; i < n; ++i) to_parent[i] = kin.parent_tf[i].inverse().adjoint();
  for (int i = n - 1; i >= 1; --i) {
    composite[model.links[i].parent] += to_parent[i].transpose() * composite[i] * to_parent[i];
  }

  MatX m = MatX::Zero(nd, nd);
  if (model.floating()) m.topLeftCorner<6, 6>() = composite[0];
  for (int i = 0; i < n; ++i) {
    if (jidx[i] < 0) continue;
    Vec6 s = Vec6::Zero();
    s.head<3>() = model.links[i].axis;
    Vec6 f = composite[i] * s;
    const int col = voff + jidx[i];
    m(col, col) = s.dot(f);
    for (int j = i; j > 0; j = model.links[j].parent) {
      f = to_parent[j].transpose() * f;
      const int p = model.links[j].parent;
      if (jidx[p] >= 0) {
        Vec6 sp = Vec6::Zero();
        sp.head<3>() = model.links[p].axis;
        m(voff + jidx[p], col) = m(col, voff + jidx[p]) = sp.dot(f);
      } else if (p == 0 && model.floating()) {
        m.block<6, 1>(0, col) = f;
        m.block<1, 6>(col, 0) = f.transpose();
      }
    }
  }
  return m;
}

/// Recursive Newton-Euler inverse dynamics: F = M nudot + c(q, nu) nu + g(q).
/// For a floating base the first 6 entries are the base wrench in base
/// coordinates (zero in free flight).
inline VecX inverse_dynamics(const MultibodyModel& model, const VecX& q, const VecX& nu,
                             const VecX& nudot) {
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  kin.compute_velocities(model, nu);
  kin.compute_accelerations(model, nu, nudot);
  const int n = model.num_links();
  const auto jidx = model.joint_indices();
  const int voff = model.nu_joint_offset();

  std::vector<Vec6> wrench(n);
  for (int i = 0; i < n; ++i) {
    const Mat6 g = spatial_inertia(model.links[i].phi);
    wrench[i] = g * kin.acc[i] + cross_force(kin.vel[i], g * kin.vel[i]);
  }
  VecX f = VecX::Zero(model.dof());
  for (int i = n - 1; i >= 0; --i) {
    if (jidx[i] >= 0) f[voff + jidx[i]] = model.links[i].axis.dot(wrench[i].head<3>());
    if (i > 0) {
      wrench[model.links[i].parent] += kin.to_parent[i].transpose() * wrench[i];
    } else if (model.floating()) {
      f.head<6>() = wrench[0];
    }
  }
  return f;
}

/// Spatial momentum of the whole system about (and in) the base frame,
/// P_b = M_(1:6,:) nu.
inline Vec6 momentum_about_base(const MultibodyModel& model, const VecX& q, const VecX& nu) {
  if (!model.floating()) {
    throw FixedBaseModel("momentum_about_base: model has a fixed base");
  }
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  kin.compute_velocities(model, nu);
  Vec6 p = Vec6::Zero();
  const int n = model.num_links();
  // Transport each link momentum down to the base frame.
  std::vector<Vec6> h(n);
  for (int i = 0; i < n; ++i) h[i] = spatial_inertia(model.links[i].phi) * kin.vel[i];
  for (int i = n - 1; i >= 1; --i) {
    h[model.links[i].parent] += kin.to_parent[i].transpose() * h[i];
  }
  p = h[0];
  return p;
}

inline VecX forward_dynamics(const MultibodyModel& model, const VecX& q, const VecX& nu,
                             const VecX& f) {
  const MatX m = mass_matrix(model, q);
  const VecX bias = inverse_dynamics(model, q, nu, VecX::Zero(model.dof()));
  Eigen::LDLT<MatX> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularMassMatrix("forward_dynamics: mass matrix is not positive definite");
  }
  return ldlt.solve(f - bias);
}

/// Semi-implicit Euler step: velocity first, then configuration with a
/// quaternion exponential update.
inline RobotState integrate(const MultibodyModel& model, const RobotState& state,
                            const VecX& nudot, double dt) {
  RobotState next = state;
  next.nu += nudot * dt;
  if (model.floating()) {
    const Eigen::Quaterniond quat = state.base_quat();
    const Vec3 omega = next.nu.head<3>();
    const Vec3 vlin = next.nu.segment<3>(3);
    Eigen::Quaterniond dq(Eigen::AngleAxisd((omega * dt).norm(),
                                            omega.norm() > 0 ? omega.normalized() : Vec3::UnitX()));
    Eigen::Quaterniond qn = (quat * dq).normalized();  // body-frame angular velocity
    next.q[0] = qn.w();
    next.q.segment<3>(1) = qn.vec();
    next.q.segment<3>(4) += quat.toRotationMatrix() * vlin * dt;
  }
  const int qoff = model.q_joint_offset();
  const int voff = model.nu_joint_offset();
  next.q.tail(next.q.size() - qoff) += next.nu.tail(next.nu.size() - voff) * dt;
  return next;
}

/// Momentum re-expressed in the inertial frame; this is the conserved
/// quantity of a free-floating system (body-frame components rotate).
inline Vec6 momentum_in_world(const MultibodyModel& model, const VecX& q, const VecX& nu) {
  const Vec6 pb = momentum_about_base(model, q, nu);
  const Pose base = base_pose(model, q);
  Vec6 pw;
  pw.tail<3>() = base.R * pb.tail<3>();
  pw.head<3>() = base.R * pb.head<3>() + base.p.cross(Vec3(pw.tail<3>()));
  return pw;
}

/// Re-solve the base twist so the inertially expressed momentum equals
/// p_world. Free-float simulations apply this after each integration step;
/// it projects the discrete state back onto the momentum-conserving manifold,
/// which plain Euler integration leaves at O(dt) per unit time.
inline RobotState project_base_momentum(const MultibodyModel& model, RobotState state,
                                        const Vec6& p_world) {
  if (!model.floating()) throw FixedBaseModel("project_base_momentum: model has a fixed base");
  const Pose base = base_pose(model, state.q);
  // Transform the momentum covector into the base body frame.
  Vec6 pb;
  pb.tail<3>() = base.R.transpose() * p_world.tail<3>();
  pb.head<3>() = base.R.transpose() * (p_world.head<3>() - base.p.cross(Vec3(p_world.tail<3>())));
  const MatX m = mass_matrix(model, state.q);
  const int nj = model.dof() - 6;
  const Vec6 rhs = pb - m.topRightCorner(6, nj) * state.nu.tail(nj);
  state.nu.head<6>() = m.topLeftCorner<6, 6>().ldlt().solve(rhs);
  return state;
}

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_DYNAMICS_HPP_
