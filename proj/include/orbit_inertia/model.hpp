#ifndef ORBIT_INERTIA_MODEL_HPP_
#define ORBIT_INERTIA_MODEL_HPP_

#include <string>
#include <vector>

#include "orbit_inertia/spatial.hpp"

namespace orbit_inertia {

class FixedBaseModel : public std::runtime_error {
 public:
  explicit FixedBaseModel(const std::string& what) : std::runtime_error(what) {}
};

class SingularMassMatrix : public std::runtime_error {
 public:
  explicit SingularMassMatrix(const std::string& what) : std::runtime_error(what) {}
};

class InconsistentTarget : public std::runtime_error {
 public:
  explicit InconsistentTarget(const std::string& what) : std::runtime_error(what) {}
};

enum class JointType { Revolute, Fixed, FloatingBase };

struct LinkModel {
  std::string name;
  int parent = -1;                       // -1 for the root
  JointType joint = JointType::Fixed;
  Vec3 axis = Vec3::UnitZ();             // revolute axis in the link frame
  Pose origin;                           // joint frame in the parent frame
  InertiaParams phi;                     // in the link frame (origin at the parent joint)
};

/// Topologically sorted kinematic tree. Link 0 is the base; a FloatingBase
/// joint may appear only there.
struct MultibodyModel {
  std::vector<LinkModel> links;
  Vec3 gravity = Vec3::Zero();
  int end_effector = -1;

  int num_links() const { return static_cast<int>(links.size()); }

  bool floating() const {
    return !links.empty() && links[0].joint == JointType::FloatingBase;
  }

  int num_revolute() const {
    int n = 0;
    for (const auto& l : links) n += (l.joint == JointType::Revolute) ? 1 : 0;
    return n;
  }

  /// Generalized-velocity dimension: 6 + revolute count when floating.
  int dof() const { return (floating() ? 6 : 0) + num_revolute(); }

  /// Index of each link's joint variable within the joint-angle block
  /// (-1 for fixed joints and the base).
  std::vector<int> joint_indices() const {
    std::vector<int> idx(links.size(), -1);
    int n = 0;
    for (size_t i = 0; i < links.size(); ++i) {
      if (links[i].joint == JointType::Revolute) idx[i] = n++;
    }
    return idx;
  }

  /// Start of the joint-angle block within q.
  int q_joint_offset() const { return floating() ? 7 : 0; }
  /// Start of the joint-rate block within nu.
  int nu_joint_offset() const { return floating() ? 6 : 0; }

  double total_mass() const {
    double m = 0.0;
    for (const auto& l : links) m += l.phi.mass();
    return m;
  }

  VecX full_params() const {
    VecX all(10 * num_links());
    for (int i = 0; i < num_links(); ++i) all.segment<10>(10 * i) = links[i].phi.v;
    return all;
  }
};

/// q: [quat wxyz, position] + joint angles when floating, else joint angles.
/// nu: [base angular, base linear] (body frame) + joint rates when floating.
struct RobotState {
  VecX q;
  VecX nu;

  static RobotState Rest(const MultibodyModel& model) {
    RobotState s;
    s.q = VecX::Zero(model.q_joint_offset() + model.num_revolute());
    if (model.floating()) s.q[0] = 1.0;  // identity quaternion
    s.nu = VecX::Zero(model.dof());
    return s;
  }

  Eigen::Quaterniond base_quat() const {
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  }
};

inline Pose base_pose(const MultibodyModel& model, const VecX& q) {
  if (!model.floating()) return Pose::Identity();
  Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  return {quat.toRotationMatrix(), q.segment<3>(4)};
}

/// New model with the target's inertia merged into the end-effector link.
/// `grasp` is the target frame expressed in the end-effector frame; phi_target
/// is given in the target frame.
inline MultibodyModel attach_target(const MultibodyModel& model, const InertiaParams& phi_target,
                                    const Pose& grasp, double tol = 1e-9) {
  // Boundary cases (zero target, point mass) are legitimate payloads, so the
  // pseudo-inertia only needs to be positive semidefinite here.
  if (min_eig_pseudo_inertia(phi_target) < -tol) {
    throw InconsistentTarget("attach_target: target parameters are not physically consistent");
  }
  MultibodyModel out = model;
  out.links[out.end_effector].phi =
      out.links[out.end_effector].phi + transform_params(phi_target, grasp);
  return out;
}

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_MODEL_HPP_
