#ifndef ORBIT_INERTIA_TESTS_HELPERS_HPP_
#define ORBIT_INERTIA_TESTS_HELPERS_HPP_

#include <filesystem>

#include "orbit_inertia/io.hpp"
#include "orbit_inertia/rng.hpp"

namespace oi = orbit_inertia;

namespace test_helpers {

inline std::filesystem::path source_dir() { return ORBIT_INERTIA_SOURCE_DIR; }

inline oi::MultibodyModel fixed_model() {
  return oi::load_model(source_dir() / "models/arm_fixed.json");
}

inline oi::MultibodyModel floating_model() {
  return oi::load_model(source_dir() / "models/arm_floating.json");
}

/// Random strictly consistent inertia parameters: a body with principal
/// moments built from positive box sums (triangle inequality holds by
/// construction), random CoM and random orientation.
inline oi::InertiaParams random_consistent_phi(oi::Rng& rng) {
  const double m = rng.uniform(0.5, 5.0);
  const oi::Vec3 c = rng.uniform_vec3(-0.2, 0.2);
  const double a = rng.uniform(0.005, 0.05);
  const double b = rng.uniform(0.005, 0.05);
  const double d = rng.uniform(0.005, 0.05);
  const oi::Vec3 lambda(b + d, d + a, a + b);
  const oi::Mat3 r =
      Eigen::AngleAxisd(rng.uniform(-3.0, 3.0), rng.unit_vector()).toRotationMatrix();
  const oi::Mat3 inertia_com = r.transpose() * lambda.asDiagonal() * r;
  return oi::InertiaParams::FromCom(m, c, inertia_com);
}

inline oi::RobotState random_state(const oi::MultibodyModel& model, oi::Rng& rng,
                                   double vel_scale = 1.0) {
  oi::RobotState s = oi::RobotState::Rest(model);
  if (model.floating()) {
    Eigen::Quaterniond q(Eigen::AngleAxisd(rng.uniform(-3.0, 3.0), rng.unit_vector()));
    s.q[0] = q.w();
    s.q.segment<3>(1) = q.vec();
    s.q.segment<3>(4) = rng.uniform_vec3();
  }
  const int nj = model.num_revolute();
  for (int i = 0; i < nj; ++i) s.q[model.q_joint_offset() + i] = rng.uniform(-2.5, 2.5);
  for (Eigen::Index i = 0; i < s.nu.size(); ++i) s.nu[i] = vel_scale * rng.uniform();
  return s;
}

inline oi::VecX random_accel(const oi::MultibodyModel& model, oi::Rng& rng) {
  oi::VecX a(model.dof());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform();
  return a;
}

}  // namespace test_helpers

#endif  // ORBIT_INERTIA_TESTS_HELPERS_HPP_
