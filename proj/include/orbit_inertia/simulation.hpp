#ifndef ORBIT_INERTIA_SIMULATION_HPP_
#define ORBIT_INERTIA_SIMULATION_HPP_

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "orbit_inertia/estimator.hpp"
#include "orbit_inertia/rng.hpp"

// Closed-loop experiment engine. The controller tracks a sinusoidal
// end-effector velocity profile with Jacobian IK and exact-model inverse
// dynamics torque; the estimator runs open-loop alongside on a perturbed
// robot model, fed either torque samples or the conserved momentum.

namespace orbit_inertia {

enum class BaseMode { Fixed, Floating };

struct VelocityProfileParams {
  double r = 0.15;        // m
  double r_omega = 0.5;   // rad
  double f = 0.5;         // Hz
  double f_z = 0.125;
  double f_omega_x = 0.75;
  double f_omega_y = 1.0;
  double f_omega_z = 1.75;
};

struct Scenario {
  std::string name;
  MultibodyModel model;   // robot without the target
  BaseMode base_mode = BaseMode::Fixed;
  InertiaParams target;   // in the grasp frame
  Pose grasp;             // grasp frame in the end-effector frame
  RegressorKind regressor_kind = RegressorKind::Force;
  double alpha_eta = 0.0;
  double alpha = 0.1;
  double noise_pct = 0.05;
  bool relative_noise = false;
  double duration = 20.0;
  double dt_sim = 1e-4;
  double dt_est = 1e-2;
  std::uint64_t seed = 0;
  VelocityProfileParams trajectory;
  double lambda_dls = 1e-6;
  double velocity_gain = 20.0;  // joint-rate servo stiffness, 1/s
  VecX q0_joints;               // empty: zeros
  InertiaParams prior = default_prior();

  static InertiaParams default_prior() {
    Vec10 v;
    v << 1.0, 0.0, 0.0, 0.0, 1e-2, 1e-2, 1e-2, 0.0, 0.0, 0.0;
    return InertiaParams(v);
  }
};

struct LogRow {
  int k = 0;
  double t = 0.0;
  double objective = 0.0;
  double d_phi = 0.0;
  double rms = 0.0;
  double min_eig_l = 0.0;
  int newton_iters = 0;
  Vec10 theta = Vec10::Zero();
};

struct ExperimentLog {
  std::vector<LogRow> rows;
  double final_d_phi = 0.0;
  double final_rms = 0.0;
  double momentum_drift = 0.0;  // relative, floating runs only
  int stall_count = 0;
  bool completed = false;
  std::string error;
};

/// Desired target twist in the base frame, angular-above-linear.
inline Vec6 target_velocity(double t, const VelocityProfileParams& p) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Vec6 v;
  v[0] = p.r_omega * two_pi * p.f_omega_x * std::sin(two_pi * p.f_omega_x * t);
  v[1] = p.r_omega * two_pi * p.f_omega_y * std::sin(two_pi * p.f_omega_y * t);
  v[2] = p.r_omega * two_pi * p.f_omega_z * std::sin(two_pi * p.f_omega_z * t);
  v[3] = p.r * two_pi * p.f * std::cos(two_pi * p.f * t);
  v[4] = p.r * two_pi * p.f * std::sin(two_pi * p.f * t);
  v[5] = p.r * two_pi * p.f_z * std::sin(two_pi * p.f_z * t);
  return v;
}

/// Damped-least-squares IK on the grasp-frame Jacobian, joint columns only.
/// The workspace is fixed to the base, so the same arm-only Jacobian serves
/// fixed and floating robots.
inline VecX ik_joint_velocity(const MultibodyModel& model, const VecX& q, const Pose& grasp,
                              const Vec6& v_desired, double lambda_dls = 1e-6) {
  const auto poses = forward_kinematics(model, q);
  const MatX jac = link_jacobians(model, q);
  const int ee = model.end_effector;
  const int nj = model.num_revolute();
  const int voff = model.nu_joint_offset();
  // Body Jacobian of the grasp frame, then re-expressed in base coordinates.
  MatX jg = grasp.inverse().adjoint() * jac.block(6 * ee, voff, 6, nj);
  const Mat3 r_base = base_pose(model, q).R;
  const Mat3 r_bg = r_base.transpose() * (poses[ee].R * grasp.R);
  MatX j = MatX::Zero(6, nj);
  j.topRows<3>() = r_bg * jg.topRows<3>();
  j.bottomRows<3>() = r_bg * jg.bottomRows<3>();
  const MatX jtj =
      j.transpose() * j + lambda_dls * lambda_dls * MatX::Identity(nj, nj);
  return jtj.ldlt().solve(j.transpose() * v_desired);
}

/// Perturb phi by the randomization ratio alpha_eta: mass, CoM, principal
/// moments (triangle-inequality preserving) and principal axes. The result is
/// physically consistent by construction.
inline InertiaParams randomize_params(const InertiaParams& phi, double alpha_eta, Rng& rng) {
  if (alpha_eta == 0.0) return phi;
  const double m = phi.mass();
  const Vec3 c = phi.com();
  const Mat3 inertia_com = phi.inertia_com();
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia_com);
  const Vec3 lambda = es.eigenvalues();
  const Mat3 rc = es.eigenvectors().transpose();  // I_c = rc^T diag(lambda) rc

  const double m_star = m * (1.0 + alpha_eta * rng.uniform());
  const Vec3 c_star = c + 0.01 * m * alpha_eta * rng.uniform_vec3();

  Vec3 lambda_star = lambda;
  bool ok = false;
  for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
    const Vec3 eps = alpha_eta * rng.uniform_vec3();
    lambda_star = lambda.cwiseProduct(Vec3::Ones() + eps);
    ok = lambda_star[0] + lambda_star[1] > lambda_star[2] &&
         lambda_star[1] + lambda_star[2] > lambda_star[0] &&
         lambda_star[2] + lambda_star[0] > lambda_star[1];
  }
  if (!ok) {
    // Shrink the last perturbation toward zero until feasible.
    Vec3 eps = alpha_eta * rng.uniform_vec3();
    for (int shrink = 0; shrink < 60 && !ok; ++shrink) {
      eps *= 0.5;
      lambda_star = lambda.cwiseProduct(Vec3::Ones() + eps);
      ok = lambda_star[0] + lambda_star[1] > lambda_star[2] &&
           lambda_star[1] + lambda_star[2] > lambda_star[0] &&
           lambda_star[2] + lambda_star[0] > lambda_star[1];
    }
    if (!ok) lambda_star = lambda;
  }

  const double gamma = alpha_eta * std::numbers::pi * rng.uniform();
  const Vec3 axis = rng.unit_vector();
  const Mat3 rc_star = rc * Eigen::AngleAxisd(gamma, axis).toRotationMatrix();

  const Mat3 i_star =
      rc_star.transpose() * lambda_star.asDiagonal() * rc_star +
      m_star * (c_star.squaredNorm() * Mat3::Identity() - c_star * c_star.transpose());
  return InertiaParams::FromComponents(m_star, m_star * c_star, i_star);
}

/// "5% of unit-magnitude" noise: additive uniform with amplitude noise_pct.
/// The relative flag switches to per-component multiplicative noise.
inline VecX add_torque_noise(const VecX& tau, double noise_pct, Rng& rng, bool relative = false) {
  VecX out = tau;
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    const double eta = rng.uniform();
    out[i] += relative ? noise_pct * eta * tau[i] : noise_pct * eta;
  }
  return out;
}

/// Randomize the manipulator links only. The CoM perturbation scales with
/// mass, so applying it to a multi-hundred-kg spacecraft base would give it
/// a centimeters-scale CoM error that swamps any target signal; base inertia
/// is treated as known.
inline MultibodyModel randomize_model(const MultibodyModel& model, double alpha_eta, Rng& rng) {
  MultibodyModel out = model;
  for (int i = 1; i < out.num_links(); ++i) {
    out.links[i].phi = randomize_params(out.links[i].phi, alpha_eta, rng);
  }
  return out;
}

/// D_phi metric: divergence between the estimated and true composite
/// end-effector-plus-target inertia, expressed about the true composite CoM.
inline double composite_com_divergence(const InertiaParams& phi_ee, const Pose& grasp,
                                       const InertiaParams& phi_hat, const InertiaParams& phi_true) {
  const InertiaParams comp_true = phi_ee + transform_params(phi_true, grasp);
  const InertiaParams comp_hat = phi_ee + transform_params(phi_hat, grasp);
  const Pose shift{Mat3::Identity(), -comp_true.com()};
  return logdet_divergence(transform_params(comp_hat, shift), transform_params(comp_true, shift));
}

inline ExperimentLog run_experiment(const Scenario& scenario) {
  ExperimentLog log;
  const bool floating = scenario.base_mode == BaseMode::Floating;
  if (scenario.regressor_kind == RegressorKind::Momentum && !floating) {
    throw FixedBaseModel("run_experiment: momentum regression requires a floating base");
  }

  const MultibodyModel& robot = scenario.model;
  const MultibodyModel true_model = attach_target(robot, scenario.target, scenario.grasp);
  Rng rng(derive_stream(scenario.seed, 0));
  const MultibodyModel est_model = randomize_model(robot, scenario.alpha_eta, rng);
  const InertiaParams phi_ee = robot.links[robot.end_effector].phi;

  EstimatorConfig config;
  config.alpha = scenario.alpha;
  Estimator estimator(scenario.prior, std::nullopt, config);
  const Mat10 grasp_map = transform_params_matrix(scenario.grasp);
  const int ee_col = 10 * robot.end_effector;

  RobotState state = RobotState::Rest(true_model);
  const int nj = robot.num_revolute();
  const int voff = true_model.nu_joint_offset();
  const int nd = true_model.dof();
  if (scenario.q0_joints.size() == nj) {
    state.q.tail(nj) = scenario.q0_joints;
  }

  const int n_steps = static_cast<int>(std::llround(scenario.duration / scenario.dt_sim));
  const int est_every = std::max(1, static_cast<int>(std::llround(scenario.dt_est / scenario.dt_sim)));

  // Estimation buffer: (q, nu, tau) at estimation ticks, so accelerations can
  // be taken as central differences of the sampled velocity signal.
  struct EstSample {
    double t;
    VecX q, nu, tau;
  };
  std::vector<EstSample> buffer;

  VecX qd_prev = VecX::Zero(nj);
  double peak_momentum = 0.0;
  double drift = 0.0;
  const Vec6 p0 = floating ? momentum_in_world(true_model, state.q, state.nu) : Vec6::Zero();
  int est_k = 0;

  auto estimate_on = [&](const EstSample& prev, const EstSample& cur, const EstSample& next) {
    MatX target_cols;
    VecX y;
    if (scenario.regressor_kind == RegressorKind::Force) {
      const VecX nudot = (next.nu - prev.nu) / (2.0 * scenario.dt_est);
      const MatX u = force_regressor(est_model, cur.q, cur.nu, nudot);
      target_cols = u.middleCols<10>(ee_col) * grasp_map;
      y = cur.tau - inverse_dynamics(est_model, cur.q, cur.nu, nudot);
      if (floating) {
        // Only the actuated joints carry torque sensing; there is no base
        // wrench sensor on a free-floating robot.
        target_cols = MatX(target_cols.bottomRows(nj));
        y = VecX(y.tail(nj));
      }
    } else {
      const MatX um = momentum_regressor(est_model, cur.q, cur.nu);
      target_cols = um.middleCols<10>(ee_col) * grasp_map;
      y = -(um * est_model.full_params());  // conserved P_b stays zero
    }
    RegressorSample sample;
    sample.kind = scenario.regressor_kind;
    sample.matrix = target_cols;
    sample.measurement = y;
    sample.weight = MatX::Identity(y.size(), y.size());
    sample.time = cur.t;
    estimator.step(sample);
    if (estimator.state().stalled) ++log.stall_count;

    LogRow row;
    row.k = ++est_k;
    row.t = cur.t;
    row.objective = estimator.objective(estimator.state().theta);
    row.theta = estimator.state().theta.head<10>();
    row.min_eig_l = estimator.min_eig_l();
    row.newton_iters = estimator.state().last_newton_iters;
    row.d_phi = composite_com_divergence(phi_ee, scenario.grasp, estimator.estimate_phi(),
                                         scenario.target);
    const VecX residual = sample.matrix * estimator.state().theta - sample.measurement;
    row.rms = std::sqrt(residual.squaredNorm() / residual.size());
    log.rows.push_back(row);
  };

  try {
    for (int step = 0; step <= n_steps; ++step) {
      const double t = step * scenario.dt_sim;

      // Velocity-level IK plus finite-differenced feedforward acceleration.
      const Vec6 vt = target_velocity(t, scenario.trajectory);
      const VecX qd_des = ik_joint_velocity(true_model, state.q, scenario.grasp, vt,
                                            scenario.lambda_dls);
      VecX qdd_cmd = (step == 0) ? VecX::Zero(nj) : VecX((qd_des - qd_prev) / scenario.dt_sim);
      qdd_cmd += scenario.velocity_gain * (qd_des - state.nu.tail(nj));
      qd_prev = qd_des;

      const MatX m = mass_matrix(true_model, state.q);
      const VecX bias = inverse_dynamics(true_model, state.q, state.nu, VecX::Zero(nd));
      VecX nudot_cmd = VecX::Zero(nd);
      nudot_cmd.tail(nj) = qdd_cmd;
      if (floating) {
        // Unactuated base: its acceleration follows from a zero base wrench.
        const Vec6 rhs = -(bias.head<6>() + m.topRightCorner(6, nj) * qdd_cmd);
        nudot_cmd.head<6>() = m.topLeftCorner<6, 6>().ldlt().solve(rhs);
      }
      const VecX f_cmd = m * nudot_cmd + bias;
      VecX f_applied = f_cmd;
      if (floating) f_applied.head<6>().setZero();
      const VecX tau = f_applied.tail(nj);

      if (step % est_every == 0) {
        EstSample s;
        s.t = t;
        s.q = state.q;
        s.nu = state.nu;
        if (scenario.regressor_kind == RegressorKind::Force) {
          VecX y_meas(nd);
          y_meas.setZero();
          y_meas.tail(nj) = add_torque_noise(tau, scenario.noise_pct, rng, scenario.relative_noise);
          s.tau = y_meas;
        }
        buffer.push_back(std::move(s));
        const size_t n = buffer.size();
        if (n >= 3) estimate_on(buffer[n - 3], buffer[n - 2], buffer[n - 1]);
      }

      if (floating) {
        const Vec6 pw = momentum_in_world(true_model, state.q, state.nu);
        // Reference scale: peak generalized momentum of the moving system.
        peak_momentum = std::max(peak_momentum, (m * state.nu).norm());
        drift = std::max(drift, (pw - p0).norm());
      }

      // Integrate the true dynamics under the applied generalized force.
      Eigen::LDLT<MatX> ldlt(m);
      if (ldlt.info() != Eigen::Success) {
        throw SingularMassMatrix("run_experiment: mass matrix factorization failed");
      }
      const VecX nudot = ldlt.solve(f_applied - bias);
      state = integrate(true_model, state, nudot, scenario.dt_sim);
      // Free float: project back onto the momentum-conserving manifold, which
      // the first-order integrator leaves at O(dt) per unit time otherwise.
      if (floating) state = project_base_momentum(true_model, state, p0);
    }
    log.completed = true;
  } catch (const std::exception& e) {
    log.error = e.what();
  }

  if (!log.rows.empty()) {
    log.final_d_phi = log.rows.back().d_phi;
    log.final_rms = log.rows.back().rms;
  } else {
    // Zero-duration runs report the prior.
    LogRow row;
    row.t = 0.0;
    row.theta = estimator.state().theta.head<10>();
    row.min_eig_l = estimator.min_eig_l();
    row.d_phi = composite_com_divergence(phi_ee, scenario.grasp, estimator.estimate_phi(),
                                         scenario.target);
    log.rows.push_back(row);
    log.final_d_phi = row.d_phi;
  }
  log.momentum_drift = floating ? drift / std::max(peak_momentum, 1e-12) : 0.0;
  return log;
}

/// First time D_phi drops below a threshold (infinity when it never does).
inline double time_to_threshold(const ExperimentLog& log, double threshold) {
  for (const auto& row : log.rows) {
    if (row.d_phi < threshold) return row.t;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_SIMULATION_HPP_
