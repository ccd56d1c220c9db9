#ifndef ORBIT_INERTIA_ESTIMATOR_HPP_
#define ORBIT_INERTIA_ESTIMATOR_HPP_

#include <optional>

#include "orbit_inertia/regressor.hpp"

// Recursive least squares with log-determinant-divergence regularization.
// Samples are folded into quadratic sufficient statistics (A, b); each step
// refines the estimate with damped Newton-Raphson iterations on the
// accumulated objective. Backtracking keeps every accepted iterate strictly
// inside the positive definite cone of pseudo-inertias.

namespace orbit_inertia {

class InconsistentPrior : public std::runtime_error {
 public:
  explicit InconsistentPrior(const std::string& what) : std::runtime_error(what) {}
};

struct EstimatorConfig {
  double alpha = 0.1;            // regularization strength (constant over steps)
  double beta = 0.0;             // weight of the psi prior term
  MatX forgetting;               // G_j; empty means zero (the default experiments)
  int newton_max_iters = 20;
  double newton_tol = 1e-10;     // on the Newton step norm
  double step_shrink = 0.5;
  double consistency_tol = 1e-9; // min eigenvalue of L(phi_hat) to accept
  bool momentum_difference_mode = false;  // subtract P_b(t_0) from measurements
};

struct EstimatorState {
  VecX theta;   // [phi_hat (10); psi_hat (n_p)]
  MatX A;       // sum Gamma^T W Gamma
  VecX b;       // sum Gamma^T W y
  MatX A_forget;
  VecX b_forget;
  double data_const = 0.0;  // sum 1/2 y^T W y - 1/2 theta_hat_j^T G theta_hat_j
  int step = 0;
  int last_newton_iters = 0;
  bool stalled = false;  // last step found no consistent decreasing update
  InertiaParams phi0;
  VecX psi0;
  Vec6 momentum_offset = Vec6::Zero();
  bool has_momentum_offset = false;
};

class Estimator {
 public:
  Estimator(const InertiaParams& phi0, const std::optional<VecX>& psi0, EstimatorConfig config)
      : config_(std::move(config)) {
    if (!is_physically_consistent(phi0, config_.consistency_tol)) {
      throw InconsistentPrior("Estimator: prior phi0 is not physically consistent");
    }
    const int np = psi0 ? static_cast<int>(psi0->size()) : 0;
    const int dim = 10 + np;
    state_.theta = VecX::Zero(dim);
    state_.theta.head<10>() = phi0.v;
    if (psi0) state_.theta.tail(np) = *psi0;
    state_.A = MatX::Zero(dim, dim);
    state_.b = VecX::Zero(dim);
    state_.A_forget = MatX::Zero(dim, dim);
    state_.b_forget = VecX::Zero(dim);
    state_.phi0 = phi0;
    state_.psi0 = psi0.value_or(VecX());
  }

  const EstimatorState& state() const { return state_; }
  const EstimatorConfig& config() const { return config_; }
  int dim() const { return static_cast<int>(state_.theta.size()); }

  /// Accumulated objective J_k at theta.
  double objective(const VecX& theta) const {
    double j = 0.5 * theta.dot(state_.A * theta) - state_.b.dot(theta);
    j -= 0.5 * theta.dot(state_.A_forget * theta) - state_.b_forget.dot(theta);
    j += state_.data_const;
    j += config_.alpha * regularizer(theta);
    return j;
  }

  /// Fold one sample into (A, b) and re-solve by damped Newton iterations.
  void step(const RegressorSample& sample) {
    const MatX wg = sample.weight * sample.matrix;
    state_.A.noalias() += sample.matrix.transpose() * wg;
    state_.b.noalias() += sample.matrix.transpose() * (sample.weight * sample.measurement);
    state_.data_const += 0.5 * sample.measurement.dot(sample.weight * sample.measurement);
    if (config_.forgetting.size() > 0) {
      state_.A_forget += config_.forgetting;
      state_.b_forget += config_.forgetting * state_.theta;
      state_.data_const -= 0.5 * state_.theta.dot(config_.forgetting * state_.theta);
    }
    solve_newton();
    ++state_.step;
  }

  /// Momentum variant. With no measurement the conserved free-float value
  /// P_b = 0 is used; difference mode regresses against P_b(t) - P_b(t_0).
  void step_momentum(const MatX& u_m, const Vec6& p_b_measured = Vec6::Zero()) {
    Vec6 y = p_b_measured;
    if (config_.momentum_difference_mode) {
      if (!state_.has_momentum_offset) {
        state_.momentum_offset = p_b_measured;
        state_.has_momentum_offset = true;
      }
      y -= state_.momentum_offset;
    }
    RegressorSample sample;
    sample.kind = RegressorKind::Momentum;
    sample.matrix = u_m;
    sample.measurement = y;
    sample.weight = MatX::Identity(6, 6);
    step(sample);
  }

  InertiaParams estimate_phi() const { return InertiaParams(state_.theta.head<10>()); }
  VecX estimate_psi() const { return state_.theta.tail(dim() - 10); }

  double min_eig_l() const { return min_eig_pseudo_inertia(estimate_phi()); }

 private:
  double regularizer(const VecX& theta) const {
    double r = logdet_divergence(InertiaParams(theta.head<10>()), state_.phi0);
    if (dim() > 10) {
      r += 0.5 * config_.beta * (theta.tail(dim() - 10) - state_.psi0).squaredNorm();
    }
    return r;
  }

  void regularizer_grad_hess(const VecX& theta, VecX& grad, MatX& hess) const {
    Vec10 gphi;
    Mat10 hphi;
    logdet_divergence_grad_hess(InertiaParams(theta.head<10>()), state_.phi0, gphi, hphi);
    grad = VecX::Zero(dim());
    hess = MatX::Zero(dim(), dim());
    grad.head<10>() = gphi;
    hess.topLeftCorner<10, 10>() = hphi;
    if (dim() > 10) {
      const int np = dim() - 10;
      grad.tail(np) = config_.beta * (theta.tail(np) - state_.psi0);
      hess.bottomRightCorner(np, np) = config_.beta * MatX::Identity(np, np);
    }
  }

  bool consistent(const VecX& theta) const {
    return min_eig_pseudo_inertia(InertiaParams(theta.head<10>())) > config_.consistency_tol;
  }

  void solve_newton() {
    state_.stalled = false;
    state_.last_newton_iters = 0;
    VecX theta = state_.theta;
    VecX rgrad(dim());
    MatX rhess(dim(), dim());
    for (int it = 0; it < config_.newton_max_iters; ++it) {
      regularizer_grad_hess(theta, rgrad, rhess);
      const VecX grad =
          (state_.A - state_.A_forget) * theta - (state_.b - state_.b_forget) + config_.alpha * rgrad;
      const MatX hess = state_.A - state_.A_forget + config_.alpha * rhess;
      Eigen::LDLT<MatX> ldlt(hess);
      if (ldlt.info() != Eigen::Success) {
        state_.stalled = true;
        break;
      }
      const VecX delta = ldlt.solve(-grad);
      state_.last_newton_iters = it + 1;
      if (delta.norm() < config_.newton_tol) break;
      const double j0 = objective(theta);
      double scale = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        const VecX candidate = theta + scale * delta;
        if (consistent(candidate) && objective(candidate) <= j0) {
          theta = candidate;
          accepted = true;
          break;
        }
        scale *= config_.step_shrink;
      }
      if (!accepted) {
        state_.stalled = true;
        break;
      }
      if ((scale * delta).norm() < config_.newton_tol) break;
    }
    // A stall leaves theta at the last accepted (consistent) iterate.
    state_.theta = theta;
  }

  EstimatorConfig config_;
  EstimatorState state_;
};

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_ESTIMATOR_HPP_
