#ifndef ORBIT_INERTIA_REGRESSOR_HPP_
#define ORBIT_INERTIA_REGRESSOR_HPP_

#include <algorithm>
#include <string>
#include <vector>

#include "orbit_inertia/dynamics.hpp"

// Regressor matrices relating the stacked inertia parameters Phi (10 per
// link, Eq.-(4) ordering) to generalized force (U, Gamma) or to the momentum
// about the base (U_m). Columns are produced by propagating unit-parameter
// link wrenches through the same kinematic passes as the dynamics, so the
// identities U Phi = F and U_m Phi = P_b hold to round-off.

namespace orbit_inertia {

class EmptyInput : public std::runtime_error {
 public:
  explicit EmptyInput(const std::string& what) : std::runtime_error(what) {}
};

class IndexOutOfBounds : public std::runtime_error {
 public:
  explicit IndexOutOfBounds(const std::string& what) : std::runtime_error(what) {}
};

enum class RegressorKind { Force, Momentum };

/// One timestep's contribution to the recursive objective.
struct RegressorSample {
  RegressorKind kind = RegressorKind::Force;
  MatX matrix;       // n_rows x n_cols
  VecX measurement;  // y (force) or P_b (momentum)
  MatX weight;       // symmetric positive definite
  double time = 0.0;
};

struct ColumnSelection {
  std::vector<int> indices;  // strictly increasing
  std::vector<std::string> labels;
};

inline std::vector<std::string> parameter_labels(const MultibodyModel& model) {
  static const char* suffix[10] = {"m",   "hx",  "hy",  "hz",  "Ixx",
                                   "Iyy", "Izz", "Iyz", "Izx", "Ixy"};
  std::vector<std::string> labels;
  labels.reserve(10 * model.num_links());
  for (const auto& link : model.links) {
    for (const char* s : suffix) labels.push_back(link.name + "." + s);
  }
  return labels;
}

namespace detail {

/// Propagate a 6x10 per-link block of unit-parameter wrenches down the
/// support chain, projecting onto each joint on the way.
inline void propagate_block(const MultibodyModel& model, const TreeKinematics& kin,
                            const std::vector<int>& jidx, int link, Eigen::Matrix<double, 6, 10>& w,
                            MatX& out, int col0, int voff) {
  for (int j = link; j >= 0; j = model.links[j].parent) {
    if (jidx[j] >= 0) {
      out.block<1, 10>(voff + jidx[j], col0) = model.links[j].axis.transpose() * w.topRows<3>();
    } else if (j == 0 && model.floating()) {
      out.block<6, 10>(0, col0) = w;
    }
    if (j > 0) w = kin.to_parent[j].transpose() * w;
  }
}

}  // namespace detail

/// Force regressor U with U Phi = inverse_dynamics(q, nu, nudot).
inline MatX force_regressor(const MultibodyModel& model, const VecX& q, const VecX& nu,
                            const VecX& nudot) {
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  kin.compute_velocities(model, nu);
  kin.compute_accelerations(model, nu, nudot);
  const int n = model.num_links();
  const auto jidx = model.joint_indices();
  const auto& basis = spatial_inertia_basis();
  MatX u = MatX::Zero(model.dof(), 10 * n);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix<double, 6, 10> w;
    for (int k = 0; k < 10; ++k) {
      const Vec6 h = basis[k] * kin.vel[i];
      w.col(k) = basis[k] * kin.acc[i] + cross_force(kin.vel[i], h);
    }
    detail::propagate_block(model, kin, jidx, i, w, u, 10 * i, model.nu_joint_offset());
  }
  return u;
}

/// Friction extension columns Lambda (default none). Viscous friction puts
/// -nu_j on row j of column j, matching y = F + Lambda psi.
enum class FrictionModel { None, Viscous };

inline MatX friction_columns(const MultibodyModel& model, const VecX& nu, FrictionModel friction) {
  if (friction == FrictionModel::None) return MatX::Zero(model.dof(), 0);
  const int nj = model.num_revolute();
  const int voff = model.nu_joint_offset();
  MatX lambda = MatX::Zero(model.dof(), nj);
  for (int j = 0; j < nj; ++j) lambda(voff + j, j) = -nu[voff + j];
  return lambda;
}

/// Gamma = [U Lambda].
inline MatX extended_regressor(const MultibodyModel& model, const VecX& q, const VecX& nu,
                               const VecX& nudot, FrictionModel friction = FrictionModel::None) {
  const MatX u = force_regressor(model, q, nu, nudot);
  const MatX lambda = friction_columns(model, nu, friction);
  MatX gamma(u.rows(), u.cols() + lambda.cols());
  gamma << u, lambda;
  return gamma;
}

/// Momentum regressor U_m with U_m Phi = momentum_about_base(q, nu).
inline MatX momentum_regressor(const MultibodyModel& model, const VecX& q, const VecX& nu) {
  if (!model.floating()) {
    throw FixedBaseModel("momentum_regressor: model has a fixed base");
  }
  detail::TreeKinematics kin;
  kin.compute_poses(model, q);
  kin.compute_velocities(model, nu);
  const int n = model.num_links();
  const auto& basis = spatial_inertia_basis();
  MatX um = MatX::Zero(6, 10 * n);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix<double, 6, 10> w;
    for (int k = 0; k < 10; ++k) w.col(k) = basis[k] * kin.vel[i];
    for (int j = i; j > 0; j = model.links[j].parent) w = kin.to_parent[j].transpose() * w;
    um.block<6, 10>(0, 10 * i) = w;
  }
  return um;
}

/// Numerical base-parameter analysis: stack the sample matrices and run a
/// column-pivoted QR. Rank counts pivots above tol relative to the largest.
inline std::pair<int, ColumnSelection> base_parameter_analysis(
    const std::vector<RegressorSample>& samples, double tol = 1e-8,
    const std::vector<std::string>& labels = {}) {
  if (samples.empty()) throw EmptyInput("base_parameter_analysis: no samples");
  Eigen::Index rows = 0;
  const Eigen::Index cols = samples.front().matrix.cols();
  for (const auto& s : samples) rows += s.matrix.rows();
  MatX stacked(rows, cols);
  Eigen::Index r = 0;
  for (const auto& s : samples) {
    stacked.middleRows(r, s.matrix.rows()) = s.matrix;
    r += s.matrix.rows();
  }
  Eigen::ColPivHouseholderQR<MatX> qr(stacked);
  const MatX& qrm = qr.matrixQR();
  const double pivot0 = std::abs(qrm(0, 0));
  int rank = 0;
  const Eigen::Index maxrank = std::min(rows, cols);
  while (rank < maxrank && std::abs(qrm(rank, rank)) > tol * pivot0) ++rank;
  ColumnSelection sel;
  const auto& perm = qr.colsPermutation().indices();
  for (int k = 0; k < rank; ++k) sel.indices.push_back(perm[k]);
  std::sort(sel.indices.begin(), sel.indices.end());
  for (int idx : sel.indices) {
    sel.labels.push_back(idx < static_cast<int>(labels.size()) ? labels[idx] : std::to_string(idx));
  }
  return {rank, sel};
}

inline MatX select_columns(const MatX& matrix, const ColumnSelection& selection) {
  MatX out(matrix.rows(), static_cast<Eigen::Index>(selection.indices.size()));
  for (size_t k = 0; k < selection.indices.size(); ++k) {
    const int idx = selection.indices[k];
    if (idx < 0 || idx >= matrix.cols()) {
      throw IndexOutOfBounds("select_columns: column " + std::to_string(idx) + " out of range");
    }
    out.col(static_cast<Eigen::Index>(k)) = matrix.col(idx);
  }
  return out;
}

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_REGRESSOR_HPP_
