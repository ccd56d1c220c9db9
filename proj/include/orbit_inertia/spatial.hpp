#ifndef ORBIT_INERTIA_SPATIAL_HPP_
#define ORBIT_INERTIA_SPATIAL_HPP_

#include <Eigen/Dense>
#include <array>
#include <stdexcept>

// Spatial algebra for rigid-body inertia identification.
//
// Conventions used throughout the library:
//   - 6-vectors (twists, wrenches, momenta) are ordered angular-above-linear.
//   - Inertia parameters of one link are the 10-vector
//       phi = [m, h_x, h_y, h_z, I_xx, I_yy, I_zz, I_yz, I_zx, I_xy]
//     with h = m*c the first moment and I the rotational inertia about the
//     link-frame origin.

namespace orbit_inertia {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

class NonPositiveDefinite : public std::runtime_error {
 public:
  explicit NonPositiveDefinite(const std::string& what)
      : std::runtime_error(what) {}
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

/// Rigid transform T_{A<-B}: maps coordinates of a point in frame B to frame A.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  static Pose Identity() { return {}; }

  static Pose FromAxisAngle(const Vec3& axis, double angle, const Vec3& p = Vec3::Zero()) {
    return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), p};
  }

  /// ZYX convention: R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Pose FromRpy(const Vec3& xyz, const Vec3& rpy) {
    Mat3 r = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
              Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
              Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                 .toRotationMatrix();
    return {r, xyz};
  }

  Pose operator*(const Pose& o) const { return {R * o.R, p + R * o.p}; }

  Pose inverse() const { return {R.transpose(), -(R.transpose() * p)}; }

  Vec3 act(const Vec3& x) const { return R * x + p; }

  /// Adjoint mapping body twists of this frame's child into the parent:
  /// V_A = Ad(T_{A<-B}) V_B, angular-above-linear.
  Mat6 adjoint() const {
    Mat6 ad = Mat6::Zero();
    ad.topLeftCorner<3, 3>() = R;
    ad.bottomRightCorner<3, 3>() = R;
    ad.bottomLeftCorner<3, 3>() = skew(p) * R;
    return ad;
  }
};

/// Motion cross product for angular-above-linear twists: (v x) m.
inline Mat6 cross_motion(const Vec6& v) {
  Mat6 x = Mat6::Zero();
  const Mat3 wx = skew(v.head<3>());
  x.topLeftCorner<3, 3>() = wx;
  x.bottomRightCorner<3, 3>() = wx;
  x.bottomLeftCorner<3, 3>() = skew(v.tail<3>());
  return x;
}

/// Dual (force) cross product: d/dt of a momentum along a twist, (v x*) f.
inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  out.head<3>() = v.head<3>().cross(f.head<3>()) + v.tail<3>().cross(f.tail<3>());
  out.tail<3>() = v.head<3>().cross(f.tail<3>());
  return out;
}

/// Ten inertia parameters of one rigid body, fixed ordering
/// [m, h_x, h_y, h_z, I_xx, I_yy, I_zz, I_yz, I_zx, I_xy].
struct InertiaParams {
  Vec10 v = Vec10::Zero();

  InertiaParams() = default;
  explicit InertiaParams(const Vec10& values) : v(values) {}

  static InertiaParams FromComponents(double m, const Vec3& h, const Mat3& inertia) {
    InertiaParams out;
    out.v << m, h.x(), h.y(), h.z(), inertia(0, 0), inertia(1, 1), inertia(2, 2),
        inertia(1, 2), inertia(2, 0), inertia(0, 1);
    return out;
  }

  /// Body with given mass, CoM position and rotational inertia about the CoM.
  static InertiaParams FromCom(double m, const Vec3& com, const Mat3& inertia_com) {
    Mat3 io = inertia_com + m * (com.squaredNorm() * Mat3::Identity() - com * com.transpose());
    return FromComponents(m, m * com, io);
  }

  double mass() const { return v[0]; }
  Vec3 h() const { return v.segment<3>(1); }
  Vec3 com() const { return h() / v[0]; }

  Mat3 inertia() const {
    Mat3 i;
    i << v[4], v[9], v[8], v[9], v[5], v[7], v[8], v[7], v[6];
    return i;
  }

  /// Rotational inertia about the CoM (requires m != 0).
  Mat3 inertia_com() const {
    const Vec3 c = com();
    return inertia() - mass() * (c.squaredNorm() * Mat3::Identity() - c * c.transpose());
  }

  InertiaParams operator+(const InertiaParams& o) const { return InertiaParams(v + o.v); }
  InertiaParams operator-(const InertiaParams& o) const { return InertiaParams(v - o.v); }
  InertiaParams operator*(double s) const { return InertiaParams(v * s); }
};

/// 4x4 pseudo-inertia L(phi) = [[Sigma, h], [h^T, m]], Sigma = tr(I)/2 I3 - I.
/// L > 0 is equivalent to physical consistency of phi.
inline Mat4 pseudo_inertia(const InertiaParams& phi) {
  const Mat3 inertia = phi.inertia();
  const Mat3 sigma = 0.5 * inertia.trace() * Mat3::Identity() - inertia;
  Mat4 l = Mat4::Zero();
  l.topLeftCorner<3, 3>() = sigma;
  l.topRightCorner<3, 1>() = phi.h();
  l.bottomLeftCorner<1, 3>() = phi.h().transpose();
  l(3, 3) = phi.mass();
  return l;
}

/// Basis of the linear map phi -> L(phi): pseudo_inertia_basis()[k] = L(e_k).
inline const std::array<Mat4, 10>& pseudo_inertia_basis() {
  static const std::array<Mat4, 10> basis = [] {
    std::array<Mat4, 10> b;
    for (int k = 0; k < 10; ++k) {
      Vec10 e = Vec10::Zero();
      e[k] = 1.0;
      b[k] = pseudo_inertia(InertiaParams(e));
    }
    return b;
  }();
  return basis;
}

inline double min_eig_pseudo_inertia(const InertiaParams& phi) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(pseudo_inertia(phi), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_physically_consistent(const InertiaParams& phi, double tol = 1e-9) {
  return min_eig_pseudo_inertia(phi) > tol;
}

/// 6x6 spatial inertia [[I, hx], [hx^T, m I3]]; G * twist = spatial momentum.
inline Mat6 spatial_inertia(const InertiaParams& phi) {
  Mat6 g = Mat6::Zero();
  const Mat3 hx = skew(phi.h());
  g.topLeftCorner<3, 3>() = phi.inertia();
  g.topRightCorner<3, 3>() = hx;
  g.bottomLeftCorner<3, 3>() = hx.transpose();
  g.bottomRightCorner<3, 3>() = phi.mass() * Mat3::Identity();
  return g;
}

inline const std::array<Mat6, 10>& spatial_inertia_basis() {
  static const std::array<Mat6, 10> basis = [] {
    std::array<Mat6, 10> b;
    for (int k = 0; k < 10; ++k) {
      Vec10 e = Vec10::Zero();
      e[k] = 1.0;
      b[k] = spatial_inertia(InertiaParams(e));
    }
    return b;
  }();
  return basis;
}

/// Express phi, currently given in frame B, in frame A where X = T_{A<-B}.
/// Mass is invariant and consistency is preserved (frame change of the same
/// mass distribution).
inline InertiaParams transform_params(const InertiaParams& phi, const Pose& X) {
  const double m = phi.mass();
  const Vec3 rh = X.R * phi.h();
  const Vec3 h_new = rh + m * X.p;
  Mat3 i_new = X.R * phi.inertia() * X.R.transpose();
  i_new += m * (X.p.squaredNorm() * Mat3::Identity() - X.p * X.p.transpose());
  i_new += 2.0 * X.p.dot(rh) * Mat3::Identity();
  i_new -= rh * X.p.transpose() + X.p * rh.transpose();
  return InertiaParams::FromComponents(m, h_new, i_new);
}

/// 10x10 matrix of the linear map phi |-> transform_params(phi, X).
inline Mat10 transform_params_matrix(const Pose& X) {
  Mat10 t;
  for (int k = 0; k < 10; ++k) {
    Vec10 e = Vec10::Zero();
    e[k] = 1.0;
    t.col(k) = transform_params(InertiaParams(e), X).v;
  }
  return t;
}

namespace detail {
inline Eigen::LLT<Mat4> chol_or_throw(const InertiaParams& phi, const char* who) {
  Eigen::LLT<Mat4> llt(pseudo_inertia(phi));
  if (llt.info() != Eigen::Success) {
    throw NonPositiveDefinite(std::string(who) + ": pseudo-inertia is not positive definite");
  }
  return llt;
}
}  // namespace detail

/// Log-determinant divergence between pseudo-inertias,
/// D = -log(|L| / |L0|) + tr(L0^-1 L) - 4. Nonnegative, zero iff L == L0.
inline double logdet_divergence(const InertiaParams& phi, const InertiaParams& phi0) {
  const auto llt = detail::chol_or_throw(phi, "logdet_divergence");
  const auto llt0 = detail::chol_or_throw(phi0, "logdet_divergence (prior)");
  double logdet = 0.0, logdet0 = 0.0;
  for (int i = 0; i < 4; ++i) {
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
    logdet0 += 2.0 * std::log(llt0.matrixL()(i, i));
  }
  const Mat4 l = pseudo_inertia(phi);
  const double tr = llt0.solve(l).trace();
  return -(logdet - logdet0) + tr - 4.0;
}

/// Gradient and Hessian of logdet_divergence in the 10 coordinates of phi.
/// dD/dL = L0^-1 - L^-1 chained through the linear basis; the Hessian
/// tr(L^-1 E_k L^-1 E_l) is positive definite on the interior.
inline void logdet_divergence_grad_hess(const InertiaParams& phi, const InertiaParams& phi0,
                                        Vec10& grad, Mat10& hess) {
  const auto llt = detail::chol_or_throw(phi, "logdet_divergence_grad_hess");
  const auto llt0 = detail::chol_or_throw(phi0, "logdet_divergence_grad_hess (prior)");
  const Mat4 linv = llt.solve(Mat4::Identity());
  const Mat4 l0inv = llt0.solve(Mat4::Identity());
  const Mat4 diff = l0inv - linv;
  const auto& basis = pseudo_inertia_basis();
  std::array<Mat4, 10> linv_e;
  for (int k = 0; k < 10; ++k) {
    grad[k] = diff.cwiseProduct(basis[k]).sum();  // tr(diff * E_k), both symmetric
    linv_e[k] = linv * basis[k];
  }
  for (int k = 0; k < 10; ++k) {
    for (int l = k; l < 10; ++l) {
      hess(k, l) = hess(l, k) = (linv_e[k] * linv_e[l]).trace();
    }
  }
}

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_SPATIAL_HPP_
