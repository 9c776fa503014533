#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jam {

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi_v<Scalar>) a += two_pi;
  if (a > std::numbers::pi_v<Scalar>) a -= two_pi;
  return a;
}

template <typename Scalar>
struct Pose2 {
  Scalar x = 0;
  Scalar y = 0;
  Scalar heading = 0;  // (-pi, pi]

  Pose2() = default;
  Pose2(Scalar x_, Scalar y_, Scalar h_) : x(x_), y(y_), heading(wrap_angle(h_)) {}

  Eigen::Matrix<Scalar, 2, 1> position() const { return {x, y}; }
};

using Pose2d = Pose2<double>;

/// p_global = R(rotation) * p + translation.
template <typename Scalar>
struct RigidTransform {
  Scalar rotation = 0;
  Eigen::Matrix<Scalar, 2, 1> translation = Eigen::Matrix<Scalar, 2, 1>::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Matrix<Scalar, 2, 2> rotation_matrix() const {
    const Scalar c = std::cos(rotation), s = std::sin(rotation);
    Eigen::Matrix<Scalar, 2, 2> r;
    r << c, -s, s, c;
    return r;
  }

  Eigen::Matrix<Scalar, 2, 1> apply_point(const Eigen::Matrix<Scalar, 2, 1>& p) const {
    return rotation_matrix() * p + translation;
  }
  Eigen::Matrix<Scalar, 2, 1> apply_vector(const Eigen::Matrix<Scalar, 2, 1>& v) const {
    return rotation_matrix() * v;
  }
  Scalar apply_heading(Scalar h) const { return wrap_angle(h + rotation); }
  Pose2<Scalar> apply(const Pose2<Scalar>& p) const {
    const auto q = apply_point(p.position());
    return Pose2<Scalar>(q.x(), q.y(), p.heading + rotation);
  }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = -rotation;
    inv.translation = -(inv.rotation_matrix() * translation);
    return inv;
  }

  /// (this * other)(p) = this(other(p))
  RigidTransform operator*(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = wrap_angle(rotation + other.rotation);
    out.translation = rotation_matrix() * other.translation + translation;
    return out;
  }
};

using RigidTransform2d = RigidTransform<double>;

/// Points are rows of an (n x 2) matrix.
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Expresses global points in the frame of `origin` (origin at (0,0), its
/// heading along +x).
template <typename Derived>
Points2<typename Derived::Scalar> to_local(const Eigen::MatrixBase<Derived>& points,
                                           const Pose2<typename Derived::Scalar>& origin) {
  using Scalar = typename Derived::Scalar;
  const Scalar c = std::cos(origin.heading), s = std::sin(origin.heading);
  Points2<Scalar> out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Scalar dx = points(i, 0) - origin.x, dy = points(i, 1) - origin.y;
    out(i, 0) = c * dx + s * dy;
    out(i, 1) = -s * dx + c * dy;
  }
  return out;
}

/// Inverse of to_local.
template <typename Derived>
Points2<typename Derived::Scalar> to_global(const Eigen::MatrixBase<Derived>& points,
                                            const Pose2<typename Derived::Scalar>& origin) {
  using Scalar = typename Derived::Scalar;
  const Scalar c = std::cos(origin.heading), s = std::sin(origin.heading);
  Points2<Scalar> out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out(i, 0) = c * points(i, 0) - s * points(i, 1) + origin.x;
    out(i, 1) = s * points(i, 0) + c * points(i, 1) + origin.y;
  }
  return out;
}

/// Rotates a direction/velocity into the frame of `origin` (no translation).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> vector_to_local(const Eigen::Matrix<Scalar, 2, 1>& v, const Pose2<Scalar>& origin) {
  const Scalar c = std::cos(origin.heading), s = std::sin(origin.heading);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

/// `pose` expressed in the frame of `frame`.
template <typename Scalar>
Pose2<Scalar> relative_pose(const Pose2<Scalar>& pose, const Pose2<Scalar>& frame) {
  const Scalar c = std::cos(frame.heading), s = std::sin(frame.heading);
  const Scalar dx = pose.x - frame.x, dy = pose.y - frame.y;
  return Pose2<Scalar>(c * dx + s * dy, -s * dx + c * dy, pose.heading - frame.heading);
}

/// Angular frequency of the first band for position channels (rad/m)
/// and heading channels (rad per unit of cos/sin).
inline constexpr double kPositionFrequency = std::numbers::pi / 64.0;
inline constexpr double kHeadingFrequency = std::numbers::pi / 2.0;

/// Sinusoidal encoding of `origin` relative to `anchor`.
///
/// The relative pose gives four channels u = (x, y, cos dh, sin dh). Output
/// pair j (entries 2j, 2j+1) encodes channel j % 4 at band b = j / 4:
///   sin(w_c * (b + 1) * u_c), cos(w_c * (b + 1) * u_c)
/// with w_c = kPositionFrequency for x/y and kHeadingFrequency for cos/sin.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> encode_origin(const Pose2<Scalar>& origin, const Pose2<Scalar>& anchor,
                                                       Eigen::Index dim) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("encode_origin: dim must be positive and even");
  const Pose2<Scalar> rel = relative_pose(origin, anchor);
  const Scalar u[4] = {rel.x, rel.y, std::cos(rel.heading), std::sin(rel.heading)};
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> out(dim);
  for (Eigen::Index j = 0; j < dim / 2; ++j) {
    const int channel = static_cast<int>(j % 4);
    const Scalar base = channel < 2 ? Scalar(kPositionFrequency) : Scalar(kHeadingFrequency);
    const Scalar w = base * Scalar(j / 4 + 1);
    out(2 * j) = std::sin(w * u[channel]);
    out(2 * j + 1) = std::cos(w * u[channel]);
  }
  return out;
}

}  // namespace jam
