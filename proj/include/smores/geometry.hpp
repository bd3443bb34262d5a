#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace smores {

/// Side length of a module cube in meters.
inline constexpr double kModuleWidth = 0.08;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  a = std::remainder(a, Scalar(2) * pi);
  if (a <= -pi) a += Scalar(2) * pi;
  return a;
}

/// Planar pose (x, y, theta) of a module body frame.
///
/// Composition follows SE(2): `a * b` expresses `b` (given in the frame of
/// `a`) in the frame `a` itself is expressed in. Headings are kept wrapped to
/// (-pi, pi].
template <typename Scalar>
class Pose2 {
 public:
  using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Rotation = Eigen::Matrix<Scalar, 2, 2>;

  Pose2() : translation_(Vector2::Zero()), theta_(0) {}
  Pose2(Scalar x, Scalar y, Scalar theta) : translation_(x, y), theta_(wrap_angle(theta)) {}
  Pose2(const Vector2& t, Scalar theta) : translation_(t), theta_(wrap_angle(theta)) {}

  static Pose2 identity() { return Pose2(); }
  static Pose2 from_vector(const Vector3& v) { return Pose2(v.x(), v.y(), v.z()); }

  Scalar x() const { return translation_.x(); }
  Scalar y() const { return translation_.y(); }
  Scalar theta() const { return theta_; }
  const Vector2& translation() const { return translation_; }

  Rotation rotation() const { return Eigen::Rotation2D<Scalar>(theta_).toRotationMatrix(); }
  Vector3 vector() const { return Vector3(x(), y(), theta_); }

  /// Maps a point given in this frame into the parent frame.
  Vector2 transform(const Vector2& p) const { return rotation() * p + translation_; }

  Pose2 inverse() const {
    const Rotation rt = rotation().transpose();
    return Pose2(-(rt * translation_), -theta_);
  }

  Pose2 operator*(const Pose2& rhs) const {
    return Pose2(rotation() * rhs.translation_ + translation_, theta_ + rhs.theta_);
  }

  /// Pose of `other` expressed in this frame.
  Pose2 between(const Pose2& other) const { return inverse() * other; }

  template <typename Other>
  Pose2<Other> cast() const {
    return Pose2<Other>(Other(x()), Other(y()), Other(theta_));
  }

 private:
  Vector2 translation_;
  Scalar theta_;
};

using Pose2d = Pose2<double>;
using Vector2d = Eigen::Vector2d;

/// Smallest signed difference a - b, wrapped to (-pi, pi].
template <typename Scalar>
Scalar angle_diff(Scalar a, Scalar b) {
  return wrap_angle(a - b);
}

template <typename Scalar>
Scalar distance(const Pose2<Scalar>& a, const Pose2<Scalar>& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace smores
