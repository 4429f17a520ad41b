#pragma once

// SE(3) kernel: exponential map, Adjoint / adjoint operators, binomial table
// and the Leibniz product combinator used by every higher-order formula.
//
// Conventions: twists are (angular; linear), wrenches are (torque; force),
// both body-fixed. A PoseTransform (R, p) maps frame-local coordinates into
// the parent frame: x_parent = R x + p.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace nthdyn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

using Twist = Vec6;
using Wrench = Vec6;

/// Joint screw coordinates. Unit revolute or prismatic screws are enforced at
/// model load; the algebra below accepts any finite screw.
struct Screw {
  Vec3 angular = Vec3::Zero();
  Vec3 linear = Vec3::Zero();

  Screw() = default;
  Screw(const Vec3& ang, const Vec3& lin) : angular(ang), linear(lin) {}
  explicit Screw(const Vec6& v) : angular(v.head<3>()), linear(v.tail<3>()) {}

  [[nodiscard]] Vec6 vector() const {
    Vec6 v;
    v << angular, linear;
    return v;
  }
  [[nodiscard]] bool is_finite() const {
    return angular.allFinite() && linear.allFinite();
  }
};

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<  0.0,  -v.z(),  v.y(),
        v.z(),  0.0,  -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return s;
}

class PoseTransform {
 public:
  PoseTransform() = default;
  PoseTransform(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static PoseTransform identity() { return {}; }

  [[nodiscard]] const Mat3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }

  [[nodiscard]] PoseTransform operator*(const PoseTransform& rhs) const {
    return {rotation_ * rhs.rotation_,
            rotation_ * rhs.translation_ + translation_};
  }

  [[nodiscard]] PoseTransform inverse() const {
    Mat3 rt = rotation_.transpose();
    return {rt, -rt * translation_};
  }

  [[nodiscard]] Vec3 apply(const Vec3& x) const {
    return rotation_ * x + translation_;
  }

  [[nodiscard]] Eigen::Matrix4d homogeneous() const {
    Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
    h.topLeftCorner<3, 3>() = rotation_;
    h.topRightCorner<3, 1>() = translation_;
    return h;
  }

  /// Orthonormality and proper-rotation check.
  [[nodiscard]] bool is_valid(double tol = 1e-12) const {
    if (!rotation_.allFinite() || !translation_.allFinite()) return false;
    double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity())
                       .cwiseAbs()
                       .maxCoeff();
    return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
  }

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// exp of the se(3) element screw * q.
///
/// Unit or general angular parts use the closed form
///   R = I + sin(th)/th W + (1 - cos(th))/th^2 W^2
///   p = (I + (1 - cos(th))/th^2 W + (th - sin(th))/th^3 W^2) v q
/// with W = skew(angular * q), th = |angular * q|. A zero angular part gives a
/// pure translation.
inline PoseTransform screw_exp(const Screw& screw, double q) {
  const Vec3 w = screw.angular * q;
  const Vec3 v = screw.linear * q;
  const double theta = w.norm();
  if (theta == 0.0) return {Mat3::Identity(), v};

  const Mat3 W = skew(w);
  const Mat3 W2 = W * W;
  const double th2 = theta * theta;
  double a, b, c;
  if (theta < 1e-6) {
    // Series expansions, error O(th^4).
    a = 1.0 - th2 / 6.0;
    b = 0.5 - th2 / 24.0;
    c = 1.0 / 6.0 - th2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / th2;
    c = (theta - std::sin(theta)) / (th2 * theta);
  }
  Mat3 R = Mat3::Identity() + a * W + b * W2;
  Vec3 p = (Mat3::Identity() + b * W + c * W2) * v;
  return {R, p};
}

/// Ad_C = [[R, 0], [skew(p) R, R]].
inline Mat6 adjoint_matrix(const PoseTransform& c) {
  Mat6 ad = Mat6::Zero();
  const Mat3& R = c.rotation();
  ad.topLeftCorner<3, 3>() = R;
  ad.bottomRightCorner<3, 3>() = R;
  ad.bottomLeftCorner<3, 3>() = skew(c.translation()) * R;
  return ad;
}

/// ad_V = [[skew(w), 0], [skew(v), skew(w)]], so ad_X Y is the Lie bracket [X, Y].
inline Mat6 ad_matrix(const Vec6& v) {
  Mat6 ad = Mat6::Zero();
  const Mat3 w = skew(v.head<3>());
  ad.topLeftCorner<3, 3>() = w;
  ad.bottomRightCorner<3, 3>() = w;
  ad.bottomLeftCorner<3, 3>() = skew(v.tail<3>());
  return ad;
}

inline Mat6 ad_matrix(const Screw& x) { return ad_matrix(x.vector()); }

/// Lie bracket [X, Y] = ad_X Y computed with cross products.
inline Vec6 lie_bracket(const Vec6& x, const Vec6& y) {
  Vec6 r;
  r.head<3>() = x.head<3>().cross(y.head<3>());
  r.tail<3>() = x.head<3>().cross(y.tail<3>()) + x.tail<3>().cross(y.head<3>());
  return r;
}

// ---------------------------------------------------------------------------
// Binomial coefficients
// ---------------------------------------------------------------------------

/// Largest order for which binomial() is available. Rows up to 62 fit in
/// uint64 without overflow.
inline constexpr int kMaxBinomialOrder = 62;

namespace detail {

using PascalRow = std::array<std::uint64_t, kMaxBinomialOrder + 1>;

constexpr std::array<PascalRow, kMaxBinomialOrder + 1> make_pascal() {
  std::array<PascalRow, kMaxBinomialOrder + 1> t{};
  for (int n = 0; n <= kMaxBinomialOrder; ++n) {
    t[n][0] = 1;
    for (int k = 1; k <= n; ++k) {
      t[n][k] = t[n - 1][k - 1] + (k <= n - 1 ? t[n - 1][k] : 0);
    }
  }
  return t;
}

inline constexpr auto kPascal = make_pascal();

}  // namespace detail

/// Exact C(n, k) from a cached Pascal triangle. Returns 0 for k outside [0, n].
inline std::uint64_t binomial_exact(int n, int k) {
  if (n < 0 || n > kMaxBinomialOrder) {
    throw std::out_of_range("binomial: order " + std::to_string(n) +
                            " outside [0, " +
                            std::to_string(kMaxBinomialOrder) + "]");
  }
  if (k < 0 || k > n) return 0;
  return detail::kPascal[n][k];
}

inline double binomial(int n, int k) {
  return static_cast<double>(binomial_exact(n, k));
}

// ---------------------------------------------------------------------------
// Derivative series
// ---------------------------------------------------------------------------

class SeriesLengthError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Requested derivative order is inconsistent with the available inputs.
class OrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// [x^(0), x^(1), ..., x^(k)]; entry r is the r-th time derivative.
template <typename T>
class DerivativeSeries {
 public:
  DerivativeSeries() = default;
  explicit DerivativeSeries(std::vector<T> entries)
      : entries_(std::move(entries)) {}

  /// Highest stored derivative order, -1 when empty.
  [[nodiscard]] int order() const { return static_cast<int>(entries_.size()) - 1; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }

  [[nodiscard]] const T& operator[](int r) const { return entries_[static_cast<std::size_t>(r)]; }
  T& operator[](int r) { return entries_[static_cast<std::size_t>(r)]; }

  [[nodiscard]] const T& at(int r) const {
    if (r < 0 || r > order()) {
      throw SeriesLengthError("derivative order " + std::to_string(r) +
                              " not stored (series order " +
                              std::to_string(order()) + ")");
    }
    return entries_[static_cast<std::size_t>(r)];
  }

  void push_back(T value) { entries_.push_back(std::move(value)); }
  void reserve(std::size_t n) { entries_.reserve(n); }

  [[nodiscard]] const std::vector<T>& entries() const { return entries_; }

  /// Copy of orders 0..k.
  [[nodiscard]] DerivativeSeries truncated(int k) const {
    if (k > order()) static_cast<void>(at(k));
    return DerivativeSeries(std::vector<T>(entries_.begin(), entries_.begin() + (k + 1)));
  }

 private:
  std::vector<T> entries_;
};

namespace detail {

// Materializes Eigen expression templates; passes scalars through.
template <typename T>
auto plain(T&& x) {
  using D = std::decay_t<T>;
  if constexpr (requires { typename D::PlainObject; }) {
    return typename D::PlainObject(std::forward<T>(x));
  } else {
    return D(std::forward<T>(x));
  }
}

}  // namespace detail

/// n-th derivative of product(f, g) by the Leibniz rule:
///   sum_{k=0}^{n} C(n, k) product(f^(n-k), g^(k)).
/// `product` is any bilinear map; its result type must support += and
/// scaling by double.
template <typename F, typename G, typename Product>
auto leibniz_combine(const DerivativeSeries<F>& f, const DerivativeSeries<G>& g,
                     int n, Product&& product) {
  if (n < 0) throw std::invalid_argument("leibniz_combine: negative order");
  if (f.order() < n || g.order() < n) {
    throw SeriesLengthError("leibniz_combine: order " + std::to_string(n) +
                            " exceeds stored series (f: " +
                            std::to_string(f.order()) +
                            ", g: " + std::to_string(g.order()) + ")");
  }
  auto acc = detail::plain(product(f[n], g[0]));
  for (int k = 1; k <= n; ++k) {
    acc += binomial(n, k) * detail::plain(product(f[n - k], g[k]));
  }
  return acc;
}

/// Derivatives of Ad_{C(t)} for C(t) = exp(-X q(t)) K with K constant, i.e.
/// the relative configuration of a body w.r.t. its predecessor:
///   D^(r) Ad = -ad_X sum_{s=0}^{r-1} C(r-1, s) D^(s) Ad q^(r-s).
/// `q` must hold q^(0)..q^(order); order-0 entry of the result is `ad0`.
inline DerivativeSeries<Mat6> relative_adjoint_series(
    const Mat6& ad0, const Screw& x, const DerivativeSeries<double>& q,
    int order) {
  if (q.order() < order) {
    throw SeriesLengthError("relative_adjoint_series: joint series order " +
                            std::to_string(q.order()) + " < " +
                            std::to_string(order));
  }
  const Mat6 adx = ad_matrix(x);
  DerivativeSeries<Mat6> out;
  out.reserve(static_cast<std::size_t>(order + 1));
  out.push_back(ad0);
  for (int r = 1; r <= order; ++r) {
    Mat6 sum = Mat6::Zero();
    for (int s = 0; s < r; ++s) {
      sum += binomial(r - 1, s) * q[r - s] * out[s];
    }
    out.push_back(-adx * sum);
  }
  return out;
}

}  // namespace nthdyn
