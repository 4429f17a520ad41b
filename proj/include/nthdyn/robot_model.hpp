#pragma once

// Serial-chain model: joint screws, zero-configuration offsets, body-fixed
// spatial inertias and gravity. Loaded from / saved to JSON.
//
// JSON layout (SI units throughout):
// {
//   "gravity": [gx, gy, gz],                 // m/s^2, inertial frame
//   "bodies": [
//     {
//       "name": "link1",
//       "joint_type": "revolute" | "prismatic",
//       "screw": {"angular": [..3], "linear": [..3]},   // in body frame
//       "offset": {"rotation": [..9 row-major], "translation": [..3]},
//       "inertia": {
//         "mass": m,                          // kg
//         "com": [..3],                       // m, body-frame origin to COM
//         "rot_inertia": [..9 row-major]      // kg m^2, about the body-frame
//       }                                     // ORIGIN, not about the COM
//     }, ...
//   ]
// }

#include "nthdyn/screw_algebra.hpp"

#include <json.hpp>  // nlohmann/json, vendored

#include <Eigen/Cholesky>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace nthdyn {

/// Malformed file or schema mismatch.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model invariant does not hold; the message names the body.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class JointType { kRevolute, kPrismatic };

inline const char* to_string(JointType t) {
  return t == JointType::kRevolute ? "revolute" : "prismatic";
}

struct SpatialInertia {
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  Mat3 rot_inertia = Mat3::Identity();  // about the frame origin
};

/// [[Theta, m skew(d)], [-m skew(d), m I]].
inline Mat6 spatial_inertia_matrix(const SpatialInertia& in) {
  Mat6 m = Mat6::Zero();
  const Mat3 md = in.mass * skew(in.com);
  m.topLeftCorner<3, 3>() = in.rot_inertia;
  m.topRightCorner<3, 3>() = md;
  m.bottomLeftCorner<3, 3>() = -md;
  m.bottomRightCorner<3, 3>() = in.mass * Mat3::Identity();
  return m;
}

struct BodyParams {
  std::string name;
  JointType joint_type = JointType::kRevolute;
  Screw joint_screw;
  PoseTransform offset;
  SpatialInertia inertia;
};

struct ChainModel {
  std::vector<BodyParams> bodies;
  Vec3 gravity = Vec3::Zero();

  [[nodiscard]] int dof() const { return static_cast<int>(bodies.size()); }
};

namespace detail {

inline std::string body_label(const BodyParams& b, int index) {
  return "body " + std::to_string(index + 1) + " ('" + b.name + "')";
}

}  // namespace detail

/// Checks every model invariant and normalizes screws that are unit up to
/// roundoff. Throws ValidationError naming the first offending body.
inline void validate_model(ChainModel& model) {
  if (model.bodies.empty()) {
    throw ValidationError("model must contain at least one body");
  }
  if (!model.gravity.allFinite()) {
    throw ValidationError("gravity must be finite");
  }
  constexpr double kUnitTol = 1e-6;
  // Below this the screw is left untouched so save/load stays bit-exact.
  constexpr double kRenormTol = 1e-12;
  for (int i = 0; i < model.dof(); ++i) {
    BodyParams& b = model.bodies[static_cast<std::size_t>(i)];
    const std::string who = detail::body_label(b, i);
    Screw& x = b.joint_screw;
    if (!x.is_finite()) throw ValidationError(who + ": joint screw must be finite");
    if (b.joint_type == JointType::kRevolute) {
      const double n = x.angular.norm();
      if (std::abs(n - 1.0) > kUnitTol) {
        throw ValidationError(who +
                              ": revolute screw must have a unit angular part "
                              "(|angular| = " +
                              std::to_string(n) + ")");
      }
      if (std::abs(n - 1.0) > kRenormTol) x.angular /= n;
    } else {
      if (x.angular.norm() > 1e-12) {
        throw ValidationError(who +
                              ": prismatic screw must have zero angular part");
      }
      const double n = x.linear.norm();
      if (std::abs(n - 1.0) > kUnitTol) {
        throw ValidationError(who +
                              ": prismatic screw must have a unit linear part "
                              "(|linear| = " +
                              std::to_string(n) + ")");
      }
      x.angular.setZero();
      if (std::abs(n - 1.0) > kRenormTol) x.linear /= n;
    }

    if (!b.offset.is_valid(1e-9)) {
      throw ValidationError(who + ": offset rotation must be orthonormal with det +1");
    }

    const SpatialInertia& in = b.inertia;
    if (!std::isfinite(in.mass) || !(in.mass > 0.0)) {
      throw ValidationError(who + ": mass must be positive");
    }
    if (!in.com.allFinite() || !in.rot_inertia.allFinite()) {
      throw ValidationError(who + ": inertia parameters must be finite");
    }
    if ((in.rot_inertia - in.rot_inertia.transpose()).cwiseAbs().maxCoeff() >
        1e-12) {
      throw ValidationError(who + ": rot_inertia must be symmetric");
    }
    Eigen::LLT<Mat3> llt(in.rot_inertia);
    if (llt.info() != Eigen::Success) {
      throw ValidationError(who + ": rot_inertia must be positive definite");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(ctx + ": missing field '" + key + "'");
  }
  return j.at(key);
}

inline double read_number(const json& j, const std::string& ctx) {
  if (!j.is_number()) throw ParseError(ctx + ": expected a number");
  return j.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != N) {
    throw ParseError(ctx + ": expected an array of " + std::to_string(N) +
                     " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = read_number(j[static_cast<std::size_t>(i)], ctx);
  return v;
}

inline Mat3 read_mat3(const json& j, const std::string& ctx) {
  const auto flat = read_vector<9>(j, ctx);
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = flat[3 * r + c];
  return m;
}

inline json write_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json write_mat3(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace detail

/// Parses and validates a model document.
inline ChainModel model_from_json(const nlohmann::json& doc) {
  using detail::require;
  ChainModel model;
  model.gravity = detail::read_vector<3>(require(doc, "gravity", "model"), "gravity");
  const auto& bodies = require(doc, "bodies", "model");
  if (!bodies.is_array()) throw ParseError("model: 'bodies' must be an array");

  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const auto& jb = bodies[i];
    const std::string ctx = "bodies[" + std::to_string(i) + "]";
    BodyParams b;
    const auto& name = require(jb, "name", ctx);
    if (!name.is_string()) throw ParseError(ctx + ".name: expected a string");
    b.name = name.get<std::string>();

    const auto& jt = require(jb, "joint_type", ctx);
    const std::string type = jt.is_string() ? jt.get<std::string>() : "";
    if (type == "revolute") {
      b.joint_type = JointType::kRevolute;
    } else if (type == "prismatic") {
      b.joint_type = JointType::kPrismatic;
    } else {
      throw ParseError(ctx + ".joint_type: expected \"revolute\" or \"prismatic\"");
    }

    const auto& screw = require(jb, "screw", ctx);
    b.joint_screw.angular = detail::read_vector<3>(require(screw, "angular", ctx + ".screw"), ctx + ".screw.angular");
    b.joint_screw.linear = detail::read_vector<3>(require(screw, "linear", ctx + ".screw"), ctx + ".screw.linear");

    const auto& off = require(jb, "offset", ctx);
    b.offset = PoseTransform(
        detail::read_mat3(require(off, "rotation", ctx + ".offset"), ctx + ".offset.rotation"),
        detail::read_vector<3>(require(off, "translation", ctx + ".offset"), ctx + ".offset.translation"));

    const auto& in = require(jb, "inertia", ctx);
    b.inertia.mass = detail::read_number(require(in, "mass", ctx + ".inertia"), ctx + ".inertia.mass");
    b.inertia.com = detail::read_vector<3>(require(in, "com", ctx + ".inertia"), ctx + ".inertia.com");
    b.inertia.rot_inertia = detail::read_mat3(require(in, "rot_inertia", ctx + ".inertia"), ctx + ".inertia.rot_inertia");

    model.bodies.push_back(std::move(b));
  }
  validate_model(model);
  return model;
}

inline nlohmann::json model_to_json(const ChainModel& model) {
  using nlohmann::json;
  json doc;
  doc["gravity"] = detail::write_vec3(model.gravity);
  doc["bodies"] = json::array();
  for (const auto& b : model.bodies) {
    json jb;
    jb["name"] = b.name;
    jb["joint_type"] = to_string(b.joint_type);
    jb["screw"] = {{"angular", detail::write_vec3(b.joint_screw.angular)},
                   {"linear", detail::write_vec3(b.joint_screw.linear)}};
    jb["offset"] = {{"rotation", detail::write_mat3(b.offset.rotation())},
                    {"translation", detail::write_vec3(b.offset.translation())}};
    jb["inertia"] = {{"mass", b.inertia.mass},
                     {"com", detail::write_vec3(b.inertia.com)},
                     {"rot_inertia", detail::write_mat3(b.inertia.rot_inertia)}};
    doc["bodies"].push_back(std::move(jb));
  }
  return doc;
}

inline ChainModel load_model(const std::filesystem::path& path) {
  return model_from_json(detail::read_json_file(path));
}

inline void save_model(const ChainModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << model_to_json(model).dump(2) << '\n';
}

}  // namespace nthdyn
