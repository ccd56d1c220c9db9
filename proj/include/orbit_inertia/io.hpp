#ifndef ORBIT_INERTIA_IO_HPP_
#define ORBIT_INERTIA_IO_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "orbit_inertia/simulation.hpp"

namespace orbit_inertia {

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                                     const std::string& context) {
  if (!j.contains(key)) {
    throw ParseError(context + ": missing field '" + key + "'");
  }
  return j.at(key);
}

inline Vec3 to_vec3(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) throw ParseError(context + ": expected 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Vec10 to_vec10(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 10) throw ParseError(context + ": expected 10 numbers");
  Vec10 v;
  for (int i = 0; i < 10; ++i) v[i] = j[i].get<double>();
  return v;
}

inline Pose to_pose(const nlohmann::json& j, const std::string& context) {
  const Vec3 xyz = j.contains("xyz") ? to_vec3(j.at("xyz"), context + ".xyz") : Vec3::Zero();
  const Vec3 rpy = j.contains("rpy") ? to_vec3(j.at("rpy"), context + ".rpy") : Vec3::Zero();
  return Pose::FromRpy(xyz, rpy);
}

}  // namespace detail

inline MultibodyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("model file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model '" + path.string() + "': " + e.what());
  }

  MultibodyModel model;
  model.gravity = detail::to_vec3(detail::require(j, "gravity", "model"), "model.gravity");
  std::map<std::string, int> index;
  for (const auto& jl : detail::require(j, "links", "model")) {
    const std::string name = detail::require(jl, "name", "link").get<std::string>();
    const std::string context = "link '" + name + "'";
    LinkModel link;
    link.name = name;
    const auto& parent = detail::require(jl, "parent", context);
    if (parent.is_null()) {
      link.parent = -1;
    } else {
      const std::string pname = parent.get<std::string>();
      if (!index.count(pname)) throw ParseError(context + ": parent '" + pname + "' undefined");
      link.parent = index[pname];
    }
    const std::string joint = detail::require(jl, "joint", context).get<std::string>();
    if (joint == "revolute") {
      link.joint = JointType::Revolute;
      link.axis = detail::to_vec3(detail::require(jl, "axis", context), context + ".axis");
      if (std::abs(link.axis.norm() - 1.0) > 1e-12) {
        throw ParseError(context + ".axis: not unit length");
      }
    } else if (joint == "fixed") {
      link.joint = JointType::Fixed;
    } else if (joint == "floating") {
      link.joint = JointType::FloatingBase;
      if (!index.empty()) throw ParseError(context + ".joint: floating base must be link 0");
    } else {
      throw ParseError(context + ".joint: unknown type '" + joint + "'");
    }
    if (jl.contains("origin")) link.origin = detail::to_pose(jl.at("origin"), context + ".origin");
    link.phi = InertiaParams(detail::to_vec10(detail::require(jl, "phi", context), context + ".phi"));
    index[name] = model.num_links();
    model.links.push_back(link);
  }
  const std::string ee = detail::require(j, "end_effector", "model").get<std::string>();
  if (!index.count(ee)) throw ParseError("model.end_effector: unknown link '" + ee + "'");
  model.end_effector = index[ee];
  return model;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("scenario file not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scenario '" + path.string() + "': " + e.what());
  }

  Scenario s;
  s.name = j.value("name", path.stem().string());
  const std::string model_rel = detail::require(j, "model", "scenario").get<std::string>();
  s.model = load_model(path.parent_path() / model_rel);

  const std::string mode = detail::require(j, "base_mode", "scenario").get<std::string>();
  if (mode == "fixed") {
    s.base_mode = BaseMode::Fixed;
  } else if (mode == "floating") {
    s.base_mode = BaseMode::Floating;
  } else {
    throw ParseError("scenario.base_mode: expected 'fixed' or 'floating', got '" + mode + "'");
  }
  if ((s.base_mode == BaseMode::Floating) != s.model.floating()) {
    throw ParseError("scenario.base_mode: does not match the model's base joint");
  }

  s.target = InertiaParams(
      detail::to_vec10(detail::require(detail::require(j, "target", "scenario"), "phi", "target"),
                       "target.phi"));
  if (j.contains("grasp")) s.grasp = detail::to_pose(j.at("grasp"), "scenario.grasp");

  const std::string kind = detail::require(j, "regressor", "scenario").get<std::string>();
  if (kind == "force") {
    s.regressor_kind = RegressorKind::Force;
  } else if (kind == "momentum") {
    s.regressor_kind = RegressorKind::Momentum;
  } else {
    throw ParseError("scenario.regressor: expected 'force' or 'momentum', got '" + kind + "'");
  }
  if (s.regressor_kind == RegressorKind::Momentum && s.base_mode == BaseMode::Fixed) {
    throw ParseError("scenario.regressor: Momentum requires Floating base");
  }

  s.alpha_eta = j.value("alpha_eta", 0.0);
  s.alpha = detail::require(j, "alpha", "scenario").get<double>();
  s.noise_pct = j.value("noise_pct", 0.05);
  s.relative_noise = j.value("relative_noise", false);
  s.duration = detail::require(j, "duration", "scenario").get<double>();
  s.dt_sim = j.value("dt_sim", 1e-4);
  s.dt_est = j.value("dt_est", 1e-2);
  const double ratio = s.dt_est / s.dt_sim;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ParseError("scenario.dt_est: must be an integer multiple of dt_sim");
  }
  if (j.contains("trajectory")) {
    const auto& jt = j.at("trajectory");
    s.trajectory.r = jt.value("r", s.trajectory.r);
    s.trajectory.r_omega = jt.value("r_omega", s.trajectory.r_omega);
    s.trajectory.f = jt.value("f", s.trajectory.f);
    s.trajectory.f_z = jt.value("f_z", s.trajectory.f_z);
    s.trajectory.f_omega_x = jt.value("f_omega_x", s.trajectory.f_omega_x);
    s.trajectory.f_omega_y = jt.value("f_omega_y", s.trajectory.f_omega_y);
    s.trajectory.f_omega_z = jt.value("f_omega_z", s.trajectory.f_omega_z);
  }
  s.lambda_dls = j.value("lambda_dls", 1e-6);
  s.velocity_gain = j.value("velocity_gain", 20.0);
  if (j.contains("q0")) {
    const auto& jq = j.at("q0");
    s.q0_joints = VecX(jq.size());
    for (size_t i = 0; i < jq.size(); ++i) s.q0_joints[i] = jq[i].get<double>();
    if (static_cast<int>(jq.size()) != s.model.num_revolute()) {
      throw ParseError("scenario.q0: expected " + std::to_string(s.model.num_revolute()) +
                       " joint angles");
    }
  }
  if (j.contains("prior_phi")) {
    s.prior = InertiaParams(detail::to_vec10(j.at("prior_phi"), "scenario.prior_phi"));
  }
  return s;
}

// Full double precision so determinism is byte-checkable.
inline std::string fmt_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_trace_csv(const std::filesystem::path& path, const ExperimentLog& log) {
  std::ofstream out(path);
  out << "k,t,J,D_phi,RMS,min_eig_L,newton_iters";
  for (int i = 0; i < 10; ++i) out << ",theta" << i;
  out << "\n";
  for (const auto& r : log.rows) {
    out << r.k << ',' << fmt_g17(r.t) << ',' << fmt_g17(r.objective) << ',' << fmt_g17(r.d_phi)
        << ',' << fmt_g17(r.rms) << ',' << fmt_g17(r.min_eig_l) << ',' << r.newton_iters;
    for (int i = 0; i < 10; ++i) out << ',' << fmt_g17(r.theta[i]);
    out << "\n";
  }
}

inline void write_summary_json(const std::filesystem::path& path, const Scenario& scenario,
                               std::uint64_t seed, const ExperimentLog& log, double wall_time_s) {
  nlohmann::json j;
  j["scenario"] = scenario.name;
  j["seed"] = seed;
  j["final_D_phi"] = log.final_d_phi;
  j["final_RMS"] = log.final_rms;
  j["momentum_drift"] = log.momentum_drift;
  j["stall_count"] = log.stall_count;
  j["completed"] = log.completed;
  if (!log.error.empty()) j["error"] = log.error;
  j["wall_time"] = wall_time_s;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

/// Debug dump: one CSV row per (sample, matrix row), columns labeled by
/// parameter names.
inline void write_regressor_csv(const std::filesystem::path& path,
                                const std::vector<RegressorSample>& samples,
                                const std::vector<std::string>& labels) {
  std::ofstream out(path);
  out << "time,row";
  for (const auto& l : labels) out << ',' << l;
  out << ",measurement\n";
  for (const auto& s : samples) {
    for (Eigen::Index r = 0; r < s.matrix.rows(); ++r) {
      out << fmt_g17(s.time) << ',' << r;
      for (Eigen::Index c = 0; c < s.matrix.cols(); ++c) out << ',' << fmt_g17(s.matrix(r, c));
      out << ',' << fmt_g17(s.measurement[r]) << "\n";
    }
  }
}

}  // namespace orbit_inertia

#endif  // ORBIT_INERTIA_IO_HPP_
