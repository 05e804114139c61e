#pragma once

#include "projctl/models.hpp"
#include "projctl/simulator.hpp"
#include "projctl/types.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace projctl {

/// Schema violation in a scenario file; `path` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct OutputOptions {
  std::string dir = "out";
  std::string prefix;
};

struct RunConfig {
  Scenario scenario;
  std::vector<OptimizerOptions> compare;
  std::vector<double> rho_sweep;
  OutputOptions output;
};

namespace config {

using nlohmann::json;

inline std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void allow_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError(join(path, it.key()), "unknown field");
  }
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
  return x;
}

inline double number(const json& obj, const std::string& path, const char* key, double dflt) {
  return obj.contains(key) ? number(obj.at(key), join(path, key)) : dflt;
}

inline double positive(const json& obj, const std::string& path, const char* key, double dflt) {
  const double x = number(obj, path, key, dflt);
  if (!(x > 0.0)) throw ConfigError(join(path, key), "must be positive");
  return x;
}

inline int integer(const json& obj, const std::string& path, const char* key, int dflt) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  return v.get<int>();
}

inline bool boolean(const json& obj, const std::string& path, const char* key, bool dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return obj.at(key).get<bool>();
}

inline std::string string(const json& obj, const std::string& path, const char* key,
                          const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
  return obj.at(key).get<std::string>();
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline Vector vector(const json& v, const std::string& path, Eigen::Index size) {
  const std::vector<double> xs = numbers(v, path);
  if (size >= 0 && static_cast<Eigen::Index>(xs.size()) != size) {
    throw ConfigError(path, "expected " + std::to_string(size) + " entries, got " +
                                std::to_string(xs.size()));
  }
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

// Scalar broadcast or one entry per actuator.
inline Vector per_actuator(const json& obj, const std::string& path, const char* key, int p,
                           double dflt) {
  if (!obj.contains(key)) return Vector::Constant(p, dflt);
  const json& v = obj.at(key);
  if (v.is_number()) return Vector::Constant(p, number(v, join(path, key)));
  return vector(v, join(path, key), p);
}

inline std::vector<int> indices(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of indices");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer()) {
      throw ConfigError(path + "[" + std::to_string(i) + "]", "expected an integer");
    }
    out.push_back(v[i].get<int>());
  }
  return out;
}

inline MotorParams motors(const json& model, const std::string& path, int p, double limit) {
  MotorParams m = MotorParams::uniform(p, limit);
  if (!model.contains("motors")) return m;
  const json& j = model.at("motors");
  const std::string mp = join(path, "motors");
  allow_keys(j, mp, {"u_limit", "resistance", "torque_constant"});
  m.u_limit = per_actuator(j, mp, "u_limit", p, limit);
  m.resistance = per_actuator(j, mp, "resistance", p, 1.0);
  m.torque_constant = per_actuator(j, mp, "torque_constant", p, 1.0);
  return m;
}

struct BuiltModel {
  RobotModel model;
  Vector q0;
};

inline BuiltModel build_model(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const std::string type = string(j, path, "type", "");
  try {
    if (type == "planar_arm") {
      allow_keys(j, path, {"type", "masses", "lengths", "gravity", "mu", "motors"});
      ArmParams p;
      if (j.contains("lengths")) p.lengths = numbers(j.at("lengths"), join(path, "lengths"));
      if (j.contains("masses")) p.masses = numbers(j.at("masses"), join(path, "masses"));
      if (p.masses.size() != p.lengths.size()) {
        throw ConfigError(join(path, "masses"), "needs one entry per link");
      }
      p.gravity = number(j, path, "gravity", p.gravity);
      p.mu = number(j, path, "mu", p.mu);
      p.motors = motors(j, path, p.links(), 50.0);
      return {planar_arm_contact(p), planar_arm_default_configuration(p.links())};
    }
    if (type == "floating_biped") {
      allow_keys(j, path, {"type", "foot", "torso_mass", "thigh_mass", "shank_mass", "foot_mass",
                           "thigh_length", "shank_length", "foot_height", "gravity", "mu",
                           "pelvis_height", "stance", "motors"});
      BipedParams p;
      const std::string foot = string(j, path, "foot", "flat");
      if (foot == "flat") {
        p.foot = BipedParams::Foot::flat;
      } else if (foot == "point") {
        p.foot = BipedParams::Foot::point;
      } else {
        throw ConfigError(join(path, "foot"), "must be \"flat\" or \"point\"");
      }
      p.torso_mass = number(j, path, "torso_mass", p.torso_mass);
      p.thigh_mass = number(j, path, "thigh_mass", p.thigh_mass);
      p.shank_mass = number(j, path, "shank_mass", p.shank_mass);
      p.foot_mass = number(j, path, "foot_mass", p.foot_mass);
      p.thigh_length = number(j, path, "thigh_length", p.thigh_length);
      p.shank_length = number(j, path, "shank_length", p.shank_length);
      p.foot_height = number(j, path, "foot_height", p.foot_height);
      p.gravity = number(j, path, "gravity", p.gravity);
      p.mu = number(j, path, "mu", p.mu);
      p.motors = motors(j, path, p.actuators(), 300.0);
      const double height = positive(j, path, "pelvis_height", 0.75);
      const double stance = number(j, path, "stance", 0.2);
      RobotModel m = floating_biped(p);
      return {m, biped_standing_configuration(p, height, stance)};
    }
    if (type == "point_mass") {
      allow_keys(j, path, {"type", "mass", "gravity", "mu", "u_limit"});
      RobotModel m = point_mass(number(j, path, "mass", 1.0), number(j, path, "gravity", 9.81),
                                number(j, path, "mu", 0.5), number(j, path, "u_limit", 100.0));
      return {m, Vector::Zero(3)};
    }
    if (type == "flat_foot_pendulum") {
      allow_keys(j, path, {"type", "foot_mass", "bob_mass", "length", "gravity", "mu"});
      RobotModel m = flat_foot_pendulum(
          number(j, path, "foot_mass", 1.0), number(j, path, "bob_mass", 2.0),
          number(j, path, "length", 0.5), number(j, path, "gravity", 9.81),
          number(j, path, "mu", 0.8));
      return {m, Vector::Zero(4)};
    }
  } catch (const InputError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(join(path, "type"), "unknown model \"" + type + "\"");
}

inline TaskSpec task(const json& j, const std::string& path) {
  allow_keys(j, path, {"joints", "offset", "amplitude", "frequency"});
  TaskSpec t;
  if (!j.contains("joints")) throw ConfigError(join(path, "joints"), "required");
  t.joints = indices(j.at("joints"), join(path, "joints"));
  if (t.joints.empty()) throw ConfigError(join(path, "joints"), "must not be empty");
  if (j.contains("offset")) t.offset = vector(j.at("offset"), join(path, "offset"), t.l());
  if (j.contains("amplitude")) {
    t.amplitude = vector(j.at("amplitude"), join(path, "amplitude"), t.l());
  }
  t.frequency = number(j, path, "frequency", 0.0);
  if (t.frequency < 0.0) throw ConfigError(join(path, "frequency"), "must be non-negative");
  return t;
}

inline OptimizerOptions optimizer(const json& j, const std::string& path) {
  OptimizerOptions o;
  std::string type;
  if (j.is_string()) {
    type = j.get<std::string>();
  } else {
    allow_keys(j, path, {"type", "eta0", "kappa", "eps", "newton_tol", "max_iters", "rho",
                         "relaxed_fallback"});
    type = string(j, path, "type", "qcqp");
    o.barrier.eta0 = positive(j, path, "eta0", o.barrier.eta0);
    o.barrier.kappa = positive(j, path, "kappa", o.barrier.kappa);
    if (o.barrier.kappa >= 1.0) throw ConfigError(join(path, "kappa"), "must be below 1");
    o.barrier.eps = positive(j, path, "eps", o.barrier.eps);
    o.barrier.newton_tol = positive(j, path, "newton_tol", o.barrier.newton_tol);
    o.barrier.max_iters = integer(j, path, "max_iters", o.barrier.max_iters);
    if (o.barrier.max_iters <= 0) throw ConfigError(join(path, "max_iters"), "must be positive");
    o.rho = positive(j, path, "rho", o.rho);
    o.relaxed_fallback = boolean(j, path, "relaxed_fallback", o.relaxed_fallback);
  }
  if (type == "min_norm") {
    o.type = OptimizerType::min_norm;
  } else if (type == "qcqp") {
    o.type = OptimizerType::qcqp;
  } else if (type == "qcqp_relaxed") {
    o.type = OptimizerType::qcqp_relaxed;
  } else {
    throw ConfigError(j.is_string() ? path : join(path, "type"),
                      "must be min_norm, qcqp or qcqp_relaxed");
  }
  return o;
}

}  // namespace config

/// Parses and validates a scenario document.
inline RunConfig parse_config(const nlohmann::json& doc, const std::string& default_id = "") {
  using namespace config;
  allow_keys(doc, "", {"id", "model", "initial_state", "task", "controller", "optimizer",
                       "compare", "contacts", "integrator", "duration", "nu", "output",
                       "rho_sweep"});
  RunConfig rc;
  Scenario& sc = rc.scenario;
  sc.id = string(doc, "", "id", default_id.empty() ? "scenario" : default_id);

  if (!doc.contains("model")) throw ConfigError("model", "required");
  BuiltModel bm = build_model(doc.at("model"), "model");
  sc.model = bm.model;
  const int n = sc.model.n;

  sc.initial.q = bm.q0;
  sc.initial.q_dot = Vector::Zero(n);
  if (doc.contains("initial_state")) {
    const json& is = doc.at("initial_state");
    allow_keys(is, "initial_state", {"q", "q_dot"});
    if (is.contains("q")) sc.initial.q = vector(is.at("q"), "initial_state.q", n);
    if (is.contains("q_dot")) sc.initial.q_dot = vector(is.at("q_dot"), "initial_state.q_dot", n);
  }

  if (!doc.contains("task")) throw ConfigError("task", "required");
  sc.task = task(doc.at("task"), "task");

  if (doc.contains("controller")) {
    const json& c = doc.at("controller");
    allow_keys(c, "controller", {"type", "gains"});
    const std::string type = string(c, "controller", "type", "tracking");
    if (type == "tracking") {
      sc.controller.type = ControllerType::tracking;
    } else if (type == "regulation") {
      sc.controller.type = ControllerType::regulation;
    } else {
      throw ConfigError("controller.type", "must be tracking or regulation");
    }
    if (c.contains("gains")) {
      const json& g = c.at("gains");
      allow_keys(g, "controller.gains", {"omega", "kp", "kd"});
      sc.controller.omega = positive(g, "controller.gains", "omega", sc.controller.omega);
      for (const char* key : {"kp", "kd"}) {
        if (!g.contains(key)) continue;
        const std::string path = std::string("controller.gains.") + key;
        std::vector<double> v =
            g.at(key).is_number() ? std::vector<double>{number(g.at(key), path)}
                                  : numbers(g.at(key), path);
        for (double x : v) {
          if (!(x > 0.0)) throw ConfigError(path, "gains must be positive");
        }
        (std::string(key) == "kp" ? sc.controller.kp : sc.controller.kd) = v;
      }
    }
  }

  if (doc.contains("optimizer")) sc.optimizer = optimizer(doc.at("optimizer"), "optimizer");
  if (doc.contains("compare")) {
    const json& c = doc.at("compare");
    if (!c.is_array()) throw ConfigError("compare", "expected an array of optimizers");
    for (std::size_t i = 0; i < c.size(); ++i) {
      rc.compare.push_back(optimizer(c[i], "compare[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("rho_sweep")) {
    rc.rho_sweep = numbers(doc.at("rho_sweep"), "rho_sweep");
    for (double r : rc.rho_sweep) {
      if (!(r > 0.0)) throw ConfigError("rho_sweep", "entries must be positive");
    }
  }

  if (doc.contains("contacts")) {
    const json& c = doc.at("contacts");
    allow_keys(c, "contacts", {"schedule"});
    if (c.contains("schedule")) {
      const json& s = c.at("schedule");
      if (!s.is_array()) throw ConfigError("contacts.schedule", "expected an array");
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string path = "contacts.schedule[" + std::to_string(i) + "]";
        allow_keys(s[i], path, {"t", "active", "task"});
        ContactPhase ph;
        if (!s[i].contains("t")) throw ConfigError(join(path, "t"), "required");
        ph.t = number(s[i].at("t"), join(path, "t"));
        if (!s[i].contains("active")) throw ConfigError(join(path, "active"), "required");
        ph.active = indices(s[i].at("active"), join(path, "active"));
        for (int a : ph.active) {
          if (a < 0 || a >= static_cast<int>(sc.model.contacts.size())) {
            throw ConfigError(join(path, "active"), "contact index out of range");
          }
        }
        if (i > 0 && !(ph.t > sc.schedule.back().t)) {
          throw ConfigError(join(path, "t"), "schedule times must be strictly increasing");
        }
        if (ph.t < 0.0) throw ConfigError(join(path, "t"), "must be non-negative");
        if (s[i].contains("task")) ph.task = task(s[i].at("task"), join(path, "task"));
        sc.schedule.push_back(ph);
      }
    }
  }
  if (!sc.schedule.empty() && sc.schedule.front().t == 0.0) {
    sc.initial.active_contacts = sc.schedule.front().active;
  }

  if (doc.contains("integrator")) {
    const json& ig = doc.at("integrator");
    allow_keys(ig, "integrator", {"dt", "method", "baumgarte", "drift_limit"});
    sc.integrator.dt = positive(ig, "integrator", "dt", sc.integrator.dt);
    sc.integrator.method = string(ig, "integrator", "method", sc.integrator.method);
    if (sc.integrator.method != "rk4" && sc.integrator.method != "euler") {
      throw ConfigError("integrator.method", "must be rk4 or euler");
    }
    sc.integrator.drift_limit = positive(ig, "integrator", "drift_limit", sc.integrator.drift_limit);
    if (ig.contains("baumgarte")) {
      const json& b = ig.at("baumgarte");
      if (b.is_boolean()) {
        sc.integrator.baumgarte = b.get<bool>();
      } else {
        allow_keys(b, "integrator.baumgarte", {"alpha", "beta"});
        sc.integrator.baumgarte = true;
        sc.integrator.baumgarte_alpha = positive(b, "integrator.baumgarte", "alpha", 20.0);
        sc.integrator.baumgarte_beta = positive(b, "integrator.baumgarte", "beta", 100.0);
      }
    }
  }
  sc.duration = positive(doc, "", "duration", sc.duration);
  if (doc.contains("nu")) sc.nu = positive(doc, "", "nu", 1.0);

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    allow_keys(o, "output", {"dir", "prefix"});
    rc.output.dir = string(o, "output", "dir", rc.output.dir);
    rc.output.prefix = string(o, "output", "prefix", "");
  }
  if (rc.output.prefix.empty()) rc.output.prefix = sc.id;

  for (int j : sc.task.joints) {
    if (j < 0 || j >= n) throw ConfigError("task.joints", "joint index out of range");
  }
  try {
    sc.validate();
    (void)sc.controller.gains(sc.task.l(), n);
  } catch (const InputError& e) {
    throw ConfigError("<scenario>", e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
  return parse_config(doc, stem);
}

}  // namespace projctl
