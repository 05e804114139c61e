#pragma once

#include "projctl/scenario.hpp"
#include "projctl/simulator.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace projctl {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Column names of the trace CSV in order.
inline std::vector<std::string> trace_columns(const SimTrace& tr) {
  std::vector<std::string> cols{"t"};
  for (int i = 0; i < tr.n; ++i) cols.push_back("q" + std::to_string(i));
  for (int i = 0; i < tr.n; ++i) cols.push_back("dq" + std::to_string(i));
  for (int i = 0; i < tr.l_max; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 0; i < tr.l_max; ++i) cols.push_back("xd" + std::to_string(i));
  cols.push_back("e_norm");
  for (int i = 0; i < tr.p; ++i) cols.push_back("u" + std::to_string(i));
  for (std::size_t c = 0; c < tr.contact_names.size(); ++c) {
    const std::string s = std::to_string(c);
    for (const char* k : {"lam_x_", "lam_y_", "lam_z_", "margin_"}) cols.push_back(k + s);
  }
  for (const char* k : {"p_loss", "lyapunov", "phi_norm", "d_norm", "newton_iters", "eta",
                        "status"}) {
    cols.emplace_back(k);
  }
  return cols;
}

inline std::string trace_csv(const SimTrace& tr) {
  std::ostringstream os;
  const auto cols = trace_columns(tr);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : tr.records) {
    os << format_double(r.t);
    auto put = [&](const Vector& v, int count) {
      for (int i = 0; i < count; ++i) os << ',' << format_double(i < v.size() ? v(i) : nan);
    };
    put(r.q, tr.n);
    put(r.q_dot, tr.n);
    put(r.x, tr.l_max);
    put(r.x_d, tr.l_max);
    os << ',' << format_double(r.e_norm);
    put(r.u, tr.p);
    for (std::size_t c = 0; c < tr.contact_names.size(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      os << ',' << format_double(r.lambda(3 * ci)) << ',' << format_double(r.lambda(3 * ci + 1))
         << ',' << format_double(r.lambda(3 * ci + 2)) << ',' << format_double(r.margin(ci));
    }
    os << ',' << format_double(r.p_loss) << ',' << format_double(r.lyapunov) << ','
       << format_double(r.phi_norm) << ',' << format_double(r.d_norm) << ',' << r.newton_iters
       << ',' << format_double(r.eta) << ',' << r.status << '\n';
  }
  return os.str();
}

/// Writes through a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct RunSummary {
  std::string optimizer;
  double initial_error = 0.0;
  double final_error = 0.0;
  double dissipated_energy = 0.0;  // sum of p_loss * dt over the held intervals
  int violations = 0;
  int cone_violations = 0;
  int box_violations = 0;
  int relaxed_steps = 0;
  double mean_newton_iters = 0.0;
  double mean_centering_steps = 0.0;
  double max_drift = 0.0;
  double max_phi_norm = 0.0;
  std::size_t records = 0;
};

inline RunSummary summarize(const SimTrace& tr, double dt) {
  RunSummary s;
  s.optimizer = tr.optimizer;
  s.records = tr.records.size();
  if (tr.records.empty()) return s;
  s.initial_error = tr.records.front().e_norm;
  s.final_error = tr.records.back().e_norm;
  for (std::size_t k = 0; k < tr.records.size(); ++k) {
    const auto& r = tr.records[k];
    if (k + 1 < tr.records.size()) s.dissipated_energy += r.p_loss * dt;
    s.violations += r.violation ? 1 : 0;
    s.cone_violations += r.cone_violation ? 1 : 0;
    s.box_violations += r.box_violation ? 1 : 0;
    s.relaxed_steps += r.status == "relaxed" ? 1 : 0;
    s.mean_newton_iters += r.newton_iters;
    s.mean_centering_steps += r.centering_steps;
    s.max_drift = std::max(s.max_drift, r.drift);
    s.max_phi_norm = std::max(s.max_phi_norm, r.phi_norm);
  }
  s.mean_newton_iters /= static_cast<double>(tr.records.size());
  s.mean_centering_steps /= static_cast<double>(tr.records.size());
  return s;
}

inline nlohmann::ordered_json summary_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["optimizer"] = s.optimizer;
  j["records"] = s.records;
  j["initial_error"] = s.initial_error;
  j["final_error"] = s.final_error;
  j["dissipated_energy"] = s.dissipated_energy;
  j["violations"] = s.violations;
  j["cone_violations"] = s.cone_violations;
  j["box_violations"] = s.box_violations;
  j["relaxed_steps"] = s.relaxed_steps;
  j["mean_newton_iters"] = s.mean_newton_iters;
  j["mean_centering_steps"] = s.mean_centering_steps;
  j["max_drift"] = s.max_drift;
  j["max_phi_norm"] = s.max_phi_norm;
  return j;
}

struct RunReport {
  std::string scenario;
  std::string controller;
  std::vector<RunSummary> rows;
  std::string exit_status = "ok";
  std::string message;
  // compare only
  bool dominance_applicable = false;
  bool dominance_holds = true;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario;
    j["controller"] = controller;
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) j["runs"].push_back(summary_json(r));
    if (rows.size() > 1) {
      j["dominance_applicable"] = dominance_applicable;
      j["dominance_holds"] = dominance_holds;
    }
    j["exit_status"] = exit_status;
    if (!message.empty()) j["message"] = message;
    return j;
  }
};

/// Pointwise dominance check: when both runs stay strictly feasible the
/// weighted optimum can only dissipate less than the minimum-norm allocation.
inline void check_dominance(RunReport& report, double rel_tol = 1e-6) {
  const RunSummary* mn = nullptr;
  const RunSummary* qp = nullptr;
  for (const auto& r : report.rows) {
    if (r.optimizer == "min_norm") mn = &r;
    if (r.optimizer == "qcqp") qp = &r;
  }
  if (mn == nullptr || qp == nullptr) return;
  report.dominance_applicable = mn->violations == 0 && qp->violations == 0 && qp->relaxed_steps == 0;
  if (report.dominance_applicable) {
    report.dominance_holds = qp->dissipated_energy <= mn->dissipated_energy * (1.0 + rel_tol);
  }
}

inline std::string report_text(const RunReport& r) {
  std::ostringstream os;
  os << "scenario " << r.scenario << " (" << r.controller << ")\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-13s %12s %12s %14s %6s %6s %6s %8s\n", "optimizer",
                "e(0)", "e(T)", "energy [J]", "viol", "cone", "box", "newton");
  os << buf;
  for (const auto& s : r.rows) {
    std::snprintf(buf, sizeof buf, "  %-13s %12.4e %12.4e %14.6f %6d %6d %6d %8.2f\n",
                  s.optimizer.c_str(), s.initial_error, s.final_error, s.dissipated_energy,
                  s.violations, s.cone_violations, s.box_violations, s.mean_newton_iters);
    os << buf;
  }
  if (r.dominance_applicable) {
    os << "  energy dominance (qcqp <= min_norm): " << (r.dominance_holds ? "holds" : "VIOLATED")
       << '\n';
  }
  return os.str();
}

}  // namespace projctl
