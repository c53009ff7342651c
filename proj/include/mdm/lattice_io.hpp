#pragma once

// Checkpoints and flow logs. Uses the single-header nlohmann json from vendor/.

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mdm/lattice.hpp"

namespace mdm {

inline constexpr const char* kCheckpointFormat = "mdm-lattice";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const LatticeState& st) {
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"n", st.n}, {"psi", st.psi}, {"a", st.a}};
}

inline LatticeState state_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat)
    throw std::runtime_error("not an mdm-lattice checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  LatticeState st(j.at("n").get<int>());
  auto psi = j.at("psi").get<std::vector<double>>();
  auto a = j.at("a").get<std::vector<double>>();
  if (psi.size() != st.psi.size() || a.size() != st.a.size())
    throw std::runtime_error("checkpoint arrays do not match n = " + std::to_string(st.n));
  st.psi = std::move(psi);
  st.a = std::move(a);
  return st;
}

inline void save_checkpoint(const LatticeState& st, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(st).dump() << '\n';
}

inline LatticeState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return state_from_json(nlohmann::json::parse(in));
}

inline nlohmann::json to_json(const LatticeResiduals& r) {
  return {{"r_ric20", r.r_ric20},     {"r_da20", r.r_da20},           {"r_domega", r.r_domega},
          {"r_mainfeq", r.r_mainfeq}, {"grad_s", r.grad_s},           {"max_j_defect", r.max_j_defect},
          {"mainfeq_conditional", r.mainfeq_conditional}};
}

inline nlohmann::json to_json(const FlowEntry& e) {
  nlohmann::json j{{"iter", e.iter}, {"action", e.action}, {"grad_norm", e.grad_norm}, {"step", e.step}};
  if (e.residuals) j["residuals"] = to_json(*e.residuals);
  return j;
}

/// One JSON object per line, one line per iteration.
inline void write_jsonl(const FlowLog& log, std::ostream& out) {
  for (const auto& e : log.entries) out << to_json(e).dump() << '\n';
}

inline void write_csv(const FlowLog& log, std::ostream& out) {
  out << "iter,action,grad_norm,step,r_ric20,r_da20,r_domega,r_mainfeq\n";
  out.precision(17);
  for (const auto& e : log.entries) {
    out << e.iter << ',' << e.action << ',' << e.grad_norm << ',' << e.step;
    if (e.residuals)
      out << ',' << e.residuals->r_ric20 << ',' << e.residuals->r_da20 << ',' << e.residuals->r_domega << ','
          << e.residuals->r_mainfeq;
    else
      out << ",,,,";
    out << '\n';
  }
}

}  // namespace mdm
