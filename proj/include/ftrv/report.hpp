#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftrv/evaluator.hpp"
#include "ftrv/gradient.hpp"
#include "ftrv/optimizer.hpp"
#include "ftrv/simulate.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

/// Agent indices contained in a subset mask.
inline std::vector<int> subset_agents(AgentSubset s) {
  std::vector<int> out;
  for (int i = 0; i < 32; ++i)
    if (s >> i & 1u) out.push_back(i);
  return out;
}

namespace detail {

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"ET_max", detail::finite_or_null(m.et_max)},
          {"VT_max", detail::finite_or_null(m.vt_max)},
          {"sqrt_VT_max", detail::finite_or_null(m.sqrt_vt_max)},
          {"ET_R_max", m.et_r_max ? nlohmann::json(*m.et_r_max) : nlohmann::json(nullptr)}};
}

inline nlohmann::json report_to_json(const EvaluationReport& r, const ConfigSpace& space,
                                     const CompiledObjective& obj) {
  nlohmann::json bs = nlohmann::json::array();
  for (std::size_t b = 0; b < r.bsccs.size(); ++b) {
    const auto& res = r.bsccs[b];
    nlohmann::json j{{"index", b},
                     {"size", res.members.size()},
                     {"first_config", space.label(res.members.front())},
                     {"covered", res.covered},
                     {"U", detail::finite_or_null(res.u)}};
    if (res.degenerate) j["diagnostic"] = res.diagnostic;
    if (!res.uncovered_atoms.empty()) j["uncovered_atoms"] = res.uncovered_atoms;
    if (res.covered) {
      nlohmann::json atoms = nlohmann::json::array();
      for (const auto& a : res.atoms)
        atoms.push_back({{"atom", a.label},
                         {"value", a.value},
                         {"witness", space.label(a.witness_config)},
                         {"agents", subset_agents(a.witness_subset)}});
      j["atoms"] = std::move(atoms);
      nlohmann::json sums = nlohmann::json::array();
      for (std::size_t s = 0; s < res.summands.size(); ++s) {
        const auto& w = res.summands[s];
        nlohmann::json subsets = nlohmann::json::array();
        for (auto m : w.subsets) subsets.push_back(subset_agents(m));
        sums.push_back({{"weight", obj.summands[s].weight},
                        {"term", obj.summands[s].terms[w.term].label},
                        {"value", w.value},
                        {"witness", space.label(w.config)},
                        {"agents", std::move(subsets)}});
      }
      j["summands"] = std::move(sums);
      j["metrics"] = metrics_to_json(res.metrics);
    }
    bs.push_back(std::move(j));
  }
  return {{"U", r.u},
          {"chosen_bscc", r.chosen},
          {"initial_config", r.initial_label},
          {"metrics", metrics_to_json(r.metrics)},
          {"bsccs", std::move(bs)}};
}

inline nlohmann::json validation_to_json(const ValidationReport& v) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : v.atoms)
    atoms.push_back({{"atom", a.label},
                     {"witness", a.witness},
                     {"agents", subset_agents(a.subset)},
                     {"analytic", a.analytic},
                     {"empirical", a.empirical},
                     {"std_error", a.std_error},
                     {"censored", a.censored},
                     {"flagged", a.flagged}});
  return {{"trials", v.trials}, {"flags", v.flags()}, {"atoms", std::move(atoms)}};
}

// --- CSV -----------------------------------------------------------------------

/// Fixed-point text with `digits` decimals ("N/A" for a missing value).
inline std::string fixed(std::optional<double> x, int digits = 6) {
  if (!x || !std::isfinite(*x)) return "N/A";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, *x, std::chars_format::fixed, digits);
  return {buf, res.ptr};
}

inline const char* kStepsHeader = "seed,step,u,step_time_s";
inline const char* kSummaryHeader = "mode,m,kappa,alpha,ET_max,sqrt_VT_max,ET_R_max,step_time_s,seed";

inline std::string steps_csv(const SynthesisResult& r) {
  std::string out = std::string(kStepsHeader) + "\n";
  for (const auto& run : r.runs)
    for (const auto& s : run.steps)
      out += std::to_string(run.seed) + "," + std::to_string(s.step) + "," + fixed(s.u, 9) + "," +
             fixed(s.seconds, 6) + "\n";
  return out;
}

/// "3" when every agent has the same memory size, else "2/3/..." per agent.
inline std::string memory_text(const SolutionSpec& spec) {
  const auto& m = spec.memory;
  if (std::all_of(m.begin(), m.end(), [&](int x) { return x == m.front(); })) return std::to_string(m.front());
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) out += (i ? "/" : "") + std::to_string(m[i]);
  return out;
}

struct SummaryRow {
  Mode mode = Mode::autonomous;
  std::string memory;
  std::optional<double> kappa;
  std::optional<double> alpha;
  Metrics metrics;
  double step_time = 0.0;
  std::uint64_t seed = 0;
};

inline std::string summary_csv(const SummaryRow& row) {
  std::string out = std::string(kSummaryHeader) + "\n";
  out += std::string(to_string(row.mode)) + "," + row.memory + "," + fixed(row.kappa, 2) + "," +
         fixed(row.alpha, 2) + "," + fixed(row.metrics.et_max, 6) + "," + fixed(row.metrics.sqrt_vt_max, 6) + "," +
         fixed(row.metrics.et_r_max, 6) + "," + fixed(row.step_time, 6) + "," + std::to_string(row.seed) + "\n";
  return out;
}

}  // namespace ftrv
