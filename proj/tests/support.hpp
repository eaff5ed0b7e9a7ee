#pragma once

// Helpers shared by the unit tests and the acceptance binary: fixture
// loading, random instances and independent reference computations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ftrv/ftrv.hpp"

namespace ftrv::support {

inline std::string fixture_path(const std::string& name) { return std::string(FTRV_FIXTURES) + "/" + name; }

inline Environment p5() { return parse_graph(read_file(fixture_path("p5.graph"))); }

inline Solution load_fixture(const Environment& env, char which) {
  return parse_solution(env, read_file(fixture_path(std::string("p5_") + which + ".json")));
}

inline const char* kMaxEt0 = "max{ET(v,0) for v in V}";

/// Objective used to evaluate each Fig. 1 fixture; (d) and (e) add a small
/// weight on the one-fault part so that ET_R is reported.
inline std::string fixture_objective(char which) {
  switch (which) {
    case 'd': return "max{ET(v,0) for v in V} + 0.5*max{ET(v,1) for v in V}";
    case 'e': return "max{ET(v,0) for v in V} + 0.1*max{ET(v,1) for v in V}";
    default: return kMaxEt0;
  }
}

/// Random strongly connected digraph on k vertices: a Hamiltonian cycle in
/// random order plus `extra` random edges (self-loops allowed when asked).
inline Environment random_graph(std::mt19937_64& rng, int k, int extra, bool self_loops = false) {
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("n" + std::to_string(i));
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (int i = 0; i < k; ++i) edges.emplace_back(order[i], order[(i + 1) % k]);
  std::uniform_int_distribution<int> pick(0, k - 1);
  for (int e = 0; e < extra; ++e) {
    int a = pick(rng);
    int b = pick(rng);
    if (a == b && !self_loops) continue;
    edges.emplace_back(a, b);
  }
  return Environment::from_edges(std::move(names), edges);
}

/// Strictly positive random probabilities in every decision state.
inline Solution random_solution(SpacePtr space, std::mt19937_64& rng, double low = 0.2) {
  Solution sol{space, std::vector<double>(space->parameter_count())};
  std::uniform_real_distribution<double> w(low, 1.0);
  for (std::size_t s = 0; s < space->decision_state_count(); ++s) {
    auto row = sol.state(s);
    double sum = 0.0;
    for (auto& x : row) sum += x = w(rng);
    for (auto& x : row) x /= sum;
  }
  return sol;
}

struct Moments {
  std::vector<double> e;
  std::vector<double> s;
};

/// First and second moments of the hitting time of `target` (indexed by
/// configuration) by Gauss-Seidel sweeps of the one-step recurrences
///   E(c) = 1 + sum_d P(c,d) E(d),  S(c) = 1 + sum_d P(c,d) (2 E(d) + S(d)),
/// both zero on targets. Restricted to `members` (a closed set).
inline Moments value_iteration(const ConfigChain& chain, const std::vector<std::uint32_t>& members,
                               const std::vector<char>& target, double tol = 1e-14, int max_sweeps = 1'000'000) {
  Moments m{std::vector<double>(chain.size(), 0.0), std::vector<double>(chain.size(), 0.0)};
  for (int it = 0; it < max_sweeps; ++it) {
    double change = 0.0;
    double scale = 1.0;
    for (auto c : members) {
      if (target[c]) continue;
      double x = 1.0;
      for (auto k = chain.row_start[c]; k < chain.row_start[c + 1]; ++k) x += chain.prob[k] * m.e[chain.column[k]];
      change = std::max(change, std::abs(x - m.e[c]));
      scale = std::max(scale, x);
      m.e[c] = x;
    }
    if (change <= tol * scale) break;
  }
  for (int it = 0; it < max_sweeps; ++it) {
    double change = 0.0;
    double scale = 1.0;
    for (auto c : members) {
      if (target[c]) continue;
      double x = 1.0;
      for (auto k = chain.row_start[c]; k < chain.row_start[c + 1]; ++k) {
        const auto d = chain.column[k];
        x += chain.prob[k] * (2.0 * m.e[d] + m.s[d]);
      }
      change = std::max(change, std::abs(x - m.s[c]));
      scale = std::max(scale, x);
      m.s[c] = x;
    }
    if (change <= tol * scale) break;
  }
  return m;
}

inline std::vector<char> config_mask(const ConfigChain& chain, const std::vector<std::uint32_t>& sorted_targets) {
  std::vector<char> mask(chain.size(), 0);
  for (auto t : sorted_targets) mask[t] = 1;
  return mask;
}

/// U by exhaustion: every BSCC, configuration and agent-subset combination,
/// with atom values from the value-iteration oracle. Only for tiny chains.
inline double brute_u(const ConfigChain& chain, const CompiledObjective& obj) {
  const auto comps = bsccs(chain);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : comps) {
    const auto& members = b.members;
    // values[atom][subset index][config]
    std::vector<std::vector<std::vector<double>>> values(obj.atoms.size());
    bool covered = true;
    for (std::size_t a = 0; a < obj.atoms.size() && covered; ++a) {
      const auto& atom = obj.atoms[a];
      for (auto sub : fault_subsets(obj.agents, atom.faults)) {
        std::vector<char> mask(chain.size(), 0);
        bool any = false;
        for (auto c : members) any |= mask[c] = agent_subset_at(*chain.space, c, atom.vertex, sub);
        if (!any) {
          covered = false;
          break;
        }
        auto m = value_iteration(chain, members, mask);
        std::vector<double> v(chain.size(), 0.0);
        for (auto c : members) v[c] = atom.kind == AtomKind::ET ? m.e[c] : std::max(m.s[c] - m.e[c] * m.e[c], 0.0);
        values[a].push_back(std::move(v));
      }
    }
    if (!covered) continue;
    double u = 0.0;
    for (const auto& s : obj.summands) {
      double hi = -std::numeric_limits<double>::infinity();
      for (const auto& t : s.terms) {
        // every combination of subsets for the fault levels used by the term
        std::vector<std::vector<AgentSubset>> per_level;
        for (int f : t.fault_levels) per_level.push_back(fault_subsets(obj.agents, f));
        std::vector<std::size_t> pick(per_level.size(), 0);
        while (true) {
          for (auto c : members) {
            std::vector<double> atoms(obj.atoms.size(), 0.0);
            for (std::size_t a = 0; a < obj.atoms.size(); ++a) {
              const auto lvl = std::find(t.fault_levels.begin(), t.fault_levels.end(), obj.atoms[a].faults);
              if (lvl == t.fault_levels.end()) continue;
              atoms[a] = values[a][pick[lvl - t.fault_levels.begin()]][c];
            }
            hi = std::max(hi, evaluate(*t.expr, atoms));
          }
          std::size_t i = 0;
          while (i < pick.size() && ++pick[i] == per_level[i].size()) pick[i++] = 0;
          if (i == pick.size()) break;
        }
      }
      u += s.weight * hi;
    }
    best = std::min(best, u);
  }
  return best;
}

}  // namespace ftrv::support
