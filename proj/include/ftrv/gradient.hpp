#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ftrv/evaluator.hpp"
#include "ftrv/objective.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

struct Gradient {
  double u = 0.0;
  std::vector<double> logits;  // dU/d(logit), laid out like ParamSet::logits
  EvaluationReport report;
};

namespace detail {

inline void collect_atom_ids(const Expr& e, std::vector<int>& out) {
  if (e.op == Expr::Op::atom) out.push_back(e.atom_id);
  if (e.lhs) collect_atom_ids(*e.lhs, out);
  if (e.rhs) collect_atom_ids(*e.rhs, out);
}

struct Cotangent {
  std::vector<double> et;  // dU/dE at each local configuration
  std::vector<double> vt;  // dU/dVar
};

/// dU/dmu for every entry of the full chain (zero outside the chosen BSCC).
/// Each (vertex, subset) key contributes through two adjoint solves on the
/// factorization kept from the forward pass:
///   lambda_S = M^-T w_VT,  lambda_E = M^-T (w_ET - 2 E w_VT + 2 lambda_S)
///   dU/dmu(c,d) = lambda_S[c] S_d + lambda_E[c] E_d   (c non-target).
inline std::vector<double> chain_gradient(const ConfigChain& chain, const CompiledObjective& obj,
                                          BsccEvaluator& ev, const BsccResult& best) {
  const auto& local = ev.local();
  std::map<TargetKey, Cotangent> cot;
  std::vector<double> values(obj.atoms.size(), 0.0);
  std::vector<double> grads(obj.atoms.size(), 0.0);
  std::vector<int> ids;

  for (std::size_t s = 0; s < obj.summands.size(); ++s) {
    const auto& summand = obj.summands[s];
    const auto& w = best.summands[s];
    const auto& term = summand.terms[w.term];
    ev.fill_term_atoms(term, w.local, w.subsets, values);
    ids.clear();
    collect_atom_ids(*term.expr, ids);
    for (int id : ids) grads[id] = 0.0;
    backprop(*term.expr, values, summand.weight, grads);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (int id : ids) {
      if (grads[id] == 0.0) continue;
      const Atom& a = obj.atoms[id];
      const auto level =
          std::lower_bound(term.fault_levels.begin(), term.fault_levels.end(), a.faults) - term.fault_levels.begin();
      auto [it, fresh] = cot.try_emplace(TargetKey{a.vertex, w.subsets[level]});
      if (fresh) {
        it->second.et.assign(local.size(), 0.0);
        it->second.vt.assign(local.size(), 0.0);
      }
      (a.kind == AtomKind::ET ? it->second.et : it->second.vt)[w.local] += grads[id];
    }
  }

  std::vector<double> dmu(chain.entries(), 0.0);
  for (const auto& [key, c] : cot) {
    KeyData& kd = ev.key(key.vertex, key.subset);
    const HittingSystem& sys = *kd.system;
    const auto u = static_cast<Eigen::Index>(sys.unknowns());
    const auto& m = kd.moments;
    Eigen::VectorXd gs(u);
    for (Eigen::Index k = 0; k < u; ++k) gs[k] = c.vt[sys.local_of(k)];
    const Eigen::VectorXd lambda_s = sys.solve_transposed(gs);
    Eigen::VectorXd ge(u);
    for (Eigen::Index k = 0; k < u; ++k) {
      const auto i = sys.local_of(k);
      ge[k] = c.et[i] - 2.0 * m.expectation[i] * c.vt[i] + 2.0 * lambda_s[k];
    }
    const Eigen::VectorXd lambda_e = sys.solve_transposed(ge);
    for (Eigen::Index k = 0; k < u; ++k) {
      const auto i = sys.local_of(k);
      for (std::size_t e = local.row_start[i]; e < local.row_start[i + 1]; ++e) {
        const auto d = local.column[e];
        dmu[local.entry[e]] += lambda_s[k] * m.second_moment[d] + lambda_e[k] * m.expectation[d];
      }
    }
  }
  return dmu;
}

/// Pulls dU/dmu back to the action probabilities of every decision state.
inline std::vector<double> probability_gradient(const ConfigChain& chain, const Solution& sol,
                                                const std::vector<std::uint32_t>& members,
                                                std::span<const double> dmu) {
  const auto& space = *sol.space;
  const auto& off = space.offsets();
  std::vector<double> g(space.parameter_count(), 0.0);
  if (space.mode() == Mode::coordinated) {
    for (auto c : members)
      for (std::size_t e = chain.row_start[c]; e < chain.row_start[c + 1]; ++e)
        g[off[c] + chain.actions[e]] += dmu[e];
    return g;
  }
  // mu = prod_i p_i, so d mu / d p_i = prod_{j != i} p_j (prefix/suffix
  // products, which stay exact when some p_j is tiny).
  const int n = space.agents();
  std::vector<std::size_t> slot(n);
  std::vector<double> p(n), prefix(n + 1), suffix(n + 1);
  for (auto c : members)
    for (std::size_t e = chain.row_start[c]; e < chain.row_start[c + 1]; ++e) {
      if (dmu[e] == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        slot[i] = off[space.agent_state(i, space.local_of(c, i))] + chain.actions[e * n + i];
        p[i] = sol.probs[slot[i]];
      }
      prefix[0] = 1.0;
      for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] * p[i];
      suffix[n] = 1.0;
      for (int i = n - 1; i >= 0; --i) suffix[i] = suffix[i + 1] * p[i];
      for (int i = 0; i < n; ++i) g[slot[i]] += dmu[e] * prefix[i] * suffix[i + 1];
    }
  return g;
}

}  // namespace detail

/// U and dU/d(logits) by the adjoint method. Max and argmin selections are
/// frozen at the forward-pass witnesses (a subgradient at ties).
inline Gradient grad_objective(const ParamSet& params, const CompiledObjective& obj, double prune = 0.0) {
  const Solution sol = to_solution(params, prune);
  const ConfigChain chain = build_chain(sol);
  auto ce = detail::evaluate_chain(chain, obj, true);
  auto& ev = *ce.evaluators[ce.report.chosen];
  const auto& best = ce.report.best();
  const auto dmu = detail::chain_gradient(chain, obj, ev, best);
  const auto gp = detail::probability_gradient(chain, sol, best.members, dmu);

  Gradient out;
  out.u = ce.report.u;
  out.logits.assign(gp.size(), 0.0);
  const auto& space = *params.space;
  for (std::size_t s = 0; s < space.decision_state_count(); ++s) {
    const auto p = sol.state(s);
    const auto lo = space.offsets()[s];
    double dot = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) dot += p[a] * gp[lo + a];
    for (std::size_t a = 0; a < p.size(); ++a) out.logits[lo + a] = p[a] * (gp[lo + a] - dot);
  }
  out.report = std::move(ce.report);
  return out;
}

// --- finite-difference check ------------------------------------------------

struct FiniteDiffResult {
  std::size_t checked = 0;
  std::size_t excluded = 0;  // witness or support changed inside the stencil
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

inline constexpr double kFiniteDiffFloor = 1e-3;

namespace detail {

inline constexpr double kTieTolerance = 1e-12;

/// True when the perturbed evaluation still takes every maximum at a witness
/// equal in value to the base one. Exactly tied witnesses (for instance
/// configurations differing only in a faulty agent's position) are harmless.
inline bool same_branches(const CompiledObjective& obj, const EvaluationReport& base, ChainEvaluation& probe) {
  if (probe.report.chosen != base.chosen) return false;
  auto& ev = *probe.evaluators[base.chosen];
  std::vector<double> values(obj.atoms.size(), 0.0);
  const auto& ref = base.best().summands;
  const auto& now = probe.report.best().summands;
  for (std::size_t s = 0; s < ref.size(); ++s) {
    if (now[s].term == ref[s].term && now[s].config == ref[s].config && now[s].subsets == ref[s].subsets) continue;
    const auto& term = obj.summands[s].terms[ref[s].term];
    ev.fill_term_atoms(term, ref[s].local, ref[s].subsets, values);
    const double at_ref = evaluate(*term.expr, values);
    if (std::abs(now[s].value - at_ref) > kTieTolerance * (1.0 + std::abs(at_ref))) return false;
  }
  return true;
}

}  // namespace detail

/// Central differences on `coords` random logits (all of them when there are
/// fewer). Error is |g - fd| / max(|g|, |fd|, kFiniteDiffFloor).
inline FiniteDiffResult finite_diff_check(const ParamSet& params, const CompiledObjective& obj, double h,
                                          std::size_t coords, std::uint64_t seed, double prune = 0.0) {
  const Gradient g = grad_objective(params, obj, prune);
  const auto support = [&](const Solution& s) {
    std::vector<char> nz(s.probs.size());
    for (std::size_t i = 0; i < nz.size(); ++i) nz[i] = s.probs[i] > 0.0;
    return nz;
  };
  const auto base_support = support(to_solution(params, prune));
  std::vector<std::size_t> order(params.logits.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  if (order.size() > coords) order.resize(coords);

  FiniteDiffResult out;
  ParamSet probe = params;
  for (auto k : order) {
    probe.logits[k] = params.logits[k] + h;
    const auto sol_plus = to_solution(probe, prune);
    const auto chain_plus = build_chain(sol_plus);
    auto plus = detail::evaluate_chain(chain_plus, obj, false);
    probe.logits[k] = params.logits[k] - h;
    const auto sol_minus = to_solution(probe, prune);
    const auto chain_minus = build_chain(sol_minus);
    auto minus = detail::evaluate_chain(chain_minus, obj, false);
    probe.logits[k] = params.logits[k];
    if (support(sol_plus) != base_support || support(sol_minus) != base_support ||
        !detail::same_branches(obj, g.report, plus) ||
        !detail::same_branches(obj, g.report, minus)) {
      ++out.excluded;
      continue;
    }
    const double fd = (plus.report.u - minus.report.u) / (2.0 * h);
    const double abs_err = std::abs(fd - g.logits[k]);
    const double rel = abs_err / std::max({std::abs(fd), std::abs(g.logits[k]), kFiniteDiffFloor});
    out.max_abs_error = std::max(out.max_abs_error, abs_err);
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.checked;
  }
  return out;
}

}  // namespace ftrv
