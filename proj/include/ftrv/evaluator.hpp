#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ftrv/environment.hpp"
#include "ftrv/error.hpp"
#include "ftrv/linear_system.hpp"
#include "ftrv/objective.hpp"
#include "ftrv/scc.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

/// Bitmask over agents; bit i set means agent i counts as non-faulty.
using AgentSubset = std::uint32_t;

/// All subsets with exactly agents - faults members, ascending by mask value.
inline std::vector<AgentSubset> fault_subsets(int agents, int faults) {
  if (agents < 1 || agents > 31) throw ValidationError("agent count out of supported range 1..31");
  if (faults < 0 || faults >= agents) throw ValidationError("fault count must satisfy 0 <= f < n");
  std::vector<AgentSubset> out;
  const int want = agents - faults;
  for (AgentSubset m = 1; m < (AgentSubset{1} << agents); ++m)
    if (std::popcount(m) == want) out.push_back(m);
  return out;
}

struct Bscc {
  std::vector<std::uint32_t> members;  // ascending
};

inline std::vector<Bscc> bsccs(const ConfigChain& chain) {
  std::vector<Bscc> out;
  for (auto& m : bottom_components(chain.row_start, chain.column)) out.push_back({std::move(m)});
  return out;
}

inline bool agent_subset_at(const ConfigSpace& space, std::size_t config, VertexId v, AgentSubset subset) {
  for (int i = 0; i < space.agents(); ++i)
    if ((subset >> i & 1u) && space.vertex_of(config, i) == v) return true;
  return false;
}

/// Configurations where at least one agent of `subset` stands on `v`.
inline std::vector<std::uint32_t> target_configs(const ConfigChain& chain, VertexId v, AgentSubset subset) {
  std::vector<std::uint32_t> out;
  for (std::size_t c = 0; c < chain.size(); ++c)
    if (agent_subset_at(*chain.space, c, v, subset)) out.push_back(static_cast<std::uint32_t>(c));
  return out;
}

/// Hitting-time moments on a closed set, indexed like LocalChain::members.
/// Targets carry zeros.
struct HittingMoments {
  std::vector<double> expectation;
  std::vector<double> second_moment;
  std::vector<double> variance;
};

inline constexpr double kResidualTolerance = 1e-9;

namespace detail {

inline std::vector<char> local_mask(const LocalChain& local, std::span<const std::uint32_t> sorted_targets) {
  std::vector<char> mask(local.size(), 0);
  for (std::size_t i = 0; i < local.size(); ++i)
    mask[i] = std::binary_search(sorted_targets.begin(), sorted_targets.end(), local.members[i]) ? 1 : 0;
  return mask;
}

inline std::vector<char> local_mask(const ConfigSpace& space, const LocalChain& local, VertexId v,
                                    AgentSubset subset) {
  std::vector<char> mask(local.size(), 0);
  for (std::size_t i = 0; i < local.size(); ++i) mask[i] = agent_subset_at(space, local.members[i], v, subset);
  return mask;
}

inline void check_residual(const LocalChain& local, std::span<const char> target, std::span<const double> x,
                           std::span<const double> extra, const char* what) {
  for (std::size_t c = 0; c < local.size(); ++c) {
    if (target[c]) continue;
    double rhs = 1.0;
    for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e) {
      const auto d = local.column[e];
      rhs += local.prob[e] * (x[d] + (extra.empty() ? 0.0 : 2.0 * extra[d]));
    }
    const double res = std::abs(x[c] - rhs);
    if (!std::isfinite(x[c]) || res > kResidualTolerance * (1.0 + std::abs(x[c])))
      throw NumericalError(std::string(what) + " system residual " + std::to_string(res) + " too large");
  }
}

}  // namespace detail

/// Solves both moment systems on one factorization:
///   E_c = 1 + sum_d mu(c,d) E_d,  S_c = 1 + sum_d mu(c,d) (2 E_d + S_d)
/// with zeros on targets, then Var = S - E^2 (tiny negative rounding clamped).
inline HittingMoments hitting_moments(const LocalChain& local, std::span<const char> target,
                                      const HittingSystem& sys) {
  const auto n = local.size();
  const auto u = static_cast<Eigen::Index>(sys.unknowns());
  HittingMoments out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (u == 0) return out;
  const Eigen::VectorXd e = sys.solve(Eigen::VectorXd::Ones(u));
  // (I - Q) S = 1 + 2 Q E = 2 E - 1, since Q E = E - 1.
  const Eigen::VectorXd s = sys.solve(2.0 * e - Eigen::VectorXd::Ones(u));
  for (Eigen::Index k = 0; k < u; ++k) {
    const auto c = sys.local_of(static_cast<std::size_t>(k));
    out.expectation[c] = e[k];
    out.second_moment[c] = s[k];
    if (!(e[k] >= 1.0 - 1e-9) || !std::isfinite(e[k]) || !std::isfinite(s[k]))
      throw NumericalError("hitting-time system is numerically degenerate");
  }
  detail::check_residual(local, target, out.expectation, {}, "expectation");
  detail::check_residual(local, target, out.second_moment, out.expectation, "second-moment");
  for (std::size_t c = 0; c < n; ++c)
    out.variance[c] = std::max(out.second_moment[c] - out.expectation[c] * out.expectation[c], 0.0);
  return out;
}

inline HittingMoments hitting_moments(const LocalChain& local, std::span<const char> target) {
  HittingSystem sys(local, target);
  return hitting_moments(local, target, sys);
}

/// E[T_c] for every member of `bscc` (in member order). `targets` is a sorted
/// configuration set that must meet the BSCC.
inline std::vector<double> expected_times(const ConfigChain& chain, const Bscc& bscc,
                                          std::span<const std::uint32_t> targets) {
  const auto local = restrict_chain(chain, bscc.members);
  const auto mask = detail::local_mask(local, targets);
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    throw UncoverableError("target set does not meet the BSCC", {});
  return hitting_moments(local, mask).expectation;
}

/// E[T_c^2] for every member of `bscc`, given the expectation table `et`.
inline std::vector<double> second_moments(const ConfigChain& chain, const Bscc& bscc,
                                          std::span<const std::uint32_t> targets, std::span<const double> et) {
  const auto local = restrict_chain(chain, bscc.members);
  const auto mask = detail::local_mask(local, targets);
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    throw UncoverableError("target set does not meet the BSCC", {});
  HittingSystem sys(local, mask);
  const auto u = static_cast<Eigen::Index>(sys.unknowns());
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(u);
  for (Eigen::Index k = 0; k < u; ++k) {
    const auto c = sys.local_of(static_cast<std::size_t>(k));
    for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e)
      rhs[k] += 2.0 * local.prob[e] * et[local.column[e]];
  }
  const Eigen::VectorXd s = sys.solve(rhs);
  std::vector<double> out(local.size(), 0.0);
  for (Eigen::Index k = 0; k < u; ++k) out[sys.local_of(static_cast<std::size_t>(k))] = s[k];
  detail::check_residual(local, mask, out, et, "second-moment");
  return out;
}

/// Largest number of steps any positive-probability path from each member can
/// avoid the targets; -1 when a target-avoiding cycle exists.
inline std::vector<std::int64_t> worst_case_hitting_times(const ConfigChain& chain, const Bscc& bscc,
                                                          std::span<const std::uint32_t> targets) {
  const auto local = restrict_chain(chain, bscc.members);
  const auto mask = detail::local_mask(local, targets);
  std::vector<std::int64_t> level(local.size(), -1);
  for (std::size_t c = 0; c < local.size(); ++c)
    if (mask[c]) level[c] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t c = 0; c < local.size(); ++c) {
      if (level[c] >= 0) continue;
      std::int64_t worst = 0;
      bool ready = true;
      for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1] && ready; ++e) {
        const auto l = level[local.column[e]];
        if (l < 0) ready = false;
        worst = std::max(worst, l);
      }
      if (ready) {
        level[c] = worst + 1;
        changed = true;
      }
    }
  }
  return level;
}

// --- objective evaluation ----------------------------------------------------

struct AtomResult {
  Atom atom;
  std::string label;
  double value = std::numeric_limits<double>::infinity();
  std::uint32_t witness_config = 0;
  AgentSubset witness_subset = 0;
};

/// The (term, configuration, subsets) attaining a summand's maximum.
struct SummandWitness {
  std::size_t term = 0;
  std::uint32_t config = 0;          // global index
  std::size_t local = 0;             // index within the BSCC
  std::vector<AgentSubset> subsets;  // one per fault level of the term
  double value = 0.0;

  friend bool operator==(const SummandWitness&, const SummandWitness&) = default;
};

struct Metrics {
  double et_max = std::numeric_limits<double>::quiet_NaN();
  double vt_max = std::numeric_limits<double>::quiet_NaN();
  double sqrt_vt_max = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> et_r_max;
};

struct BsccResult {
  std::vector<std::uint32_t> members;
  bool covered = false;
  bool degenerate = false;
  std::string diagnostic;
  std::vector<std::string> uncovered_atoms;
  double u = std::numeric_limits<double>::infinity();
  std::vector<AtomResult> atoms;
  std::vector<SummandWitness> summands;
  Metrics metrics;
};

struct EvaluationReport {
  std::vector<BsccResult> bsccs;
  std::size_t chosen = 0;
  std::uint32_t initial_config = 0;
  std::string initial_label;
  double u = std::numeric_limits<double>::infinity();
  Metrics metrics;

  const BsccResult& best() const { return bsccs.at(chosen); }
};

namespace detail {

struct TargetKey {
  VertexId vertex;
  AgentSubset subset;
  friend auto operator<=>(const TargetKey&, const TargetKey&) = default;
};

struct KeyData {
  bool covered = false;
  std::vector<char> target;
  HittingMoments moments;
  std::unique_ptr<HittingSystem> system;
};

/// Evaluates one BSCC. Solves are cached per (vertex, subset); with
/// `keep_systems` the factorizations stay alive for adjoint solves.
class BsccEvaluator {
 public:
  BsccEvaluator(const ConfigChain& chain, const std::vector<std::uint32_t>& members, const CompiledObjective& obj,
                bool keep_systems)
      : chain_(chain), obj_(obj), keep_(keep_systems), local_(restrict_chain(chain, members)) {
    for (const auto& a : obj.atoms) subsets_.emplace(a.faults, fault_subsets(chain.space->agents(), a.faults));
  }

  const LocalChain& local() const noexcept { return local_; }
  const std::vector<AgentSubset>& subsets(int faults) {
    auto it = subsets_.find(faults);
    if (it == subsets_.end()) it = subsets_.emplace(faults, fault_subsets(chain_.space->agents(), faults)).first;
    return it->second;
  }

  KeyData& key(VertexId v, AgentSubset subset) {
    auto [it, fresh] = cache_.try_emplace(TargetKey{v, subset});
    KeyData& kd = it->second;
    if (fresh) {
      kd.target = local_mask(*chain_.space, local_, v, subset);
      kd.covered = std::find(kd.target.begin(), kd.target.end(), 1) != kd.target.end();
      if (kd.covered) {
        auto sys = std::make_unique<HittingSystem>(local_, kd.target);
        kd.moments = hitting_moments(local_, kd.target, *sys);
        if (keep_) kd.system = std::move(sys);
      }
    }
    return kd;
  }

  bool atom_covered(const Atom& a) {
    for (auto s : subsets(a.faults))
      if (!key(a.vertex, s).covered) return false;
    return true;
  }

  AtomResult atom_value(const Atom& a) {
    AtomResult r{a, atom_label(a, chain_.space->environment())};
    r.value = -std::numeric_limits<double>::infinity();
    const auto& subs = subsets(a.faults);
    std::vector<const HittingMoments*> table;
    for (auto s : subs) table.push_back(&key(a.vertex, s).moments);
    for (std::size_t c = 0; c < local_.size(); ++c)
      for (std::size_t k = 0; k < subs.size(); ++k) {
        const auto& m = *table[k];
        const double v = a.kind == AtomKind::ET ? m.expectation[c] : m.variance[c];
        if (v > r.value) {
          r.value = v;
          r.witness_config = local_.members[c];
          r.witness_subset = subs[k];
        }
      }
    return r;
  }

  /// Atom values at local configuration `c` under the given subsets (one per
  /// fault level of `term`), written into `values` by atom id.
  void fill_term_atoms(const CompiledTerm& term, std::size_t c, std::span<const AgentSubset> combo,
                       std::vector<double>& values) {
    fill_atoms(*term.expr, term, c, combo, values);
  }

  BsccResult evaluate() {
    BsccResult res;
    res.members = local_.members;
    const auto& env = chain_.space->environment();
    try {
      for (const auto& a : obj_.atoms)
        if (!atom_covered(a)) res.uncovered_atoms.push_back(atom_label(a, env));
      if (!res.uncovered_atoms.empty()) return res;
      res.covered = true;
      for (const auto& a : obj_.atoms) res.atoms.push_back(atom_value(a));

      std::vector<double> values(obj_.atoms.size(), 0.0);
      double u = 0.0;
      for (const auto& summand : obj_.summands) {
        SummandWitness best;
        best.value = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < summand.terms.size(); ++t) {
          const auto& term = summand.terms[t];
          std::vector<const std::vector<AgentSubset>*> levels;
          for (int f : term.fault_levels) levels.push_back(&subsets(f));
          std::vector<std::size_t> pick(levels.size(), 0);
          std::vector<AgentSubset> combo(levels.size());
          for (std::size_t c = 0; c < local_.size(); ++c) {
            std::fill(pick.begin(), pick.end(), 0);
            while (true) {
              for (std::size_t l = 0; l < levels.size(); ++l) combo[l] = (*levels[l])[pick[l]];
              fill_term_atoms(term, c, combo, values);
              const double v = ftrv::evaluate(*term.expr, values);
              if (!std::isfinite(v)) throw NumericalError("term " + term.label + " is not finite");
              if (v > best.value) best = {t, local_.members[c], c, combo, v};
              std::size_t l = levels.size();
              while (l > 0 && ++pick[l - 1] == levels[l - 1]->size()) pick[--l] = 0;
              if (l == 0) break;
            }
          }
        }
        u += summand.weight * best.value;
        res.summands.push_back(std::move(best));
      }
      res.u = u;
      res.metrics = metrics();
    } catch (const NumericalError& e) {
      res.covered = false;
      res.degenerate = true;
      res.diagnostic = e.what();
      res.u = std::numeric_limits<double>::infinity();
    }
    return res;
  }

 private:
  void fill_atoms(const Expr& e, const CompiledTerm& term, std::size_t c, std::span<const AgentSubset> combo,
                  std::vector<double>& values) {
    if (e.op == Expr::Op::atom) {
      const Atom& a = obj_.atoms[e.atom_id];
      const auto level = std::lower_bound(term.fault_levels.begin(), term.fault_levels.end(), a.faults) -
                         term.fault_levels.begin();
      const auto& m = key(a.vertex, combo[level]).moments;
      values[e.atom_id] = a.kind == AtomKind::ET ? m.expectation[c] : m.variance[c];
      return;
    }
    if (e.lhs) fill_atoms(*e.lhs, term, c, combo, values);
    if (e.rhs) fill_atoms(*e.rhs, term, c, combo, values);
  }

  /// Summary metrics over the objective's vertices: worst ET / VT without
  /// faults (vertices of f = 0 atoms, or all atom vertices if there are none)
  /// and worst ET with one fault (vertices of f = 1 atoms, if any).
  Metrics metrics() {
    std::vector<VertexId> v0;
    std::vector<VertexId> v1;
    for (const auto& a : obj_.atoms) {
      if (a.faults == 0) v0.push_back(a.vertex);
      if (a.faults == 1) v1.push_back(a.vertex);
    }
    if (v0.empty())
      for (const auto& a : obj_.atoms) v0.push_back(a.vertex);
    auto uniq = [](std::vector<VertexId>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(v0);
    uniq(v1);
    Metrics m;
    if (v0.empty()) return m;
    m.et_max = m.vt_max = -std::numeric_limits<double>::infinity();
    for (VertexId v : v0) {
      m.et_max = std::max(m.et_max, atom_value({AtomKind::ET, v, 0}).value);
      m.vt_max = std::max(m.vt_max, atom_value({AtomKind::VT, v, 0}).value);
    }
    m.sqrt_vt_max = std::sqrt(std::max(m.vt_max, 0.0));
    if (!v1.empty()) {
      double r = -std::numeric_limits<double>::infinity();
      for (VertexId v : v1) r = std::max(r, atom_value({AtomKind::ET, v, 1}).value);
      m.et_r_max = r;
    }
    return m;
  }

  const ConfigChain& chain_;
  const CompiledObjective& obj_;
  bool keep_;
  LocalChain local_;
  std::map<int, std::vector<AgentSubset>> subsets_;
  std::map<TargetKey, KeyData> cache_;
};

struct ChainEvaluation {
  EvaluationReport report;
  std::vector<std::unique_ptr<BsccEvaluator>> evaluators;  // one per BSCC, caches filled
};

inline ChainEvaluation evaluate_chain(const ConfigChain& chain, const CompiledObjective& obj, bool keep_systems) {
  ChainEvaluation out;
  auto& report = out.report;
  const auto comps = bsccs(chain);
  for (const auto& b : comps) {
    auto ev = std::make_unique<BsccEvaluator>(chain, b.members, obj, keep_systems);
    report.bsccs.push_back(ev->evaluate());
    out.evaluators.push_back(std::move(ev));
  }
  bool found = false;
  for (std::size_t b = 0; b < report.bsccs.size(); ++b) {
    const auto& r = report.bsccs[b];
    if (r.covered && (!found || r.u < report.u)) {
      found = true;
      report.chosen = b;
      report.u = r.u;
    }
  }
  if (!found) {
    std::vector<std::pair<std::string, std::size_t>> gaps;
    std::string degenerate;
    for (std::size_t b = 0; b < report.bsccs.size(); ++b) {
      for (const auto& a : report.bsccs[b].uncovered_atoms) gaps.emplace_back(a, b);
      if (report.bsccs[b].degenerate && degenerate.empty()) degenerate = report.bsccs[b].diagnostic;
    }
    if (!degenerate.empty() && gaps.empty()) throw NumericalError(degenerate);
    std::string msg = "no BSCC covers every atom:";
    for (std::size_t i = 0; i < gaps.size() && i < 8; ++i)
      msg += " " + gaps[i].first + "@BSCC" + std::to_string(gaps[i].second);
    if (gaps.size() > 8) msg += " ...";
    throw UncoverableError(msg, std::move(gaps));
  }
  const auto& best = report.bsccs[report.chosen];
  report.initial_config = best.members.front();
  report.initial_label = chain.space->label(report.initial_config);
  report.metrics = best.metrics;
  return out;
}

}  // namespace detail

/// Per-BSCC objective values; the report selects the BSCC with least U
/// (ties: lowest index) and its lowest member as initial configuration.
inline EvaluationReport eval_objective(const ConfigChain& chain, const CompiledObjective& obj) {
  return detail::evaluate_chain(chain, obj, false).report;
}

inline EvaluationReport eval_objective(const Solution& sol, const CompiledObjective& obj) {
  return eval_objective(build_chain(sol), obj);
}

/// Worst value of one atom over the members of `bscc` and all subsets in Ag[f].
inline AtomResult atom_value(const ConfigChain& chain, const Bscc& bscc, const Atom& atom) {
  CompiledObjective none;
  none.agents = chain.space->agents();
  detail::BsccEvaluator ev(chain, bscc.members, none, false);
  if (!ev.atom_covered(atom))
    throw UncoverableError("atom " + atom_label(atom, chain.space->environment()) + " is not covered",
                           {{atom_label(atom, chain.space->environment()), 0}});
  return ev.atom_value(atom);
}

// --- long-run averages -------------------------------------------------------

/// Stationary distribution of the chain restricted to `bscc` (member order).
inline std::vector<double> stationary_distribution(const ConfigChain& chain, const Bscc& bscc) {
  const auto local = restrict_chain(chain, bscc.members);
  const auto n = static_cast<Eigen::Index>(local.size());
  std::vector<double> pi(local.size(), 0.0);
  if (local.size() <= kDenseSolverLimit) {
    // pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1.
    Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index c = 0; c < n; ++c)
      for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e) a(local.column[e], c) += local.prob[e];
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[n - 1] = 1.0;
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    for (Eigen::Index c = 0; c < n; ++c) pi[c] = x[c];
  } else {
    // Lazy power iteration; the lazy chain is aperiodic.
    std::vector<double> next(pi.size());
    std::fill(pi.begin(), pi.end(), 1.0 / static_cast<double>(n));
    for (std::size_t it = 0; it < 1'000'000; ++it) {
      for (Eigen::Index c = 0; c < n; ++c) next[c] = 0.5 * pi[c];
      for (Eigen::Index c = 0; c < n; ++c)
        for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e)
          next[local.column[e]] += 0.5 * pi[c] * local.prob[e];
      double change = 0.0;
      for (Eigen::Index c = 0; c < n; ++c) change = std::max(change, std::abs(next[c] - pi[c]));
      pi.swap(next);
      if (change < 1e-15) break;
    }
  }
  std::vector<double> flow(pi.size(), 0.0);
  double total = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    total += pi[c];
    for (std::size_t e = local.row_start[c]; e < local.row_start[c + 1]; ++e) flow[local.column[e]] += pi[c] * local.prob[e];
  }
  double residual = std::abs(total - 1.0);
  for (Eigen::Index c = 0; c < n; ++c) residual = std::max(residual, std::abs(flow[c] - pi[c]));
  if (residual > 1e-10) throw NumericalError("stationary distribution residual " + std::to_string(residual));
  return pi;
}

/// Long-run average of a term: sum_c F(c) sum_A F(A) t^{c,A}. The term may use
/// at most one fault level f; `subset_weights` is a distribution over
/// fault_subsets(n, f) in that order (ignored for atom-free terms).
inline double avg_term(const ConfigChain& chain, const Bscc& bscc, const CompiledTerm& term,
                       std::span<const Atom> atoms, std::span<const double> subset_weights) {
  if (term.fault_levels.size() > 1) throw ValidationError("average of a term mixing fault levels is undefined");
  const auto pi = stationary_distribution(chain, bscc);
  CompiledObjective obj;
  obj.atoms.assign(atoms.begin(), atoms.end());
  obj.agents = chain.space->agents();
  detail::BsccEvaluator ev(chain, bscc.members, obj, false);
  std::vector<double> values(atoms.size(), 0.0);

  if (term.fault_levels.empty()) {
    double sum = 0.0;
    for (std::size_t c = 0; c < pi.size(); ++c) sum += pi[c] * ftrv::evaluate(*term.expr, values);
    return sum;
  }
  const auto& subs = ev.subsets(term.fault_levels[0]);
  if (subset_weights.size() != subs.size())
    throw ValidationError("subset distribution has " + std::to_string(subset_weights.size()) + " entries, expected " +
                          std::to_string(subs.size()));
  for (const auto& a : atoms)
    if (!ev.atom_covered(a)) throw UncoverableError("term atom is not covered in the BSCC", {});
  double sum = 0.0;
  for (std::size_t c = 0; c < pi.size(); ++c)
    for (std::size_t k = 0; k < subs.size(); ++k) {
      const AgentSubset combo[1] = {subs[k]};
      ev.fill_term_atoms(term, c, combo, values);
      sum += pi[c] * subset_weights[k] * ftrv::evaluate(*term.expr, values);
    }
  return sum;
}

// --- structural coverage -----------------------------------------------------

struct CoverageReport {
  std::vector<Bscc> bsccs;
  std::vector<std::vector<char>> covered;  // [bscc][atom]

  bool any_full() const {
    return std::any_of(covered.begin(), covered.end(),
                       [](const auto& row) { return std::all_of(row.begin(), row.end(), [](char c) { return c != 0; }); });
  }
};

/// Which BSCCs can cover which atoms for any solution with full support
/// (every softmax-parameterised solution). Depends only on the config digraph.
inline CoverageReport structural_coverage_check(const Environment& env, const SolutionSpec& spec,
                                                std::span<const Atom> atoms,
                                                std::size_t config_limit = kDefaultConfigLimit) {
  const auto chain = build_chain(uniform_solution(make_space(env, spec, config_limit)));
  CoverageReport out;
  out.bsccs = bsccs(chain);
  for (const auto& b : out.bsccs) {
    std::vector<char> row;
    for (const auto& a : atoms) {
      bool ok = true;
      for (auto s : fault_subsets(spec.agents, a.faults)) {
        bool hit = false;
        for (auto c : b.members)
          if (agent_subset_at(*chain.space, c, a.vertex, s)) {
            hit = true;
            break;
          }
        ok = ok && hit;
      }
      row.push_back(ok);
    }
    out.covered.push_back(std::move(row));
  }
  return out;
}

}  // namespace ftrv
