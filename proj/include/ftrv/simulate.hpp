#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ftrv/error.hpp"
#include "ftrv/evaluator.hpp"
#include "ftrv/objective.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

struct SimEstimate {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  std::size_t trials = 0;
  std::size_t censored = 0;  // trials that hit the horizon (excluded from the moments)
  double mean_stderr = 0.0;
  double variance_stderr = 0.0;
  double half_width_99 = 0.0;  // for the mean

  std::size_t completed() const noexcept { return trials - censored; }
};

inline constexpr std::size_t kDefaultHorizon = 10'000;
inline constexpr std::size_t kTrialsPerStream = 4096;

/// Moments of the first time a run from `c0` enters `targets` (a mask over
/// configurations). Trials are split into fixed-size blocks, each drawing from
/// its own mt19937_64 seeded with (seed, block), so results do not depend on
/// how blocks are scheduled.
inline SimEstimate sample_hitting(const ConfigChain& chain, std::uint32_t c0, std::span<const char> targets,
                                  std::size_t trials, std::size_t horizon = kDefaultHorizon,
                                  std::uint64_t seed = 1) {
  if (trials == 0) throw ValidationError("trials must be positive");
  if (horizon == 0) throw ValidationError("horizon must be positive");
  std::vector<std::uint32_t> times;
  times.reserve(trials);
  SimEstimate est;
  est.trials = trials;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t block = 0; block * kTrialsPerStream < trials; ++block) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block)};
    std::mt19937_64 rng(seq);
    const std::size_t end = std::min(trials, (block + 1) * kTrialsPerStream);
    for (std::size_t t = block * kTrialsPerStream; t < end; ++t) {
      std::uint32_t c = c0;
      std::size_t steps = 0;
      while (!targets[c] && steps < horizon) {
        double u = unif(rng);
        std::size_t e = chain.row_start[c];
        const std::size_t last = chain.row_start[c + 1] - 1;
        while (e < last && u >= chain.prob[e]) u -= chain.prob[e++];
        c = chain.column[e];
        ++steps;
      }
      if (targets[c])
        times.push_back(static_cast<std::uint32_t>(steps));
      else
        ++est.censored;
    }
  }
  const auto n = static_cast<double>(times.size());
  if (times.empty()) return est;
  double sum = 0.0;
  for (auto x : times) sum += x;
  est.mean = sum / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (auto x : times) {
    const double d = x - est.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  est.variance = times.size() > 1 ? m2 / (n - 1.0) : 0.0;
  est.mean_stderr = std::sqrt(est.variance / n);
  est.half_width_99 = 2.5758293035489 * est.mean_stderr;
  // Var(s^2) = mu4/n - sigma^4 (n-3)/(n(n-1)). The second term keeps the error
  // positive where the leading order vanishes, e.g. a fair two-point law.
  const double pop_var = m2 / n;
  const double var_of_var =
      n > 1.0 ? m4 / n / n - pop_var * pop_var * (n - 3.0) / (n * (n - 1.0)) : 0.0;
  est.variance_stderr = std::sqrt(std::max(var_of_var, 0.0));
  return est;
}

// --- validation --------------------------------------------------------------

struct AtomCheck {
  std::string label;
  AtomKind kind = AtomKind::ET;
  std::string witness;  // configuration label
  AgentSubset subset = 0;
  double analytic = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  std::size_t censored = 0;
  bool flagged = false;
};

struct ValidationReport {
  std::size_t trials = 0;
  std::vector<AtomCheck> atoms;

  std::size_t flags() const {
    return static_cast<std::size_t>(std::count_if(atoms.begin(), atoms.end(), [](const auto& a) { return a.flagged; }));
  }
  bool ok() const { return flags() == 0; }
};

inline constexpr double kSigmaLimit = 4.0;
inline constexpr double kCensoredLimit = 1e-3;

/// Monte Carlo check of every atom of the chosen BSCC at its analytic witness
/// (configuration and agent subset). An atom is flagged when the estimate is
/// more than 4 standard errors away or more than 0.1% of trials are censored.
inline ValidationReport validate_solution(const Solution& sol, const CompiledObjective& obj, std::size_t trials,
                                          std::uint64_t seed = 1, std::size_t horizon = kDefaultHorizon) {
  const auto chain = build_chain(sol);
  const auto report = eval_objective(chain, obj);
  ValidationReport out;
  out.trials = trials;
  std::vector<char> mask(chain.size());
  for (std::size_t i = 0; i < report.best().atoms.size(); ++i) {
    const auto& a = report.best().atoms[i];
    for (std::size_t c = 0; c < chain.size(); ++c)
      mask[c] = agent_subset_at(*chain.space, c, a.atom.vertex, a.witness_subset);
    const auto est = sample_hitting(chain, a.witness_config, mask, trials, horizon, seed + i);
    AtomCheck chk;
    chk.label = a.label;
    chk.kind = a.atom.kind;
    chk.witness = chain.space->label(a.witness_config);
    chk.subset = a.witness_subset;
    chk.analytic = a.value;
    chk.empirical = a.atom.kind == AtomKind::ET ? est.mean : est.variance;
    chk.std_error = a.atom.kind == AtomKind::ET ? est.mean_stderr : est.variance_stderr;
    chk.censored = est.censored;
    const double slack = 1e-9 * (1.0 + std::abs(chk.analytic));
    chk.flagged = std::abs(chk.analytic - chk.empirical) > kSigmaLimit * chk.std_error + slack ||
                  static_cast<double>(est.censored) > kCensoredLimit * static_cast<double>(trials);
    out.atoms.push_back(std::move(chk));
  }
  return out;
}

// --- deterministic baseline --------------------------------------------------

struct BruteForceResult {
  double u = std::numeric_limits<double>::infinity();
  std::optional<Solution> witness;
  std::optional<EvaluationReport> report;
  std::uint64_t candidates = 0;
  std::uint64_t uncoverable = 0;
};

inline constexpr std::uint64_t kBruteForceLimit = 1'000'000;

/// Exhaustive search over deterministic solutions of `spec` (one action per
/// decision state). Candidates that cannot cover every atom are skipped. The
/// first candidate in enumeration order attaining the minimum is returned.
inline BruteForceResult brute_force_deterministic(const Environment& env, const SolutionSpec& spec,
                                                  const CompiledObjective& obj,
                                                  std::uint64_t limit = kBruteForceLimit) {
  const auto space = make_space(env, spec);
  const auto states = space->decision_state_count();
  std::uint64_t total = 1;
  for (std::size_t s = 0; s < states; ++s) {
    const auto k = space->action_count(s);
    if (total > limit / k) throw ResourceLimitError("more than " + std::to_string(limit) + " deterministic candidates");
    total *= k;
  }

  BruteForceResult out;
  std::vector<std::size_t> pick(states, 0);
  Solution sol{space, std::vector<double>(space->parameter_count(), 0.0)};
  for (std::size_t s = 0; s < states; ++s) sol.probs[space->offsets()[s]] = 1.0;
  while (true) {
    ++out.candidates;
    try {
      auto report = eval_objective(build_chain(sol), obj);
      if (report.u < out.u) {
        out.u = report.u;
        out.witness = sol;
        out.report = std::move(report);
      }
    } catch (const UncoverableError&) {
      ++out.uncoverable;
    }
    std::size_t s = states;
    while (s > 0) {
      const std::size_t i = s - 1;
      const auto base = space->offsets()[i];
      sol.probs[base + pick[i]] = 0.0;
      if (++pick[i] < space->action_count(i)) {
        sol.probs[base + pick[i]] = 1.0;
        break;
      }
      pick[i] = 0;
      sol.probs[base] = 1.0;
      --s;
    }
    if (s == 0) break;
  }
  return out;
}

}  // namespace ftrv
