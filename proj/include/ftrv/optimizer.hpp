#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ftrv/evaluator.hpp"
#include "ftrv/gradient.hpp"
#include "ftrv/strategy.hpp"

namespace ftrv {

inline constexpr double kLogitClamp = 50.0;

/// Action probabilities below `prune` are set to zero (and the row
/// renormalised) before the chain is built, so transitions can leave the
/// support and configurations can become unreachable. 0 keeps full support.
struct OptimizerConfig {
  std::size_t steps = 600;
  double lr = 0.3;
  double prune = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool parallel = false;
  std::size_t config_limit = kDefaultConfigLimit;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

/// One Adam update; logits are clamped to [-50, 50] afterwards.
inline void adam_step(ParamSet& params, std::span<const double> grad, AdamState& st, const OptimizerConfig& cfg) {
  const auto n = params.logits.size();
  if (st.m.size() != n) {
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    st.t = 0;
  }
  for (double g : grad)
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient");
  ++st.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < n; ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double step = cfg.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.eps);
    params.logits[i] = std::clamp(params.logits[i] - step, -kLogitClamp, kLogitClamp);
  }
}

struct StepRecord {
  std::size_t step = 0;
  double u = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  double best_u = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  ParamSet best_params;
  Solution best_solution;
  EvaluationReport best_report;
  std::string error;  // why the run stopped early, if it did

  bool ok() const noexcept { return std::isfinite(best_u); }
  double mean_step_seconds() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : steps) s += r.seconds;
    return s / static_cast<double>(steps.size());
  }
};

/// Adam from init_params(space, seed); keeps the parameters with the least U
/// seen at any step. A step whose (pruned) chain cannot be evaluated ends the
/// run; whatever was best so far is kept.
inline RunRecord optimize_seed(SpacePtr space, const CompiledObjective& obj, std::uint64_t seed,
                               const OptimizerConfig& cfg) {
  RunRecord run;
  run.seed = seed;
  ParamSet params = init_params(std::move(space), seed);
  AdamState st;
  try {
    for (std::size_t k = 0; k < cfg.steps; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      Gradient g = grad_objective(params, obj, cfg.prune);
      if (g.u < run.best_u) {
        run.best_u = g.u;
        run.best_step = k;
        run.best_params = params;
        run.best_report = std::move(g.report);
      }
      adam_step(params, g.logits, st, cfg);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      run.steps.push_back({k, g.u, dt.count()});
    }
  } catch (const NumericalError& e) {
    run.error = e.what();
  } catch (const UncoverableError& e) {
    run.error = e.what();
  }
  if (run.ok()) run.best_solution = to_solution(run.best_params, cfg.prune);
  return run;
}

struct SynthesisResult {
  std::vector<RunRecord> runs;
  std::size_t best = 0;

  const RunRecord& best_run() const { return runs.at(best); }
  const Solution& solution() const { return best_run().best_solution; }
};

/// Throws UncoverableError when no BSCC of the configuration digraph can cover
/// all atoms, whatever the (full-support) parameters.
inline void require_coverable(const Environment& env, const SolutionSpec& spec, const CompiledObjective& obj,
                              std::size_t config_limit = kDefaultConfigLimit) {
  const auto cov = structural_coverage_check(env, spec, obj.atoms, config_limit);
  if (cov.any_full()) return;
  std::vector<std::pair<std::string, std::size_t>> gaps;
  for (std::size_t b = 0; b < cov.bsccs.size(); ++b)
    for (std::size_t a = 0; a < obj.atoms.size(); ++a)
      if (!cov.covered[b][a]) gaps.emplace_back(atom_label(obj.atoms[a], env), b);
  std::string msg = "objective is uncoverable for this configuration space:";
  for (std::size_t i = 0; i < gaps.size() && i < 8; ++i)
    msg += " " + gaps[i].first + "@BSCC" + std::to_string(gaps[i].second);
  if (gaps.size() > 8) msg += " ...";
  throw UncoverableError(msg, std::move(gaps));
}

/// Runs every seed and picks the least best-U (ties: smallest seed).
inline SynthesisResult synthesize(const Environment& env, const SolutionSpec& spec, const CompiledObjective& obj,
                                  const OptimizerConfig& cfg = {}) {
  if (cfg.seeds.empty()) throw ValidationError("at least one seed is required");
  if (cfg.steps == 0) throw ValidationError("step count must be positive");
  if (!(cfg.lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(cfg.prune >= 0.0 && cfg.prune < 0.5)) throw ValidationError("prune threshold must lie in [0, 0.5)");
  const auto space = make_space(env, spec, cfg.config_limit);
  require_coverable(env, spec, obj, cfg.config_limit);

  SynthesisResult out;
  if (cfg.parallel) {
    std::vector<std::future<RunRecord>> jobs;
    for (auto seed : cfg.seeds)
      jobs.push_back(std::async(std::launch::async, [&, seed] { return optimize_seed(space, obj, seed, cfg); }));
    for (auto& j : jobs) out.runs.push_back(j.get());
  } else {
    for (auto seed : cfg.seeds) out.runs.push_back(optimize_seed(space, obj, seed, cfg));
  }

  bool found = false;
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto& r = out.runs[i];
    if (!r.ok()) continue;
    const auto& cur = out.runs[out.best];
    if (!found || r.best_u < cur.best_u || (r.best_u == cur.best_u && r.seed < cur.seed)) {
      out.best = i;
      found = true;
    }
  }
  if (!found) throw NumericalError("every seed failed: " + out.runs.front().error);
  return out;
}

}  // namespace ftrv
