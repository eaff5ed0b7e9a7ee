#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftrv/environment.hpp"
#include "ftrv/error.hpp"

namespace ftrv {

enum class Mode { autonomous, coordinated };

inline std::string_view to_string(Mode mode) {
  return mode == Mode::autonomous ? "autonomous" : "coordinated";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "autonomous") return Mode::autonomous;
  if (text == "coordinated") return Mode::coordinated;
  throw ValidationError("unknown mode '" + std::string(text) + "' (expected autonomous|coordinated)");
}

/// Shape of a solution: autonomous profiles carry one memory size per agent,
/// coordinated strategies a single shared memory size.
struct SolutionSpec {
  Mode mode = Mode::coordinated;
  int agents = 1;
  std::vector<int> memory{1};

  static SolutionSpec autonomous(int agents, int memory_per_agent) {
    return {Mode::autonomous, agents, std::vector<int>(std::max(agents, 0), memory_per_agent)};
  }
  static SolutionSpec autonomous(std::vector<int> memory_per_agent) {
    const int n = static_cast<int>(memory_per_agent.size());
    return {Mode::autonomous, n, std::move(memory_per_agent)};
  }
  static SolutionSpec coordinated(int agents, int shared_memory) {
    return {Mode::coordinated, agents, {shared_memory}};
  }

  int memory_of(int agent) const {
    return mode == Mode::coordinated ? memory.at(0) : memory.at(agent);
  }

  void validate() const {
    if (agents < 1) throw ValidationError("agent count must be at least 1");
    const std::size_t expected = mode == Mode::autonomous ? static_cast<std::size_t>(agents) : 1;
    if (memory.size() != expected)
      throw ValidationError(mode == Mode::autonomous
                                ? "autonomous spec needs one memory size per agent"
                                : "coordinated spec needs exactly one shared memory size");
    for (int m : memory)
      if (m < 1) throw ValidationError("memory sizes must be at least 1");
  }

  friend bool operator==(const SolutionSpec&, const SolutionSpec&) = default;
};

/// Joint state of all agents. Autonomous: one memory entry per agent;
/// coordinated: a single shared memory entry.
struct Configuration {
  std::vector<VertexId> vertices;
  std::vector<int> memory;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

inline constexpr std::size_t kDefaultConfigLimit = 2'000'000;

/// Index arithmetic shared by parameters, solutions and chains.
///
/// Autonomous: agent i has local states l = v * m_i + mem; configurations are
/// mixed-radix numbers over local states with agent 0 most significant.
/// Decision states are (agent, local state), agent-major. The action of a
/// local state (v, mem) with index a moves to successor a / m_i with memory
/// a % m_i.
///
/// Coordinated: configuration = (v_0, ..., v_{n-1}) in mixed radix |V|, then
/// the shared memory as least significant digit. Each configuration is a
/// decision state; its actions are mixed-radix (s_0, ..., s_{n-1}, mem') over
/// successor indices and memory.
class ConfigSpace {
 public:
  ConfigSpace(Environment env, SolutionSpec spec, std::size_t config_limit = kDefaultConfigLimit)
      : env_(std::move(env)), spec_(std::move(spec)) {
    spec_.validate();
    const std::size_t nv = env_.size();
    const int n = spec_.agents;
    auto mul = [&](std::size_t a, std::size_t b) {
      if (b != 0 && a > config_limit / b)
        throw ResourceLimitError("configuration count exceeds limit " + std::to_string(config_limit));
      return a * b;
    };

    if (spec_.mode == Mode::autonomous) {
      local_count_.resize(n);
      stride_.assign(n, 1);
      std::size_t total = 1;
      for (int i = n - 1; i >= 0; --i) {
        local_count_[i] = nv * static_cast<std::size_t>(spec_.memory[i]);
        stride_[i] = total;
        total = mul(total, local_count_[i]);
      }
      config_count_ = total;
      agent_offset_.resize(n + 1, 0);
      for (int i = 0; i < n; ++i) agent_offset_[i + 1] = agent_offset_[i] + local_count_[i];
      offsets_.reserve(agent_offset_[n] + 1);
      offsets_.push_back(0);
      for (int i = 0; i < n; ++i)
        for (std::size_t l = 0; l < local_count_[i]; ++l) {
          const auto v = static_cast<VertexId>(l / spec_.memory[i]);
          offsets_.push_back(offsets_.back() + env_.successors(v).size() * spec_.memory[i]);
        }
    } else {
      std::size_t total = 1;
      for (int i = 0; i < n; ++i) total = mul(total, nv);
      config_count_ = mul(total, static_cast<std::size_t>(spec_.memory[0]));
      offsets_.reserve(config_count_ + 1);
      offsets_.push_back(0);
      std::vector<VertexId> pos;
      for (std::size_t c = 0; c < config_count_; ++c) {
        coordinated_positions(c, pos);
        std::size_t count = static_cast<std::size_t>(spec_.memory[0]);
        for (VertexId v : pos) count *= env_.successors(v).size();
        offsets_.push_back(offsets_.back() + count);
      }
    }
  }

  const Environment& environment() const noexcept { return env_; }
  const SolutionSpec& spec() const noexcept { return spec_; }
  Mode mode() const noexcept { return spec_.mode; }
  int agents() const noexcept { return spec_.agents; }
  std::size_t config_count() const noexcept { return config_count_; }

  std::size_t decision_state_count() const noexcept { return offsets_.size() - 1; }
  std::size_t parameter_count() const noexcept { return offsets_.back(); }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  std::size_t action_count(std::size_t state) const { return offsets_[state + 1] - offsets_[state]; }

  // --- autonomous helpers -------------------------------------------------
  std::size_t local_count(int agent) const { return local_count_.at(agent); }
  std::size_t stride(int agent) const { return stride_.at(agent); }
  std::size_t agent_state(int agent, std::size_t local) const { return agent_offset_[agent] + local; }
  std::size_t local_of(std::size_t config, int agent) const {
    return (config / stride_[agent]) % local_count_[agent];
  }
  /// Local state reached by taking action `action` in local state `local`.
  std::size_t local_target(int agent, std::size_t local, std::size_t action) const {
    const auto m = static_cast<std::size_t>(spec_.memory[agent]);
    const auto v = static_cast<VertexId>(local / m);
    return static_cast<std::size_t>(env_.successors(v)[action / m]) * m + action % m;
  }
  /// Decodes an autonomous decision state into (agent, local state).
  std::pair<int, std::size_t> split_agent_state(std::size_t state) const {
    auto it = std::upper_bound(agent_offset_.begin(), agent_offset_.end(), state);
    const int agent = static_cast<int>(it - agent_offset_.begin()) - 1;
    return {agent, state - agent_offset_[agent]};
  }

  // --- shared helpers -----------------------------------------------------
  VertexId vertex_of(std::size_t config, int agent) const {
    if (spec_.mode == Mode::autonomous)
      return static_cast<VertexId>(local_of(config, agent) / spec_.memory[agent]);
    std::size_t rest = config / spec_.memory[0];
    for (int i = spec_.agents - 1; i > agent; --i) rest /= env_.size();
    return static_cast<VertexId>(rest % env_.size());
  }

  Configuration decode(std::size_t config) const {
    Configuration out;
    const int n = spec_.agents;
    if (spec_.mode == Mode::autonomous) {
      for (int i = 0; i < n; ++i) {
        const auto l = local_of(config, i);
        out.vertices.push_back(static_cast<VertexId>(l / spec_.memory[i]));
        out.memory.push_back(static_cast<int>(l % spec_.memory[i]));
      }
    } else {
      coordinated_positions(config, out.vertices);
      out.memory.push_back(static_cast<int>(config % spec_.memory[0]));
    }
    return out;
  }

  std::size_t encode(const Configuration& c) const {
    const int n = spec_.agents;
    const auto nv = env_.size();
    if (static_cast<int>(c.vertices.size()) != n)
      throw ValidationError("configuration has wrong agent count");
    for (VertexId v : c.vertices)
      if (v < 0 || static_cast<std::size_t>(v) >= nv)
        throw ValidationError("configuration vertex out of range");
    if (spec_.mode == Mode::autonomous) {
      if (static_cast<int>(c.memory.size()) != n)
        throw ValidationError("configuration has wrong memory count");
      std::size_t idx = 0;
      for (int i = 0; i < n; ++i) {
        if (c.memory[i] < 0 || c.memory[i] >= spec_.memory[i])
          throw ValidationError("configuration memory out of range");
        idx += (static_cast<std::size_t>(c.vertices[i]) * spec_.memory[i] + c.memory[i]) * stride_[i];
      }
      return idx;
    }
    if (c.memory.size() != 1 || c.memory[0] < 0 || c.memory[0] >= spec_.memory[0])
      throw ValidationError("configuration memory out of range");
    std::size_t idx = 0;
    for (VertexId v : c.vertices) idx = idx * nv + static_cast<std::size_t>(v);
    return idx * spec_.memory[0] + c.memory[0];
  }

  /// Human-readable configuration, e.g. "[A:0 D:1]" or "(A,C):2".
  std::string label(std::size_t config) const {
    const auto c = decode(config);
    std::string out;
    if (spec_.mode == Mode::autonomous) {
      out = "[";
      for (int i = 0; i < spec_.agents; ++i) {
        if (i) out += ' ';
        out += env_.name(c.vertices[i]) + ":" + std::to_string(c.memory[i]);
      }
      return out + "]";
    }
    out = "(";
    for (int i = 0; i < spec_.agents; ++i) {
      if (i) out += ',';
      out += env_.name(c.vertices[i]);
    }
    return out + "):" + std::to_string(c.memory[0]);
  }

  /// Configuration reached from coordinated configuration `config` by `action`.
  std::size_t coordinated_target(std::size_t config, std::size_t action) const {
    thread_local std::vector<VertexId> pos;
    coordinated_positions(config, pos);
    const auto m = static_cast<std::size_t>(spec_.memory[0]);
    const std::size_t mem = action % m;
    std::size_t rest = action / m;
    const auto nv = env_.size();
    std::size_t idx = 0;
    std::size_t place = 1;
    for (int i = spec_.agents - 1; i >= 0; --i) {
      const auto& succ = env_.successors(pos[i]);
      const std::size_t s = rest % succ.size();
      rest /= succ.size();
      idx += static_cast<std::size_t>(succ[s]) * place;
      place *= nv;
    }
    return idx * m + mem;
  }

 private:
  void coordinated_positions(std::size_t config, std::vector<VertexId>& out) const {
    const int n = spec_.agents;
    const auto nv = env_.size();
    out.assign(n, 0);
    std::size_t rest = config / spec_.memory[0];
    for (int i = n - 1; i >= 0; --i) {
      out[i] = static_cast<VertexId>(rest % nv);
      rest /= nv;
    }
  }

  Environment env_;
  SolutionSpec spec_;
  std::size_t config_count_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> local_count_;
  std::vector<std::size_t> stride_;
  std::vector<std::size_t> agent_offset_;
};

using SpacePtr = std::shared_ptr<const ConfigSpace>;

inline SpacePtr make_space(const Environment& env, const SolutionSpec& spec,
                           std::size_t config_limit = kDefaultConfigLimit) {
  return std::make_shared<const ConfigSpace>(env, spec, config_limit);
}

/// Raw logits: one vector per decision state, laid out by ConfigSpace::offsets.
struct ParamSet {
  SpacePtr space;
  std::vector<double> logits;

  std::span<double> state(std::size_t s) {
    const auto& off = space->offsets();
    return {logits.data() + off[s], off[s + 1] - off[s]};
  }
  std::span<const double> state(std::size_t s) const {
    const auto& off = space->offsets();
    return {logits.data() + off[s], off[s + 1] - off[s]};
  }
};

/// Per-decision-state probability distributions over admissible actions.
struct Solution {
  SpacePtr space;
  std::vector<double> probs;

  std::span<const double> state(std::size_t s) const {
    const auto& off = space->offsets();
    return {probs.data() + off[s], off[s + 1] - off[s]};
  }
  std::span<double> state(std::size_t s) {
    const auto& off = space->offsets();
    return {probs.data() + off[s], off[s + 1] - off[s]};
  }
};

inline constexpr double kLogitInitSpread = 3.0;

/// Every logit is log(u) with u ~ Uniform(e^-3, e^3), drawn in parameter order
/// from a mt19937_64 seeded with `seed`.
inline ParamSet init_params(SpacePtr space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(std::exp(-kLogitInitSpread), std::exp(kLogitInitSpread));
  ParamSet p{std::move(space), {}};
  p.logits.resize(p.space->parameter_count());
  for (auto& x : p.logits) x = std::log(unif(rng));
  return p;
}

inline ParamSet init_params(const Environment& env, const SolutionSpec& spec, std::uint64_t seed) {
  return init_params(make_space(env, spec), seed);
}

inline void softmax(std::span<const double> logits, std::span<double> out) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (auto& x : out) x /= sum;
}

/// Softmax per decision state. With `prune` > 0, probabilities below it are
/// zeroed (the row maximum always survives) and the row renormalised.
inline Solution to_solution(const ParamSet& params, double prune = 0.0) {
  Solution sol{params.space, std::vector<double>(params.logits.size())};
  for (std::size_t s = 0; s < params.space->decision_state_count(); ++s) {
    auto row = sol.state(s);
    softmax(params.state(s), row);
    if (prune <= 0.0) continue;
    const double cut = std::min(prune, *std::max_element(row.begin(), row.end()));
    double kept = 0.0;
    for (auto& x : row) {
      if (x < cut) x = 0.0;
      kept += x;
    }
    for (auto& x : row) x /= kept;
  }
  return sol;
}

/// Uniform distribution over admissible actions in every state.
inline Solution uniform_solution(SpacePtr space) {
  Solution sol{std::move(space), {}};
  sol.probs.resize(sol.space->parameter_count());
  for (std::size_t s = 0; s < sol.space->decision_state_count(); ++s) {
    auto row = sol.state(s);
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
  }
  return sol;
}

/// Sparse row-stochastic matrix over configurations (CSR, rows sorted by
/// column, zero entries absent). `actions` records, per stored entry, the
/// action index of each agent (autonomous) or the joint action (coordinated)
/// that produced it.
struct ConfigChain {
  SpacePtr space;
  std::vector<std::size_t> row_start;
  std::vector<std::uint32_t> column;
  std::vector<double> prob;
  std::vector<std::uint32_t> actions;

  std::size_t size() const noexcept { return row_start.size() - 1; }
  std::size_t entries() const noexcept { return column.size(); }
  std::size_t actions_per_entry() const noexcept {
    return space->mode() == Mode::autonomous ? static_cast<std::size_t>(space->agents()) : 1;
  }
};

inline ConfigChain build_chain(const Solution& sol) {
  const auto& space = *sol.space;
  const auto count = space.config_count();
  if (count > std::numeric_limits<std::uint32_t>::max())
    throw ResourceLimitError("configuration count does not fit the chain index type");
  ConfigChain chain;
  chain.space = sol.space;
  chain.row_start.reserve(count + 1);
  chain.row_start.push_back(0);

  if (space.mode() == Mode::coordinated) {
    for (std::size_t c = 0; c < count; ++c) {
      const auto row = sol.state(c);
      for (std::size_t a = 0; a < row.size(); ++a) {
        if (row[a] <= 0.0) continue;
        chain.column.push_back(static_cast<std::uint32_t>(space.coordinated_target(c, a)));
        chain.prob.push_back(row[a]);
        chain.actions.push_back(static_cast<std::uint32_t>(a));
      }
      chain.row_start.push_back(chain.column.size());
    }
    return chain;
  }

  const int n = space.agents();
  struct Move {
    std::size_t target_local;
    double p;
    std::uint32_t action;
  };
  // Per agent, per local state: the positive-probability moves.
  std::vector<std::vector<std::vector<Move>>> moves(n);
  for (int i = 0; i < n; ++i) {
    moves[i].resize(space.local_count(i));
    for (std::size_t l = 0; l < space.local_count(i); ++l) {
      const auto row = sol.state(space.agent_state(i, l));
      for (std::size_t a = 0; a < row.size(); ++a)
        if (row[a] > 0.0)
          moves[i][l].push_back({space.local_target(i, l, a), row[a], static_cast<std::uint32_t>(a)});
    }
  }

  std::vector<const std::vector<Move>*> lists(n);
  std::vector<std::size_t> pick(n);
  for (std::size_t c = 0; c < count; ++c) {
    for (int i = 0; i < n; ++i) lists[i] = &moves[i][space.local_of(c, i)];
    std::fill(pick.begin(), pick.end(), 0);
    while (true) {
      double p = 1.0;
      std::size_t target = 0;
      for (int i = 0; i < n; ++i) {
        const Move& mv = (*lists[i])[pick[i]];
        p *= mv.p;
        target += mv.target_local * space.stride(i);
      }
      if (p > 0.0) {
        chain.column.push_back(static_cast<std::uint32_t>(target));
        chain.prob.push_back(p);
        for (int i = 0; i < n; ++i) chain.actions.push_back((*lists[i])[pick[i]].action);
      }
      int i = n - 1;
      while (i >= 0 && ++pick[i] == lists[i]->size()) pick[i--] = 0;
      if (i < 0) break;
    }
    chain.row_start.push_back(chain.column.size());
  }
  return chain;
}

// --- strategy file ---------------------------------------------------------

namespace detail {

inline std::string memory_suffix(int mem) { return ":" + std::to_string(mem); }

/// Splits "X:mem"; a missing suffix means memory 0 and is only accepted when
/// the memory size is 1.
inline std::pair<std::string, int> split_memory(std::string_view text, int memory_size) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    if (memory_size != 1) throw ParseError("missing ':memory' in '" + std::string(text) + "'");
    return {std::string(text), 0};
  }
  const std::string num(text.substr(colon + 1));
  std::size_t used = 0;
  int mem = -1;
  try {
    mem = std::stoi(num, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != num.size() || num.empty())
    throw ParseError("bad memory index in '" + std::string(text) + "'");
  if (mem < 0 || mem >= memory_size)
    throw ParseError("memory index out of range in '" + std::string(text) + "'");
  return {std::string(text.substr(0, colon)), mem};
}

inline std::vector<std::string> split_commas(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = text.find(',', start);
    out.emplace_back(text.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline VertexId lookup_vertex(const Environment& env, const std::string& name) {
  auto v = env.find(name);
  if (!v) throw ParseError("unknown vertex '" + name + "'");
  return *v;
}

}  // namespace detail

/// Label of a decision state: "agent/V:mem" (autonomous) or "V1,V2:mem".
inline std::string state_label(const ConfigSpace& space, std::size_t state) {
  const auto& env = space.environment();
  if (space.mode() == Mode::autonomous) {
    auto [agent, local] = space.split_agent_state(state);
    const int m = space.spec().memory[agent];
    return std::to_string(agent) + "/" + env.name(static_cast<VertexId>(local / m)) +
           detail::memory_suffix(static_cast<int>(local % m));
  }
  const auto c = space.decode(state);
  std::string out;
  for (std::size_t i = 0; i < c.vertices.size(); ++i) {
    if (i) out += ',';
    out += env.name(c.vertices[i]);
  }
  return out + detail::memory_suffix(c.memory[0]);
}

/// Label of an action: "V:mem" (autonomous) or "V1,V2:mem".
inline std::string action_label(const ConfigSpace& space, std::size_t state, std::size_t action) {
  const auto& env = space.environment();
  if (space.mode() == Mode::autonomous) {
    auto [agent, local] = space.split_agent_state(state);
    const int m = space.spec().memory[agent];
    const auto target = space.local_target(agent, local, action);
    return env.name(static_cast<VertexId>(target / m)) + detail::memory_suffix(static_cast<int>(target % m));
  }
  const auto target = space.decode(space.coordinated_target(state, action));
  std::string out;
  for (std::size_t i = 0; i < target.vertices.size(); ++i) {
    if (i) out += ',';
    out += env.name(target.vertices[i]);
  }
  return out + detail::memory_suffix(target.memory[0]);
}

inline std::size_t parse_state_label(const ConfigSpace& space, std::string_view text) {
  const auto& env = space.environment();
  const auto& spec = space.spec();
  if (space.mode() == Mode::autonomous) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) throw ParseError("state '" + std::string(text) + "' lacks 'agent/'");
    int agent = -1;
    try {
      agent = std::stoi(std::string(text.substr(0, slash)));
    } catch (const std::exception&) {
      throw ParseError("bad agent index in state '" + std::string(text) + "'");
    }
    if (agent < 0 || agent >= spec.agents) throw ParseError("agent out of range in '" + std::string(text) + "'");
    auto [name, mem] = detail::split_memory(text.substr(slash + 1), spec.memory[agent]);
    const VertexId v = detail::lookup_vertex(env, name);
    return space.agent_state(agent, static_cast<std::size_t>(v) * spec.memory[agent] + mem);
  }
  auto [names, mem] = detail::split_memory(text, spec.memory[0]);
  Configuration c;
  for (const auto& name : detail::split_commas(names)) c.vertices.push_back(detail::lookup_vertex(env, name));
  if (static_cast<int>(c.vertices.size()) != spec.agents)
    throw ParseError("state '" + std::string(text) + "' names the wrong number of agents");
  c.memory = {mem};
  return space.encode(c);
}

/// Resolves an action label within `state`; throws if the move does not follow
/// an edge of the environment.
inline std::size_t parse_action_label(const ConfigSpace& space, std::size_t state, std::string_view text) {
  const auto& env = space.environment();
  const auto& spec = space.spec();
  if (space.mode() == Mode::autonomous) {
    auto [agent, local] = space.split_agent_state(state);
    const int m = spec.memory[agent];
    auto [name, mem] = detail::split_memory(text, m);
    const VertexId from = static_cast<VertexId>(local / m);
    const VertexId to = detail::lookup_vertex(env, name);
    const auto& succ = env.successors(from);
    auto it = std::lower_bound(succ.begin(), succ.end(), to);
    if (it == succ.end() || *it != to)
      throw ValidationError("illegal move " + env.name(from) + " -> " + name);
    return static_cast<std::size_t>(it - succ.begin()) * m + mem;
  }
  auto [names, mem] = detail::split_memory(text, spec.memory[0]);
  const auto parts = detail::split_commas(names);
  if (static_cast<int>(parts.size()) != spec.agents)
    throw ParseError("action '" + std::string(text) + "' names the wrong number of agents");
  const auto from = space.decode(state);
  std::size_t action = 0;
  for (int i = 0; i < spec.agents; ++i) {
    const VertexId to = detail::lookup_vertex(env, parts[i]);
    const auto& succ = env.successors(from.vertices[i]);
    auto it = std::lower_bound(succ.begin(), succ.end(), to);
    if (it == succ.end() || *it != to)
      throw ValidationError("illegal move " + env.name(from.vertices[i]) + " -> " + parts[i]);
    action = action * succ.size() + static_cast<std::size_t>(it - succ.begin());
  }
  return action * spec.memory[0] + mem;
}

inline nlohmann::json solution_to_json(const Solution& sol) {
  const auto& space = *sol.space;
  nlohmann::json j;
  j["mode"] = std::string(to_string(space.mode()));
  j["n"] = space.agents();
  if (space.mode() == Mode::autonomous)
    j["memory"] = space.spec().memory;
  else
    j["memory"] = space.spec().memory[0];
  auto states = nlohmann::json::array();
  for (std::size_t s = 0; s < space.decision_state_count(); ++s) {
    auto actions = nlohmann::json::array();
    const auto row = sol.state(s);
    for (std::size_t a = 0; a < row.size(); ++a)
      if (row[a] != 0.0) actions.push_back({{"action", action_label(space, s, a)}, {"prob", row[a]}});
    states.push_back({{"state", state_label(space, s)}, {"actions", std::move(actions)}});
  }
  j["states"] = std::move(states);
  return j;
}

/// Strategy file text. Probabilities use shortest round-trip decimal form.
inline std::string serialize_solution(const Solution& sol) { return solution_to_json(sol).dump(1) + "\n"; }

inline SolutionSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("strategy file must be a JSON object");
  for (const char* key : {"mode", "n", "memory"})
    if (!j.contains(key)) throw ParseError(std::string("strategy file lacks '") + key + "'");
  const Mode mode = parse_mode(j.at("mode").get<std::string>());
  const int n = j.at("n").get<int>();
  const auto& mem = j.at("memory");
  SolutionSpec spec;
  if (mode == Mode::coordinated) {
    if (!mem.is_number_integer()) throw ParseError("coordinated 'memory' must be an integer");
    spec = SolutionSpec::coordinated(n, mem.get<int>());
  } else if (mem.is_number_integer()) {
    spec = SolutionSpec::autonomous(n, mem.get<int>());
  } else {
    spec = SolutionSpec::autonomous(mem.get<std::vector<int>>());
    if (spec.agents != n) throw ParseError("'memory' list length differs from 'n'");
  }
  spec.validate();
  return spec;
}

/// Reads a strategy file. States that are not listed get the uniform
/// distribution over their admissible actions; listed states must sum to 1
/// within 1e-9 and only use legal moves.
inline Solution solution_from_json(const Environment& env, const nlohmann::json& j,
                                   std::size_t config_limit = kDefaultConfigLimit) {
  auto spec = spec_from_json(j);
  auto space = make_space(env, spec, config_limit);
  Solution sol = uniform_solution(space);
  if (!j.contains("states") || !j.at("states").is_array()) throw ParseError("strategy file lacks 'states' array");

  std::vector<char> seen(space->decision_state_count(), 0);
  for (const auto& entry : j.at("states")) {
    if (!entry.contains("state") || !entry.contains("actions"))
      throw ParseError("each state needs 'state' and 'actions'");
    const auto label = entry.at("state").get<std::string>();
    const auto s = parse_state_label(*space, label);
    if (seen[s]) throw ParseError("state '" + label + "' listed twice");
    seen[s] = 1;
    auto row = sol.state(s);
    std::fill(row.begin(), row.end(), 0.0);
    std::vector<char> used(row.size(), 0);
    double sum = 0.0;
    for (const auto& act : entry.at("actions")) {
      if (!act.contains("action") || !act.contains("prob"))
        throw ParseError("each action needs 'action' and 'prob' (state '" + label + "')");
      const auto a = parse_action_label(*space, s, act.at("action").get<std::string>());
      if (used[a]) throw ParseError("action listed twice in state '" + label + "'");
      used[a] = 1;
      const double p = act.at("prob").get<double>();
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw ValidationError("probability " + std::to_string(p) + " out of [0,1] in state '" + label + "'");
      row[a] = p;
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("distribution of state '" + label + "' sums to " + std::to_string(sum));
    if (std::abs(sum - 1.0) > 1e-12)
      for (auto& x : row) x /= sum;
  }
  return sol;
}

inline Solution parse_solution(const Environment& env, std::string_view text,
                               std::size_t config_limit = kDefaultConfigLimit) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("strategy file is not valid JSON: ") + e.what());
  }
  try {
    return solution_from_json(env, j, config_limit);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed strategy file: ") + e.what());
  }
}

}  // namespace ftrv
