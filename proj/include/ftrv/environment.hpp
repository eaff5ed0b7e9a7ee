#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ftrv/error.hpp"

namespace ftrv {

using VertexId = int;

/// Directed graph of patrol locations. Every edge takes one time unit.
///
/// Vertices are indexed in declaration order and successor lists are sorted
/// by that index, so parameter layouts and tie-breaking are deterministic.
/// Immutable once built.
class Environment {
 public:
  Environment() = default;

  /// Builds an environment from names and directed edges (by index).
  /// Duplicate edges collapse. Throws ValidationError when an index is out of
  /// range, a name repeats, a name is not a plain identifier or a vertex has no
  /// successor.
  static Environment from_edges(std::vector<std::string> names,
                                const std::vector<std::pair<VertexId, VertexId>>& edges) {
    Environment env;
    env.names_ = std::move(names);
    const auto n = static_cast<VertexId>(env.names_.size());
    if (n == 0) throw ValidationError("environment has no vertices");
    for (VertexId v = 0; v < n; ++v) {
      const auto& name = env.names_[v];
      if (!is_valid_name(name)) throw ValidationError("invalid vertex name '" + name + "'");
      if (!env.index_.emplace(name, v).second)
        throw ValidationError("duplicate vertex '" + name + "'");
    }
    env.succ_.assign(n, {});
    for (auto [from, to] : edges) {
      if (from < 0 || from >= n || to < 0 || to >= n)
        throw ValidationError("edge endpoint out of range");
      env.succ_[from].push_back(to);
    }
    for (VertexId v = 0; v < n; ++v) {
      auto& row = env.succ_[v];
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      if (row.empty()) throw ValidationError("vertex '" + env.names_[v] + "' has no successor");
    }
    return env;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(VertexId v) const { return names_.at(v); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<VertexId>& successors(VertexId v) const { return succ_.at(v); }

  std::optional<VertexId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool has_edge(VertexId from, VertexId to) const {
    const auto& row = successors(from);
    return std::binary_search(row.begin(), row.end(), to);
  }

  std::size_t edge_count() const noexcept {
    std::size_t count = 0;
    for (const auto& row : succ_) count += row.size();
    return count;
  }

  std::vector<std::pair<VertexId, VertexId>> edges() const {
    std::vector<std::pair<VertexId, VertexId>> out;
    for (VertexId v = 0; v < static_cast<VertexId>(size()); ++v)
      for (VertexId w : succ_[v]) out.emplace_back(v, w);
    return out;
  }

  friend bool operator==(const Environment& a, const Environment& b) {
    return a.names_ == b.names_ && a.succ_ == b.succ_;
  }

  /// Vertex names are identifiers ([A-Za-z0-9_]+) so they can appear verbatim
  /// in objective strings and strategy-file state labels.
  static bool is_valid_name(std::string_view name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](char ch) {
      return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
             ch == '_';
    });
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<VertexId>> succ_;
  std::unordered_map<std::string, VertexId> index_;
};

/// Parses the line-based graph format:
///   vertex NAME | edge A B | undirected A B | # comment
inline Environment parse_graph(std::string_view text) {
  std::vector<std::string> names;
  std::unordered_map<std::string, VertexId> index;
  std::vector<std::pair<VertexId, VertexId>> edges;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::vector<std::string> tok;
    for (std::string w; words >> w;) tok.push_back(w);
    if (tok.empty()) continue;

    const auto& kw = tok[0];
    if (kw == "vertex") {
      if (tok.size() != 2) throw ParseError("expected 'vertex NAME'", line_no);
      if (!Environment::is_valid_name(tok[1]))
        throw ParseError("invalid vertex name '" + tok[1] + "'", line_no);
      if (!index.emplace(tok[1], static_cast<VertexId>(names.size())).second)
        throw ParseError("duplicate vertex '" + tok[1] + "'", line_no);
      names.push_back(tok[1]);
    } else if (kw == "edge" || kw == "undirected") {
      if (tok.size() != 3) throw ParseError("expected '" + kw + " A B'", line_no);
      auto lookup = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw ParseError("unknown vertex '" + name + "'", line_no);
        return it->second;
      };
      VertexId a = lookup(tok[1]);
      VertexId b = lookup(tok[2]);
      edges.emplace_back(a, b);
      if (kw == "undirected") edges.emplace_back(b, a);
    } else {
      throw ParseError("unknown statement '" + kw + "'", line_no);
    }
  }
  try {
    return Environment::from_edges(std::move(names), edges);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
}

/// Emits every vertex, then every directed edge, in declaration order.
inline std::string serialize_graph(const Environment& env) {
  std::string out;
  for (const auto& name : env.names()) out += "vertex " + name + "\n";
  for (auto [a, b] : env.edges()) out += "edge " + env.name(a) + " " + env.name(b) + "\n";
  return out;
}

/// True when every vertex is reachable from vertex 0 ignoring edge direction.
inline bool is_weakly_connected(const Environment& env) {
  const auto n = env.size();
  std::vector<std::vector<VertexId>> adj(n);
  for (auto [a, b] : env.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(n, 0);
  std::queue<VertexId> todo;
  todo.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!todo.empty()) {
    VertexId v = todo.front();
    todo.pop();
    for (VertexId w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        todo.push(w);
      }
  }
  return count == n;
}

/// Two-colouring of the underlying undirected graph, if one exists.
inline bool is_bipartite(const Environment& env) {
  const auto n = env.size();
  std::vector<std::vector<VertexId>> adj(n);
  for (auto [a, b] : env.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> colour(n, -1);
  for (VertexId s = 0; s < static_cast<VertexId>(n); ++s) {
    if (colour[s] != -1) continue;
    colour[s] = 0;
    std::queue<VertexId> todo;
    todo.push(s);
    while (!todo.empty()) {
      VertexId v = todo.front();
      todo.pop();
      for (VertexId w : adj[v]) {
        if (colour[w] == -1) {
          colour[w] = 1 - colour[v];
          todo.push(w);
        } else if (colour[w] == colour[v]) {
          return false;
        }
      }
    }
  }
  return true;
}

namespace detail {
inline std::vector<std::pair<VertexId, VertexId>> both_ways(
    const std::vector<std::pair<VertexId, VertexId>>& undirected) {
  std::vector<std::pair<VertexId, VertexId>> out;
  out.reserve(undirected.size() * 2);
  for (auto [a, b] : undirected) {
    out.emplace_back(a, b);
    out.emplace_back(b, a);
  }
  return out;
}
}  // namespace detail

/// Open perimeter on k vertices. Names are A, B, C, ... for k <= 26 and
/// v0, v1, ... otherwise.
inline Environment gen_path(int k) {
  if (k < 2) throw ValidationError("path needs at least 2 vertices");
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i)
    names.push_back(k <= 26 ? std::string(1, static_cast<char>('A' + i)) : "v" + std::to_string(i));
  std::vector<std::pair<VertexId, VertexId>> und;
  for (int i = 0; i + 1 < k; ++i) und.emplace_back(i, i + 1);
  return Environment::from_edges(std::move(names), detail::both_ways(und));
}

inline std::string grid_vertex_name(int row, int col) {
  return "r" + std::to_string(row) + "c" + std::to_string(col);
}

/// 4-neighbour grid with `width` columns and `height` rows, vertices named
/// r<row>c<col> in row-major order, minus the listed undirected edges.
inline Environment gen_grid(int width, int height,
                            const std::vector<std::pair<std::string, std::string>>& removed = {}) {
  if (width < 1 || height < 1 || width * height < 2)
    throw ValidationError("grid needs at least 2 cells");
  std::vector<std::string> names;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) names.push_back(grid_vertex_name(r, c));
  auto id = [width](int r, int c) { return static_cast<VertexId>(r * width + c); };

  std::vector<std::pair<VertexId, VertexId>> und;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      if (c + 1 < width) und.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < height) und.emplace_back(id(r, c), id(r + 1, c));
    }

  std::unordered_map<std::string, VertexId> index;
  for (VertexId v = 0; v < static_cast<VertexId>(names.size()); ++v) index[names[v]] = v;
  for (const auto& [a, b] : removed) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end())
      throw ValidationError("removed edge {" + a + "," + b + "} names an unknown cell");
    auto lo = std::min(ia->second, ib->second);
    auto hi = std::max(ia->second, ib->second);
    auto it = std::find(und.begin(), und.end(), std::pair{lo, hi});
    if (it == und.end()) throw ValidationError("removed edge {" + a + "," + b + "} is not in the grid");
    und.erase(it);
  }

  // A cell cut off completely would have no successor; report that as disconnection too.
  std::vector<char> touched(names.size(), 0);
  for (auto [a, b] : und) touched[a] = touched[b] = 1;
  if (std::find(touched.begin(), touched.end(), 0) != touched.end())
    throw ValidationError("removing the edges disconnects the grid");
  auto env = Environment::from_edges(std::move(names), detail::both_ways(und));
  if (!is_weakly_connected(env)) throw ValidationError("removing the edges disconnects the grid");
  return env;
}

/// Closed perimeter of six vertices v0..v5 with one undirected chord through
/// the centre, {v0, v3} by default.
inline Environment gen_triangle(int chord_a = 0, int chord_b = 3) {
  if (chord_a < 0 || chord_a > 5 || chord_b < 0 || chord_b > 5 || chord_a == chord_b)
    throw ValidationError("chord endpoints must be two distinct vertices of v0..v5");
  const int gap = (chord_b - chord_a + 6) % 6;
  if (gap == 1 || gap == 5) throw ValidationError("chord duplicates a perimeter edge");
  std::vector<std::string> names;
  for (int i = 0; i < 6; ++i) names.push_back("v" + std::to_string(i));
  std::vector<std::pair<VertexId, VertexId>> und;
  for (int i = 0; i < 6; ++i) und.emplace_back(i, (i + 1) % 6);
  und.emplace_back(chord_a, chord_b);
  return Environment::from_edges(std::move(names), detail::both_ways(und));
}

}  // namespace ftrv
