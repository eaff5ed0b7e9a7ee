#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ftrv {

/// Tarjan's algorithm on a CSR digraph, iterative so deep chains cannot
/// overflow the call stack. Returns the component id of every node; ids are
/// assigned in the order components are completed (reverse topological).
inline std::vector<std::uint32_t> tarjan_components(std::span<const std::size_t> row_start,
                                                    std::span<const std::uint32_t> column,
                                                    std::uint32_t* component_count = nullptr) {
  constexpr std::uint32_t kUnvisited = UINT32_MAX;
  const std::size_t n = row_start.size() - 1;
  std::vector<std::uint32_t> index(n, kUnvisited);
  std::vector<std::uint32_t> lowlink(n, 0);
  std::vector<std::uint32_t> comp(n, kUnvisited);
  std::vector<char> on_stack(n, 0);
  std::vector<std::uint32_t> stack;
  struct Frame {
    std::uint32_t node;
    std::size_t next_edge;
  };
  std::vector<Frame> call;
  std::uint32_t counter = 0;
  std::uint32_t comps = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.push_back({static_cast<std::uint32_t>(root), row_start[root]});
    index[root] = lowlink[root] = counter++;
    stack.push_back(static_cast<std::uint32_t>(root));
    on_stack[root] = 1;

    while (!call.empty()) {
      Frame& f = call.back();
      const std::uint32_t v = f.node;
      if (f.next_edge < row_start[v + 1]) {
        const std::uint32_t w = column[f.next_edge++];
        if (index[w] == kUnvisited) {
          index[w] = lowlink[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, row_start[w]});
        } else if (on_stack[w]) {
          lowlink[v] = std::min(lowlink[v], index[w]);
        }
        continue;
      }
      if (lowlink[v] == index[v]) {
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = comps;
        } while (w != v);
        ++comps;
      }
      call.pop_back();
      if (!call.empty()) {
        const std::uint32_t parent = call.back().node;
        lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
      }
    }
  }
  if (component_count) *component_count = comps;
  return comp;
}

/// Bottom SCCs (no edge leaves the component), each sorted ascending, the list
/// sorted by smallest member.
inline std::vector<std::vector<std::uint32_t>> bottom_components(std::span<const std::size_t> row_start,
                                                                 std::span<const std::uint32_t> column) {
  std::uint32_t count = 0;
  const auto comp = tarjan_components(row_start, column, &count);
  std::vector<char> leaks(count, 0);
  const std::size_t n = row_start.size() - 1;
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t e = row_start[v]; e < row_start[v + 1]; ++e)
      if (comp[column[e]] != comp[v]) leaks[comp[v]] = 1;

  std::vector<std::vector<std::uint32_t>> by_comp(count);
  for (std::size_t v = 0; v < n; ++v)
    if (!leaks[comp[v]]) by_comp[comp[v]].push_back(static_cast<std::uint32_t>(v));
  std::vector<std::vector<std::uint32_t>> out;
  for (auto& members : by_comp)
    if (!members.empty()) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace ftrv
