#pragma once

#include <queue>
#include <set>

#include "gridseg/case.hpp"

namespace gridseg {

/// Bus/branch adjacency view of a Case. Indices refer to the owning Case's
/// bus/branch vectors.
struct Graph {
    struct Edge {
        int branch;  // branch index
        int other;   // bus index at the far end
    };
    std::vector<std::vector<Edge>> adj;  // per bus

    explicit Graph(const Case& c) : adj(c.buses.size()) {
        for (size_t bi = 0; bi < c.branches.size(); ++bi) {
            const Branch& br = c.branches[bi];
            const int f = c.bus_index(br.from_bus);
            const int t = c.bus_index(br.to_bus);
            adj[f].push_back({static_cast<int>(bi), t});
            adj[t].push_back({static_cast<int>(bi), f});
        }
    }

    /// Connected-component label per bus (0-based, in order of discovery
    /// from the lowest bus index), ignoring branches in `removed`.
    std::vector<int> components(const std::set<int>& removed = {}) const {
        std::vector<int> comp(adj.size(), -1);
        int next = 0;
        for (size_t s = 0; s < adj.size(); ++s) {
            if (comp[s] >= 0) continue;
            comp[s] = next;
            std::queue<int> q;
            q.push(static_cast<int>(s));
            while (!q.empty()) {
                int u = q.front();
                q.pop();
                for (const Edge& e : adj[u]) {
                    if (removed.count(e.branch)) continue;
                    if (comp[e.other] < 0) {
                        comp[e.other] = next;
                        q.push(e.other);
                    }
                }
            }
            ++next;
        }
        return comp;
    }

    bool reachable(int a, int b, const std::set<int>& removed = {}) const {
        const auto comp = components(removed);
        return comp[a] == comp[b];
    }
};

/// Buses of each island as id lists, islands ordered by their lowest bus id.
inline std::vector<std::vector<Id>> island_bus_ids(const Case& c,
                                                   const std::vector<int>& comp) {
    int n_comp = 0;
    for (int cid : comp) n_comp = std::max(n_comp, cid + 1);
    std::vector<std::vector<Id>> out(n_comp);
    for (size_t i = 0; i < comp.size(); ++i) out[comp[i]].push_back(c.buses[i].id);
    for (auto& ids : out) std::sort(ids.begin(), ids.end(), natural_less);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return natural_less(a.front(), b.front()); });
    return out;
}

}  // namespace gridseg
