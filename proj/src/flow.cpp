#include "gridprobe/flow.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace gridprobe {

int FlowNetwork::add_edge(int from, int to, int capacity) {
    if (from < 0 || from >= node_count_ || to < 0 || to >= node_count_)
        throw std::out_of_range("flow edge endpoint out of range");
    if (capacity < 0) throw std::invalid_argument("negative capacity");
    edges_.push_back({from, to, capacity});
    return static_cast<int>(edges_.size()) - 1;
}

MaxFlowResult max_flow(const FlowNetwork& network, int source, int sink) {
    const int n = network.node_count();
    const auto& edges = network.edges();
    MaxFlowResult result;
    result.edge_flow.assign(edges.size(), 0);
    if (source == sink) return result;

    // Residual arcs: 2e is forward on edge e, 2e+1 its reverse.
    std::vector<std::vector<int>> out(n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        out[edges[e].from].push_back(static_cast<int>(2 * e));
        out[edges[e].to].push_back(static_cast<int>(2 * e + 1));
    }
    auto residual = [&](int arc) {
        const int e = arc / 2;
        return arc % 2 == 0 ? edges[e].capacity - result.edge_flow[e] : result.edge_flow[e];
    };
    auto head = [&](int arc) { return arc % 2 == 0 ? edges[arc / 2].to : edges[arc / 2].from; };

    std::vector<int> parent_arc(n);
    while (true) {
        std::fill(parent_arc.begin(), parent_arc.end(), -1);
        std::queue<int> frontier;
        frontier.push(source);
        parent_arc[source] = -2;
        while (!frontier.empty() && parent_arc[sink] == -1) {
            const int v = frontier.front();
            frontier.pop();
            for (int arc : out[v]) {
                const int w = head(arc);
                if (parent_arc[w] == -1 && residual(arc) > 0) {
                    parent_arc[w] = arc;
                    frontier.push(w);
                }
            }
        }
        if (parent_arc[sink] == -1) break;

        int bottleneck = std::numeric_limits<int>::max();
        for (int v = sink; v != source;) {
            const int arc = parent_arc[v];
            bottleneck = std::min(bottleneck, residual(arc));
            v = arc % 2 == 0 ? edges[arc / 2].from : edges[arc / 2].to;
        }
        for (int v = sink; v != source;) {
            const int arc = parent_arc[v];
            result.edge_flow[arc / 2] += arc % 2 == 0 ? bottleneck : -bottleneck;
            v = arc % 2 == 0 ? edges[arc / 2].from : edges[arc / 2].to;
        }
        result.value += bottleneck;
    }
    return result;
}

std::vector<int> maximum_bipartite_matching(int right_count, const std::vector<std::vector<int>>& adjacency) {
    const int left_count = static_cast<int>(adjacency.size());
    constexpr int kInf = std::numeric_limits<int>::max();
    std::vector<int> match_left(left_count, -1), match_right(right_count, -1), level(left_count);

    auto bfs = [&] {
        std::queue<int> frontier;
        bool found = false;
        for (int l = 0; l < left_count; ++l) {
            if (match_left[l] == -1) {
                level[l] = 0;
                frontier.push(l);
            } else {
                level[l] = kInf;
            }
        }
        while (!frontier.empty()) {
            const int l = frontier.front();
            frontier.pop();
            for (int r : adjacency[l]) {
                const int next = match_right[r];
                if (next == -1) {
                    found = true;
                } else if (level[next] == kInf) {
                    level[next] = level[l] + 1;
                    frontier.push(next);
                }
            }
        }
        return found;
    };

    // Recursion depth is bounded by the matching size, small at our scales.
    auto dfs = [&](auto&& self, int l) -> bool {
        for (int r : adjacency[l]) {
            const int next = match_right[r];
            if (next == -1 || (level[next] == level[l] + 1 && self(self, next))) {
                match_left[l] = r;
                match_right[r] = l;
                return true;
            }
        }
        level[l] = kInf;
        return false;
    };

    while (bfs()) {
        for (int l = 0; l < left_count; ++l)
            if (match_left[l] == -1) dfs(dfs, l);
    }
    return match_left;
}

}  // namespace gridprobe
