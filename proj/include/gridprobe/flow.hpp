#pragma once

#include <vector>

namespace gridprobe {

/// Directed network with integer capacities.
class FlowNetwork {
public:
    struct Edge {
        int from;
        int to;
        int capacity;
    };

    explicit FlowNetwork(int node_count = 0) : node_count_(node_count) {}

    int add_node() { return node_count_++; }
    /// Returns the edge index.
    int add_edge(int from, int to, int capacity);

    int node_count() const noexcept { return node_count_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

private:
    int node_count_;
    std::vector<Edge> edges_;
};

struct MaxFlowResult {
    int value = 0;
    std::vector<int> edge_flow;  // indexed like FlowNetwork::edges()
};

/// Edmonds-Karp (shortest augmenting paths); integral by construction.
MaxFlowResult max_flow(const FlowNetwork& network, int source, int sink);

/// Hopcroft-Karp. `adjacency[l]` lists right vertices reachable from left vertex l.
/// Returns match[l] = matched right vertex or -1.
std::vector<int> maximum_bipartite_matching(int right_count, const std::vector<std::vector<int>>& adjacency);

}  // namespace gridprobe
