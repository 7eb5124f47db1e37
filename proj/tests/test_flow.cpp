#include <doctest.h>

#include "gridprobe/flow.hpp"
#include "support.hpp"

using namespace gridprobe;

TEST_SUITE("flow") {

TEST_CASE("single path") {
    FlowNetwork net(4);
    net.add_edge(0, 1, 1);
    net.add_edge(1, 2, 1);
    net.add_edge(2, 3, 1);
    const MaxFlowResult r = max_flow(net, 0, 3);
    CHECK(r.value == 1);
    CHECK(r.edge_flow == std::vector<int>{1, 1, 1});
}

TEST_CASE("shared right node is a bottleneck") {
    // source 0, O nodes 1 and 2, M node 3, sink 4
    FlowNetwork net(5);
    net.add_edge(0, 1, 1);
    net.add_edge(0, 2, 1);
    net.add_edge(1, 3, 1);
    net.add_edge(2, 3, 1);
    net.add_edge(3, 4, 1);
    CHECK(max_flow(net, 0, 4).value == 1);
}

TEST_CASE("random three-layer networks match minimum cut enumeration") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> count(1, 5), cap(1, 3);
    std::bernoulli_distribution edge(0.4);
    for (int trial = 0; trial < 50; ++trial) {
        const int left = count(rng), right = count(rng);
        FlowNetwork net(2 + left + right);
        const int source = 0, sink = 1 + left + right;
        for (int l = 0; l < left; ++l) net.add_edge(source, 1 + l, cap(rng));
        for (int l = 0; l < left; ++l)
            for (int r = 0; r < right; ++r)
                if (edge(rng)) net.add_edge(1 + l, 1 + left + r, 1);
        for (int r = 0; r < right; ++r) net.add_edge(1 + left + r, sink, cap(rng));

        const MaxFlowResult result = max_flow(net, source, sink);
        CHECK(result.value == testsupport::min_cut_by_enumeration(net, source, sink));

        // Conservation and capacity.
        std::vector<int> balance(net.node_count(), 0);
        for (std::size_t e = 0; e < net.edges().size(); ++e) {
            const auto& ed = net.edges()[e];
            CHECK(result.edge_flow[e] >= 0);
            CHECK(result.edge_flow[e] <= ed.capacity);
            balance[ed.from] -= result.edge_flow[e];
            balance[ed.to] += result.edge_flow[e];
        }
        for (int v = 0; v < net.node_count(); ++v)
            if (v != source && v != sink) CHECK(balance[v] == 0);
        CHECK(balance[sink] == result.value);
    }
}

TEST_CASE("Hopcroft-Karp matches exhaustive matching") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> count(1, 7);
    std::bernoulli_distribution edge(0.3);
    for (int trial = 0; trial < 200; ++trial) {
        const int left = count(rng), right = count(rng);
        std::vector<std::vector<int>> adj(left);
        for (int l = 0; l < left; ++l)
            for (int r = 0; r < right; ++r)
                if (edge(rng)) adj[l].push_back(r);
        const std::vector<int> match = maximum_bipartite_matching(right, adj);
        int size = 0;
        std::vector<bool> used(right, false);
        for (int l = 0; l < left; ++l) {
            if (match[l] < 0) continue;
            ++size;
            CHECK(std::find(adj[l].begin(), adj[l].end(), match[l]) != adj[l].end());
            CHECK(!used[match[l]]);
            used[match[l]] = true;
        }
        CHECK(size == testsupport::brute_force_matching(right, adj));
    }
}

}  // TEST_SUITE
