#include "gridprobe/identifiability.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "gridprobe/errors.hpp"

namespace gridprobe {

std::string to_string(DataMode mode) { return mode == DataMode::phasor ? "phasor" : "non-phasor"; }

DataMode parse_data_mode(const std::string& text) {
    if (text == "phasor") return DataMode::phasor;
    if (text == "non-phasor" || text == "non_phasor" || text == "nonphasor") return DataMode::non_phasor;
    throw ValidationError("unknown data mode '" + text + "' (expected phasor or non-phasor)");
}

std::vector<std::vector<int>> BipartiteGridGraph::left_adjacency() const {
    std::vector<std::vector<int>> adj(left.size());
    for (const auto& [l, r] : edges) adj[l].push_back(r);
    return adj;
}

BipartiteGridGraph build_bipartite_grid_graph(const FeederGraph& feeder, const BusPartition& partition,
                                              DataMode mode) {
    BipartiteGridGraph graph;
    graph.mode = mode;
    graph.left = partition.non_metered;

    std::vector<int> right_index(feeder.bus_count(), -1);
    for (int m : partition.metered) {
        right_index[m] = static_cast<int>(graph.right.size());
        graph.right.push_back({m, false});
    }
    if (mode == DataMode::phasor)
        for (int m : partition.metered) graph.right.push_back({m, true});
    const int copy_offset = partition.M();

    for (int l = 0; l < static_cast<int>(graph.left.size()); ++l) {
        for (int nb : feeder.neighbors(graph.left[l])) {
            if (right_index[nb] < 0) continue;
            graph.edges.emplace_back(l, right_index[nb]);
        }
    }
    if (mode == DataMode::phasor) {
        const std::size_t originals = graph.edges.size();
        for (std::size_t e = 0; e < originals; ++e)
            graph.edges.emplace_back(graph.edges[e].first, graph.edges[e].second + copy_offset);
    }
    return graph;
}

ProbingNetwork build_probing_network(const BipartiteGridGraph& graph, int source_capacity, int sink_capacity) {
    ProbingNetwork net;
    net.source = net.network.add_node();
    net.sink = net.network.add_node();
    for (std::size_t l = 0; l < graph.left.size(); ++l) net.left_node.push_back(net.network.add_node());
    for (std::size_t r = 0; r < graph.right.size(); ++r) net.right_node.push_back(net.network.add_node());
    for (int node : net.left_node) net.source_edges.push_back(net.network.add_edge(net.source, node, source_capacity));
    for (const auto& [l, r] : graph.edges)
        net.middle_edges.push_back(net.network.add_edge(net.left_node[l], net.right_node[r], 1));
    for (int node : net.right_node) net.sink_edges.push_back(net.network.add_edge(node, net.sink, sink_capacity));
    return net;
}

std::pair<std::vector<std::vector<int>>, std::vector<std::vector<MatchedPair>>> extract_partition(
    const BipartiteGridGraph& graph, const ProbingNetwork& net, const MaxFlowResult& flow, int T) {
    const int classes = T / 2;
    if (T < 2 || T % 2 != 0) throw std::invalid_argument("extract_partition needs even T >= 2");

    std::vector<int> assigned(graph.left.size(), -1);
    std::vector<std::vector<int>> incoming(graph.right.size());
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        const int f = flow.edge_flow.at(net.middle_edges[e]);
        if (f == 0) continue;
        const auto [l, r] = graph.edges[e];
        if (f != 1 || assigned[l] != -1) throw InternalError("flow sends more than one unit out of a non-metered bus");
        assigned[l] = r;
        incoming[r].push_back(l);
    }
    for (std::size_t l = 0; l < assigned.size(); ++l)
        if (assigned[l] == -1) throw InternalError("flow leaves non-metered bus " + std::to_string(graph.left[l]) + " unassigned");
    for (const auto& in : incoming)
        if (static_cast<int>(in.size()) > classes) throw InternalError("flow exceeds right-side capacity T/2");

    // Left degree is 1, so a proper edge colouring only needs distinct colours
    // per right node. Handing each right node the least-loaded colours keeps
    // the colour classes within one of each other in size.
    std::vector<int> order(graph.right.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return incoming[a].size() > incoming[b].size(); });

    std::vector<int> load(classes, 0);
    std::vector<int> color(graph.left.size(), -1);
    for (int r : order) {
        std::vector<int> by_load(classes);
        std::iota(by_load.begin(), by_load.end(), 0);
        std::stable_sort(by_load.begin(), by_load.end(), [&](int a, int b) { return load[a] < load[b]; });
        for (std::size_t i = 0; i < incoming[r].size(); ++i) {
            color[incoming[r][i]] = by_load[i];
            ++load[by_load[i]];
        }
    }

    std::vector<std::vector<int>> partition(classes);
    std::vector<std::vector<MatchedPair>> matchings(classes);
    for (std::size_t l = 0; l < graph.left.size(); ++l) {
        const RightNode& rn = graph.right[assigned[l]];
        partition[color[l]].push_back(graph.left[l]);
        matchings[color[l]].push_back({graph.left[l], rn.bus, rn.copy});
    }
    return {std::move(partition), std::move(matchings)};
}

int max_metered_degree(const FeederGraph& feeder, const BusPartition& partition) {
    std::vector<bool> metered(feeder.bus_count(), false);
    for (int m : partition.metered) metered[m] = true;
    int delta = 0;
    for (int m : partition.metered) {
        int o_neighbors = 0;
        for (int nb : feeder.neighbors(m))
            if (!metered[nb]) ++o_neighbors;
        delta = std::max(delta, o_neighbors + 1);
    }
    return delta;
}

int t_max(const FeederGraph& feeder, const BusPartition& partition, DataMode mode) {
    const int delta = max_metered_degree(feeder, partition);
    const int bound = mode == DataMode::phasor ? delta - 1 : 2 * (delta - 1);
    return std::max(bound, 2);
}

int search_bound(const FeederGraph& feeder, const BusPartition& partition, DataMode mode) {
    const int bound = t_max(feeder, partition, mode);
    return bound + (bound % 2);
}

std::pair<int, bool> normalize_slot_count(int T) {
    if (T < 1) throw std::invalid_argument("slot count must be positive");
    if (T % 2 == 0) return {T, false};
    return {T + 1, true};
}

IdentifiabilityVerdict test_for_T(const FeederGraph& feeder, const BusPartition& partition, DataMode mode, int T) {
    if (T < 2 || T % 2 != 0) throw std::invalid_argument("test_for_T needs even T >= 2");
    const BipartiteGridGraph graph = build_bipartite_grid_graph(feeder, partition, mode);
    const ProbingNetwork net = build_probing_network(graph, 1, T / 2);
    const MaxFlowResult flow = max_flow(net.network, net.source, net.sink);

    IdentifiabilityVerdict verdict;
    verdict.mode = mode;
    verdict.T = T;
    verdict.flow = flow.value;
    verdict.t_max = t_max(feeder, partition, mode);
    verdict.success = flow.value == partition.O();
    if (verdict.success) std::tie(verdict.partition, verdict.matchings) = extract_partition(graph, net, flow, T);
    return verdict;
}

IdentifiabilityVerdict search_min_T(const FeederGraph& feeder, const BusPartition& partition, DataMode mode) {
    const int bound = search_bound(feeder, partition, mode);
    IdentifiabilityVerdict verdict;
    for (int T = 2; T <= bound; T += 2) {
        verdict = test_for_T(feeder, partition, mode, T);
        if (verdict.success) break;
    }
    return verdict;
}

IdentifiabilityVerdict test_single_slot(const FeederGraph& feeder, const BusPartition& partition, DataMode mode) {
    // Matching into M only; phasor needs one partner per O bus, non-phasor two.
    const BipartiteGridGraph graph = build_bipartite_grid_graph(feeder, partition, DataMode::non_phasor);
    const int partners = mode == DataMode::phasor ? 1 : 2;
    const ProbingNetwork net = build_probing_network(graph, partners, 1);
    const MaxFlowResult flow = max_flow(net.network, net.source, net.sink);

    IdentifiabilityVerdict verdict;
    verdict.mode = mode;
    verdict.T = 1;
    verdict.flow = flow.value;
    verdict.t_max = t_max(feeder, partition, mode);
    verdict.success = flow.value == partners * partition.O();
    if (verdict.success) {
        verdict.partition = {partition.non_metered};
        std::vector<MatchedPair> pairs;
        for (std::size_t e = 0; e < graph.edges.size(); ++e) {
            if (flow.edge_flow[net.middle_edges[e]] == 0) continue;
            const auto [l, r] = graph.edges[e];
            pairs.push_back({graph.left[l], graph.right[r].bus, false});
        }
        std::sort(pairs.begin(), pairs.end(),
                  [](const MatchedPair& a, const MatchedPair& b) { return std::tie(a.o, a.m) < std::tie(b.o, b.m); });
        verdict.matchings = {std::move(pairs)};
    }
    return verdict;
}

}  // namespace gridprobe
