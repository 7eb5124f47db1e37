#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gridprobe/feeder.hpp"
#include "gridprobe/flow.hpp"

namespace gridprobe {

/// Which metered quantities are available: (u, theta, p, q) or (u, p, q).
enum class DataMode { phasor, non_phasor };

std::string to_string(DataMode mode);
DataMode parse_data_mode(const std::string& text);

/// Right-side node of the bipartite grid graph: a metered bus or its copy.
struct RightNode {
    int bus = 0;
    bool copy = false;
};

/// M-O adjacencies of the feeder. Left nodes are the non-metered buses; in
/// phasor mode every metered bus appears twice on the right (original and copy).
struct BipartiteGridGraph {
    DataMode mode = DataMode::phasor;
    std::vector<int> left;                // bus ids of O
    std::vector<RightNode> right;         // M, then M' in phasor mode
    std::vector<std::pair<int, int>> edges;  // (left index, right index)

    /// Right indices adjacent to each left node.
    std::vector<std::vector<int>> left_adjacency() const;
};

BipartiteGridGraph build_bipartite_grid_graph(const FeederGraph& feeder, const BusPartition& partition,
                                              DataMode mode);

/// n_s -> O -> right side -> n_d layered network built from a bipartite grid graph.
struct ProbingNetwork {
    FlowNetwork network;
    int source = 0;
    int sink = 0;
    std::vector<int> left_node;             // network node of each left index
    std::vector<int> right_node;            // network node of each right index
    std::vector<int> source_edges;          // layer 1, per left index
    std::vector<int> middle_edges;          // layer 2, parallel to BipartiteGridGraph::edges
    std::vector<int> sink_edges;            // layer 3, per right index
};

ProbingNetwork build_probing_network(const BipartiteGridGraph& graph, int source_capacity, int sink_capacity);

struct MatchedPair {
    int o = 0;
    int m = 0;
    bool copy = false;

    friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// Outcome of a probing test. A failure means "not certified", not "unidentifiable".
struct IdentifiabilityVerdict {
    bool success = false;
    DataMode mode = DataMode::phasor;
    int T = 0;
    int flow = 0;
    int t_max = 0;
    /// Subsets of O (T/2 of them for multi-slot tests, one for single-slot).
    std::vector<std::vector<int>> partition;
    /// Per subset, the matched pairs. Single-slot non-phasor lists two pairs per bus.
    std::vector<std::vector<MatchedPair>> matchings;
};

/// Splits a successful flow into T/2 matchings, one per subset of O.
/// Subset sizes differ by at most one. Throws InternalError on an invalid flow.
std::pair<std::vector<std::vector<int>>, std::vector<std::vector<MatchedPair>>> extract_partition(
    const BipartiteGridGraph& graph, const ProbingNetwork& net, const MaxFlowResult& flow, int T);

/// Largest degree over M on the flow network (O-neighbours plus the sink edge).
int max_metered_degree(const FeederGraph& feeder, const BusPartition& partition);

/// Slot bound past which a failing setup cannot become successful:
/// delta_M - 1 (phasor) or 2 (delta_M - 1) (non-phasor), never below 2.
int t_max(const FeederGraph& feeder, const BusPartition& partition, DataMode mode);

/// Largest even T that the slot search examines: t_max rounded up to even.
int search_bound(const FeederGraph& feeder, const BusPartition& partition, DataMode mode);

/// Runs the layered max-flow test with right-side capacities T/2. T must be even and >= 2.
IdentifiabilityVerdict test_for_T(const FeederGraph& feeder, const BusPartition& partition, DataMode mode, int T);

/// Tests T = 2, 4, ... up to search_bound() and returns the first success,
/// or the failure verdict of the last T tested.
IdentifiabilityVerdict search_min_T(const FeederGraph& feeder, const BusPartition& partition, DataMode mode);

/// Single-slot (T = 1) test: every O bus matched to one distinct M bus (phasor)
/// or to two distinct M buses (non-phasor).
IdentifiabilityVerdict test_single_slot(const FeederGraph& feeder, const BusPartition& partition, DataMode mode);

/// Rounds an odd slot count up to the next even value; returns {T, rounded}.
std::pair<int, bool> normalize_slot_count(int T);

}  // namespace gridprobe
