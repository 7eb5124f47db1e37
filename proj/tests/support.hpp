#pragma once

// Generators and independent oracles shared by the unit and acceptance tests.
// Oracles deliberately avoid the library's own algorithms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "gridprobe/feeder.hpp"
#include "gridprobe/flow.hpp"
#include "gridprobe/identifiability.hpp"
#include "gridprobe/powerflow.hpp"

namespace testsupport {

using gridprobe::BusPartition;
using gridprobe::Complex;
using gridprobe::DataMode;
using gridprobe::FeederGraph;

inline FeederGraph make_feeder(int bus_count, const std::vector<std::pair<int, int>>& edges,
                               Complex series = {1.0, -2.0}) {
    std::vector<gridprobe::Bus> buses(bus_count);
    for (int i = 0; i < bus_count; ++i) buses[i] = {i, i == 0, {}, {}};
    std::vector<gridprobe::Line> lines;
    for (auto [a, b] : edges) lines.push_back({a, b, series, {}, {}});
    return FeederGraph(std::move(buses), std::move(lines));
}

/// 0-1-...-(n-1)
inline FeederGraph make_chain(int bus_count, Complex series = {1.0, -2.0}) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i < bus_count; ++i) edges.push_back({i - 1, i});
    return make_feeder(bus_count, edges, series);
}

inline BusPartition make_partition(int bus_count, std::vector<int> metered) {
    std::sort(metered.begin(), metered.end());
    BusPartition p;
    p.metered = metered;
    for (int i = 0; i < bus_count; ++i)
        if (!std::binary_search(metered.begin(), metered.end(), i)) p.non_metered.push_back(i);
    return p;
}

/// Random connected feeder: bus i attaches to a random earlier bus; optionally a
/// few extra chords. Impedances r in [0.01, 0.05], x in [0.02, 0.08].
inline FeederGraph random_feeder(int bus_count, std::mt19937_64& rng, double chord_probability = 0.0) {
    std::uniform_real_distribution<double> r(0.01, 0.05), x(0.02, 0.08), coin(0.0, 1.0);
    std::vector<gridprobe::Bus> buses(bus_count);
    for (int i = 0; i < bus_count; ++i) buses[i] = {i, i == 0, {}, {}};
    std::set<std::pair<int, int>> used;
    std::vector<gridprobe::Line> lines;
    auto add = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        if (a == b || !used.insert({a, b}).second) return;
        lines.push_back({a, b, 1.0 / Complex(r(rng), x(rng)), {}, {}});
    };
    for (int i = 1; i < bus_count; ++i) add(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
    if (bus_count > 2)
        for (int k = 0; k < bus_count; ++k)
            if (coin(rng) < chord_probability) {
                std::uniform_int_distribution<int> pick(0, bus_count - 1);
                add(pick(rng), pick(rng));
            }
    return FeederGraph(std::move(buses), std::move(lines));
}

/// Substation plus each other bus metered with the given probability.
inline BusPartition random_partition(int bus_count, std::mt19937_64& rng, double metered_probability) {
    std::bernoulli_distribution meter(metered_probability);
    std::vector<int> metered{0};
    for (int i = 1; i < bus_count; ++i)
        if (meter(rng)) metered.push_back(i);
    return make_partition(bus_count, metered);
}

/// Dense complex bus admittance assembled straight from the line list.
inline Eigen::MatrixXcd dense_admittance(const FeederGraph& feeder) {
    const int n = feeder.bus_count();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& b : feeder.buses()) Y(b.id, b.id) += b.shunt;
    for (const auto& l : feeder.lines()) {
        Y(l.from, l.from) += l.series + l.shunt_from;
        Y(l.to, l.to) += l.series + l.shunt_to;
        Y(l.from, l.to) -= l.series;
        Y(l.to, l.from) -= l.series;
    }
    return Y;
}

/// s = v .* conj(Y v)
inline Eigen::VectorXcd complex_injections(const Eigen::MatrixXcd& Y, const Eigen::VectorXcd& v) {
    return v.cwiseProduct((Y * v).conjugate());
}

inline Eigen::VectorXcd phasors(const gridprobe::StateVector& s) {
    Eigen::VectorXcd v(s.bus_count());
    for (int n = 0; n < s.bus_count(); ++n) v[n] = {s.vr[n], s.vi[n]};
    return v;
}

/// Backward/forward sweep on a radial feeder without shunts, substation at 1+j0.
/// `load[n]` is the net injection at bus n (negative for consumption).
inline Eigen::VectorXcd sweep_power_flow(const FeederGraph& feeder, const std::vector<Complex>& injection,
                                         int iterations = 200) {
    const int n = feeder.bus_count();
    std::vector<int> parent(n, -1), order{0};
    std::vector<Complex> z(n);
    std::vector<bool> seen(n, false);
    seen[0] = true;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int u = order[k];
        for (const auto& l : feeder.lines()) {
            int w = -1;
            if (l.from == u) w = l.to;
            if (l.to == u) w = l.from;
            if (w < 0 || seen[w]) continue;
            seen[w] = true;
            parent[w] = u;
            z[w] = 1.0 / l.series;
            order.push_back(w);
        }
    }
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n);
    for (int it = 0; it < iterations; ++it) {
        std::vector<Complex> current(n);
        for (int k = n - 1; k >= 1; --k) {
            const int b = order[k];
            current[b] += std::conj(-injection[b] / v[b]);  // load current drawn at b
            current[parent[b]] += current[b];
        }
        for (int k = 1; k < n; ++k) {
            const int b = order[k];
            v[b] = v[parent[b]] - z[b] * current[b];
        }
    }
    return v;
}

/// Max-flow value as the minimum cut over every source-side node subset.
inline int min_cut_by_enumeration(const gridprobe::FlowNetwork& net, int source, int sink) {
    const int n = net.node_count();
    int best = std::numeric_limits<int>::max();
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (!(mask >> source & 1u) || (mask >> sink & 1u)) continue;
        int cut = 0;
        for (const auto& e : net.edges())
            if ((mask >> e.from & 1u) && !(mask >> e.to & 1u)) cut += e.capacity;
        best = std::min(best, cut);
    }
    return best;
}

/// Size of a maximum bipartite matching by exhaustive backtracking.
inline int brute_force_matching(int right_count, const std::vector<std::vector<int>>& adjacency) {
    std::vector<bool> used(right_count, false);
    std::function<int(std::size_t)> go = [&](std::size_t i) -> int {
        if (i == adjacency.size()) return 0;
        int best = go(i + 1);
        for (int r : adjacency[i])
            if (!used[r]) {
                used[r] = true;
                best = std::max(best, 1 + go(i + 1));
                used[r] = false;
            }
        return best;
    };
    return go(0);
}

/// Right-side nodes of the probing graph for one O bus: metered neighbours,
/// plus their copies in phasor mode. Encoded as 2*bus + copy.
inline std::vector<int> right_neighbours(const FeederGraph& feeder, const BusPartition& partition, int o,
                                         DataMode mode) {
    std::vector<int> out;
    for (int m : feeder.neighbors(o))
        if (std::binary_search(partition.metered.begin(), partition.metered.end(), m)) {
            out.push_back(2 * m);
            if (mode == DataMode::phasor) out.push_back(2 * m + 1);
        }
    return out;
}

/// True when the given O buses can be matched to distinct right nodes.
inline bool subset_matchable(const std::vector<std::vector<int>>& options) {
    std::set<int> used;
    std::function<bool(std::size_t)> go = [&](std::size_t i) {
        if (i == options.size()) return true;
        for (int r : options[i])
            if (!used.count(r)) {
                used.insert(r);
                if (go(i + 1)) return true;
                used.erase(r);
            }
        return false;
    };
    return go(0);
}

/// Exhaustive multi-slot test: does some partition of O into T/2 (possibly
/// empty) subsets admit a matching of every subset into M (plus M' in phasor)?
inline bool brute_force_identifiable(const FeederGraph& feeder, const BusPartition& partition, DataMode mode, int T) {
    const int subsets = T / 2;
    const auto& O = partition.non_metered;
    std::vector<std::vector<int>> options;
    for (int o : O) options.push_back(right_neighbours(feeder, partition, o, mode));
    for (const auto& opt : options)
        if (opt.empty()) return false;
    std::vector<int> label(O.size(), 0);
    // Subset labels in restricted-growth form enumerate each set partition once.
    std::function<bool(std::size_t, int)> go = [&](std::size_t i, int used_labels) {
        if (i == O.size()) {
            for (int k = 0; k < used_labels; ++k) {
                std::vector<std::vector<int>> sub;
                for (std::size_t j = 0; j < O.size(); ++j)
                    if (label[j] == k) sub.push_back(options[j]);
                if (!subset_matchable(sub)) return false;
            }
            return true;
        }
        for (int k = 0; k < std::min(used_labels + 1, subsets); ++k) {
            label[i] = k;
            if (go(i + 1, std::max(used_labels, k + 1))) return true;
        }
        return false;
    };
    return go(0, 0);
}

/// Exhaustive single-slot test: each O bus gets one (phasor) or two
/// (non-phasor) metered neighbours, all distinct.
inline bool brute_force_single_slot(const FeederGraph& feeder, const BusPartition& partition, DataMode mode) {
    const int need = mode == DataMode::phasor ? 1 : 2;
    std::vector<std::vector<int>> options;
    for (int o : partition.non_metered) {
        std::vector<int> ms;
        for (int m : feeder.neighbors(o))
            if (std::binary_search(partition.metered.begin(), partition.metered.end(), m)) ms.push_back(m);
        for (int k = 0; k < need; ++k) options.push_back(ms);
    }
    return subset_matchable(options);
}

/// Uniform(-1, 1) excluding magnitudes below 1e-3.
inline double nonzero_uniform(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double x;
    do x = u(rng);
    while (std::abs(x) < 1e-3);
    return x;
}

}  // namespace testsupport
