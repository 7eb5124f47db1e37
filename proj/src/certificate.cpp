#include "gridprobe/certificate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "gridprobe/errors.hpp"

namespace gridprobe {

namespace {

using LabelMatching = std::vector<std::pair<ColLabel, RowLabel>>;

void check_partition_covers(const IdentifiabilityVerdict& verdict, const BusPartition& partition) {
    std::vector<int> all;
    for (const auto& subset : verdict.partition) all.insert(all.end(), subset.begin(), subset.end());
    std::sort(all.begin(), all.end());
    std::vector<int> expected = partition.non_metered;
    std::sort(expected.begin(), expected.end());
    if (all != expected) throw InternalError("verdict subsets do not partition the non-metered buses");
}

RowLabel coupling_row(const CouplingEquation& eq) {
    return {eq.reactive ? EquationKind::q_couple : EquationKind::p_couple, eq.bus, eq.link};
}

bool touches(const RowLabel& row, int bus, const std::vector<std::vector<int>>& g_pattern) {
    switch (row.kind) {
        case EquationKind::u:
        case EquationKind::theta:
        case EquationKind::theta_ref: return row.bus == bus;
        default: {
            const auto& nb = g_pattern.at(row.bus);
            return std::binary_search(nb.begin(), nb.end(), bus);
        }
    }
}

// Column-to-row matching of diagonal block t expressed in labels (block-local
// columns carry slot t). Empty when the construction breaks down.
std::optional<LabelMatching> block_matching(const BlockAssignment& assignment, const IdentifiabilityVerdict& verdict,
                                            const BusPartition& partition,
                                            const std::vector<std::vector<int>>& g_pattern, int t) {
    const bool phasor = verdict.mode == DataMode::phasor;
    std::set<RowLabel> rows;
    for (int m : partition.metered) {
        rows.insert({EquationKind::u, m, t});
        if (phasor) rows.insert({EquationKind::theta, m, t});
        rows.insert({EquationKind::p_metered, m, t});
        rows.insert({EquationKind::q_metered, m, t});
    }
    std::map<int, std::vector<RowLabel>> coupling_by_bus;
    for (const CouplingEquation& eq : assignment.blocks.at(t - 1)) {
        const RowLabel row = coupling_row(eq);
        rows.insert(row);
        coupling_by_bus[eq.bus].push_back(row);
    }

    LabelMatching matching;
    for (int m : partition.metered) {
        matching.push_back({{Component::vr, m, t}, {EquationKind::u, m, t}});
        matching.push_back({{Component::vi, m, t}, {phasor ? EquationKind::theta : EquationKind::q_metered, m, t}});
    }

    if (assignment.T == 1) {
        if (verdict.matchings.size() != 1) return std::nullopt;
        std::map<int, std::vector<int>> partners;
        for (const MatchedPair& pair : verdict.matchings[0]) partners[pair.o].push_back(pair.m);
        for (int o : partition.non_metered) {
            const auto& ms = partners[o];
            if (phasor) {
                if (ms.size() != 1) return std::nullopt;
                matching.push_back({{Component::vr, o, t}, {EquationKind::p_metered, ms[0], t}});
                matching.push_back({{Component::vi, o, t}, {EquationKind::q_metered, ms[0], t}});
            } else {
                if (ms.size() != 2) return std::nullopt;
                matching.push_back({{Component::vr, o, t}, {EquationKind::p_metered, ms[0], t}});
                matching.push_back({{Component::vi, o, t}, {EquationKind::p_metered, ms[1], t}});
            }
        }
    } else {
        const int k = (t + 1) / 2;
        if (k > static_cast<int>(verdict.matchings.size())) return std::nullopt;
        std::map<int, MatchedPair> matched;
        for (const MatchedPair& pair : verdict.matchings[k - 1]) matched[pair.o] = pair;
        for (int o : partition.non_metered) {
            auto& own = coupling_by_bus[o];
            std::sort(own.begin(), own.end());
            if (own.empty()) return std::nullopt;
            matching.push_back({{Component::vr, o, t}, own[0]});
            auto it = matched.find(o);
            if (it == matched.end()) {
                if (own.size() < 2) return std::nullopt;
                matching.push_back({{Component::vi, o, t}, own[1]});
            } else {
                const MatchedPair& pair = it->second;
                const EquationKind kind = phasor && pair.copy ? EquationKind::q_metered : EquationKind::p_metered;
                if (!phasor && pair.copy) return std::nullopt;
                matching.push_back({{Component::vi, o, t}, {kind, pair.m, t}});
            }
        }
    }

    std::set<RowLabel> used;
    for (const auto& [col, row] : matching) {
        if (!rows.count(row)) return std::nullopt;
        if (!touches(row, col.bus, g_pattern)) return std::nullopt;
        if (!used.insert(row).second) return std::nullopt;
    }
    return matching;
}

}  // namespace

BlockAssignment assign_coupling_equations(const IdentifiabilityVerdict& verdict, const BusPartition& partition) {
    if (!verdict.success) throw std::invalid_argument("assign_coupling_equations needs a successful verdict");
    check_partition_covers(verdict, partition);

    BlockAssignment out;
    out.T = verdict.T;
    out.carried.push_back({});
    if (verdict.T == 1) {
        out.blocks.assign(1, {});
        return out;
    }
    const int T = verdict.T;
    if (T % 2 != 0) throw std::invalid_argument("assign_coupling_equations needs even T");
    const int pairs = T / 2;
    if (static_cast<int>(verdict.partition.size()) != pairs)
        throw InternalError("verdict has " + std::to_string(verdict.partition.size()) + " subsets, expected T/2");

    out.blocks.assign(T, {});
    // remaining[link] holds the not yet assigned equations coupling link and link+1.
    std::vector<std::set<CouplingEquation>> remaining(T);
    for (int link = 1; link < T; ++link)
        for (int o : partition.non_metered)
            for (bool reactive : {false, true}) remaining[link].insert({o, reactive, link});

    auto take = [&](int link, int bus, bool reactive, int block) {
        auto it = remaining[link].find({bus, reactive, link});
        if (it == remaining[link].end()) throw InternalError("coupling equation already assigned; partition invalid");
        out.blocks[block - 1].push_back(*it);
        remaining[link].erase(it);
    };
    auto take_rest = [&](int link, int block) {
        for (const CouplingEquation& eq : remaining[link]) out.blocks[block - 1].push_back(eq);
        remaining[link].clear();
    };

    std::vector<int> carried;  // union of the subsets handled so far
    for (int k = 1; k <= pairs; ++k) {
        const int odd = 2 * k - 1;
        const int even = 2 * k;
        std::vector<int> subset = verdict.partition[k - 1];
        std::sort(subset.begin(), subset.end());
        std::vector<int> fresh;  // O_k minus carried: O without the subset and without earlier subsets
        for (int o : partition.non_metered)
            if (!std::binary_search(subset.begin(), subset.end(), o) &&
                !std::binary_search(carried.begin(), carried.end(), o))
                fresh.push_back(o);

        if (k > 1) take_rest(odd - 1, odd);
        for (int o : fresh) {
            take(odd, o, false, odd);
            take(odd, o, true, odd);
        }
        for (int o : subset) take(odd, o, false, odd);
        take_rest(odd, even);
        if (even < T) {
            for (int o : fresh) {
                take(even, o, false, even);
                take(even, o, true, even);
            }
        }
        carried.insert(carried.end(), subset.begin(), subset.end());
        std::sort(carried.begin(), carried.end());
        out.carried.push_back(carried);
    }
    for (int link = 1; link < T; ++link)
        if (!remaining[link].empty()) throw InternalError("coupling equations left unassigned");
    for (auto& block : out.blocks) std::sort(block.begin(), block.end());
    return out;
}

std::vector<bool> block_matching_check(const BlockAssignment& assignment, const IdentifiabilityVerdict& verdict,
                                       const BusPartition& partition, const std::vector<std::vector<int>>& g_pattern) {
    std::vector<bool> ok(assignment.blocks.size(), false);
    if (!verdict.success) return ok;
    for (int t = 1; t <= static_cast<int>(assignment.blocks.size()); ++t)
        ok[t - 1] = block_matching(assignment, verdict, partition, g_pattern, t).has_value();
    return ok;
}

std::optional<std::vector<int>> certificate_matching(const BlockAssignment& assignment,
                                                     const IdentifiabilityVerdict& verdict,
                                                     const BusPartition& partition,
                                                     const std::vector<std::vector<int>>& g_pattern) {
    if (!verdict.success) return std::nullopt;
    const SparsityPattern pattern = probing_jacobian_pattern(partition, g_pattern, assignment.T, verdict.mode);
    std::map<RowLabel, int> row_index;
    std::map<ColLabel, int> col_index;
    for (int r = 0; r < pattern.rows(); ++r) row_index[pattern.row_labels()[r]] = r;
    for (int c = 0; c < pattern.cols(); ++c) col_index[pattern.col_labels()[c]] = c;

    std::vector<int> match(pattern.cols(), -1);
    std::vector<bool> row_used(pattern.rows(), false);
    for (int t = 1; t <= assignment.T; ++t) {
        const auto block = block_matching(assignment, verdict, partition, g_pattern, t);
        if (!block) return std::nullopt;
        for (const auto& [col, row] : *block) {
            const auto ci = col_index.find(col);
            const auto ri = row_index.find(row);
            if (ci == col_index.end() || ri == row_index.end()) return std::nullopt;
            if (match[ci->second] != -1 || row_used[ri->second]) return std::nullopt;
            if (!pattern.contains(ri->second, ci->second)) return std::nullopt;
            match[ci->second] = ri->second;
            row_used[ri->second] = true;
        }
    }
    if (std::find(match.begin(), match.end(), -1) != match.end()) return std::nullopt;
    return match;
}

}  // namespace gridprobe
