#include "gridprobe/pattern.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>

#include "gridprobe/errors.hpp"
#include "gridprobe/flow.hpp"

namespace gridprobe {

std::string to_string(EquationKind kind) {
    switch (kind) {
        case EquationKind::u: return "u";
        case EquationKind::theta: return "theta";
        case EquationKind::p_metered: return "p_M";
        case EquationKind::q_metered: return "q_M";
        case EquationKind::p_couple: return "p_couple";
        case EquationKind::q_couple: return "q_couple";
        case EquationKind::theta_ref: return "theta_ref";
    }
    return "?";
}

std::string to_string(Component component) { return component == Component::vr ? "v_r" : "v_i"; }

namespace {

EquationKind parse_kind(const std::string& s) {
    for (EquationKind k : {EquationKind::u, EquationKind::theta, EquationKind::p_metered, EquationKind::q_metered,
                           EquationKind::p_couple, EquationKind::q_couple, EquationKind::theta_ref})
        if (to_string(k) == s) return k;
    throw ParseError("unknown equation kind '" + s + "'");
}

Component parse_component(const std::string& s) {
    if (s == "v_r") return Component::vr;
    if (s == "v_i") return Component::vi;
    throw ParseError("unknown variable component '" + s + "'");
}

// Column index of (component, bus, slot) in the slot-major layout.
int column_index(int bus_count, Component c, int bus, int slot) {
    return (slot - 1) * 2 * bus_count + (c == Component::vi ? bus_count : 0) + bus;
}

SparsityPattern build_layout(const BusPartition& partition, const std::vector<std::vector<int>>& g_pattern, int T,
                             DataMode mode, bool angle_reference) {
    if (T < 1) throw std::invalid_argument("probing pattern needs T >= 1");
    const int n = static_cast<int>(g_pattern.size());
    SparsityPattern pattern;
    for (int t = 1; t <= T; ++t) {
        for (Component c : {Component::vr, Component::vi})
            for (int bus = 0; bus < n; ++bus) pattern.add_col({c, bus, t});
    }

    auto add_diag_row = [&](RowLabel label) {
        const int row = pattern.add_row(label);
        for (Component c : {Component::vr, Component::vi})
            pattern.add_nonzero(row, column_index(n, c, label.bus, label.slot));
    };
    auto add_g_row = [&](RowLabel label, std::initializer_list<int> slots) {
        const int row = pattern.add_row(label);
        for (int slot : slots)
            for (Component c : {Component::vr, Component::vi})
                for (int m : g_pattern.at(label.bus)) pattern.add_nonzero(row, column_index(n, c, m, slot));
    };

    for (int t = 1; t <= T; ++t) {
        for (int m : partition.metered) add_diag_row({EquationKind::u, m, t});
        if (mode == DataMode::phasor)
            for (int m : partition.metered) add_diag_row({EquationKind::theta, m, t});
        for (int m : partition.metered) add_g_row({EquationKind::p_metered, m, t}, {t});
        for (int m : partition.metered) add_g_row({EquationKind::q_metered, m, t}, {t});
        if (angle_reference && mode == DataMode::non_phasor) add_diag_row({EquationKind::theta_ref, 0, t});
        if (t < T) {
            for (int o : partition.non_metered) add_g_row({EquationKind::p_couple, o, t}, {t, t + 1});
            for (int o : partition.non_metered) add_g_row({EquationKind::q_couple, o, t}, {t, t + 1});
        }
    }
    pattern.finalize();
    return pattern;
}

}  // namespace

int SparsityPattern::add_row(RowLabel label) {
    row_labels_.push_back(label);
    return rows() - 1;
}

int SparsityPattern::add_col(ColLabel label) {
    col_labels_.push_back(label);
    return cols() - 1;
}

void SparsityPattern::add_nonzero(int row, int col) {
    if (row < 0 || row >= rows() || col < 0 || col >= cols()) throw std::out_of_range("pattern entry out of bounds");
    if (!nonzeros_.empty() && nonzeros_.back() >= std::make_pair(row, col)) sorted_ = false;
    nonzeros_.emplace_back(row, col);
}

void SparsityPattern::finalize() {
    std::sort(nonzeros_.begin(), nonzeros_.end());
    nonzeros_.erase(std::unique(nonzeros_.begin(), nonzeros_.end()), nonzeros_.end());
    sorted_ = true;
    auto rows_sorted = row_labels_;
    std::sort(rows_sorted.begin(), rows_sorted.end());
    if (std::adjacent_find(rows_sorted.begin(), rows_sorted.end()) != rows_sorted.end())
        throw ValidationError("duplicate row label in sparsity pattern");
    auto cols_sorted = col_labels_;
    std::sort(cols_sorted.begin(), cols_sorted.end());
    if (std::adjacent_find(cols_sorted.begin(), cols_sorted.end()) != cols_sorted.end())
        throw ValidationError("duplicate column label in sparsity pattern");
}

bool SparsityPattern::contains(int row, int col) const {
    if (!sorted_) throw std::logic_error("SparsityPattern::contains before finalize()");
    return std::binary_search(nonzeros_.begin(), nonzeros_.end(), std::make_pair(row, col));
}

std::vector<std::vector<int>> SparsityPattern::column_adjacency() const {
    std::vector<std::vector<int>> adj(cols());
    for (const auto& [r, c] : nonzeros_) adj[c].push_back(r);
    return adj;
}

SparsityPattern probing_jacobian_pattern(const BusPartition& partition, const std::vector<std::vector<int>>& g_pattern,
                                         int T, DataMode mode) {
    return build_layout(partition, g_pattern, T, mode, false);
}

int structural_rank(const SparsityPattern& pattern) {
    const auto match = maximum_bipartite_matching(pattern.rows(), pattern.column_adjacency());
    return static_cast<int>(std::count_if(match.begin(), match.end(), [](int r) { return r >= 0; }));
}

std::pair<int, double> numeric_rank(const Eigen::MatrixXd& matrix) {
    if (matrix.size() == 0) return {0, 0.0};
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
    if (sigma_max == 0.0) return {0, 0.0};
    const double threshold = 1e-10 * sigma_max;
    int rank = 0;
    for (Eigen::Index k = 0; k < sigma.size(); ++k)
        if (sigma[k] > threshold) ++rank;
    return {rank, sigma[sigma.size() - 1] / sigma_max};
}

RankReport generic_rank(const SparsityPattern& pattern, int trials, std::mt19937_64& rng) {
    if (trials < 1) throw std::invalid_argument("generic_rank needs at least one trial");
    RankReport report;
    report.required_rank = pattern.cols();
    report.structural_rank = structural_rank(pattern);
    report.structural_full_rank = report.structural_rank == pattern.cols();

    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    auto draw = [&] {
        double x;
        do {
            x = uniform(rng);
        } while (std::abs(x) < 1e-3);
        return x;
    };
    report.numeric_rank = -1;
    for (int trial = 0; trial < trials; ++trial) {
        Eigen::MatrixXd fill = Eigen::MatrixXd::Zero(pattern.rows(), pattern.cols());
        for (const auto& [r, c] : pattern.nonzeros()) fill(r, c) = draw();
        const auto [rank, ratio] = numeric_rank(fill);
        if (rank > report.numeric_rank || (rank == report.numeric_rank && ratio > report.smallest_singular_ratio)) {
            report.numeric_rank = rank;
            report.smallest_singular_ratio = ratio;
        }
    }
    return report;
}

ProbingJacobian assemble_probing_jacobian(const AdmittanceMatrix& Y, const BusPartition& partition,
                                          std::span<const StateVector> states, DataMode mode,
                                          bool angle_reference) {
    const int T = static_cast<int>(states.size());
    const int n = Y.size();
    ProbingJacobian out{build_layout(partition, Y.pattern(), T, mode, angle_reference), {}};
    out.values = Eigen::MatrixXd::Zero(out.pattern.rows(), out.pattern.cols());

    std::vector<JacobianSet> J;
    J.reserve(T);
    for (const StateVector& s : states) J.push_back(jacobians(s, Y));

    auto copy_row = [&](int row, const JacobianSet::Sparse& block, int bus, int slot, double sign) {
        for (JacobianSet::Sparse::InnerIterator it(block, bus); it; ++it)
            out.values(row, (slot - 1) * 2 * n + it.col()) += sign * it.value();
    };
    const auto& labels = out.pattern.row_labels();
    for (int row = 0; row < static_cast<int>(labels.size()); ++row) {
        const RowLabel& l = labels[row];
        const JacobianSet& Jt = J[l.slot - 1];
        switch (l.kind) {
            case EquationKind::u: copy_row(row, Jt.u, l.bus, l.slot, 1.0); break;
            case EquationKind::theta:
            case EquationKind::theta_ref: copy_row(row, Jt.theta, l.bus, l.slot, 1.0); break;
            case EquationKind::p_metered: copy_row(row, Jt.p, l.bus, l.slot, 1.0); break;
            case EquationKind::q_metered: copy_row(row, Jt.q, l.bus, l.slot, 1.0); break;
            case EquationKind::p_couple:
                copy_row(row, Jt.p, l.bus, l.slot, 1.0);
                copy_row(row, J[l.slot].p, l.bus, l.slot + 1, -1.0);
                break;
            case EquationKind::q_couple:
                copy_row(row, Jt.q, l.bus, l.slot, 1.0);
                copy_row(row, J[l.slot].q, l.bus, l.slot + 1, -1.0);
                break;
        }
    }
    return out;
}

RankReport numeric_rank_at_state(const AdmittanceMatrix& Y, const BusPartition& partition,
                                 std::span<const StateVector> states, DataMode mode) {
    if (states.empty()) throw std::invalid_argument("numeric_rank_at_state needs at least one state");
    const ProbingJacobian jac = assemble_probing_jacobian(Y, partition, states, mode, true);
    RankReport report;
    report.required_rank = jac.pattern.cols();
    report.structural_rank = structural_rank(jac.pattern);
    report.structural_full_rank = report.structural_rank == jac.pattern.cols();
    std::tie(report.numeric_rank, report.smallest_singular_ratio) = numeric_rank(jac.values);
    return report;
}

void write_matrix_market(std::ostream& out, const SparsityPattern& pattern) {
    out << "%%MatrixMarket matrix coordinate pattern general\n";
    for (int r = 0; r < pattern.rows(); ++r) {
        const RowLabel& l = pattern.row_labels()[r];
        out << "% row " << r + 1 << ' ' << to_string(l.kind) << ' ' << l.bus << ' ' << l.slot << '\n';
    }
    for (int c = 0; c < pattern.cols(); ++c) {
        const ColLabel& l = pattern.col_labels()[c];
        out << "% col " << c + 1 << ' ' << to_string(l.component) << ' ' << l.bus << ' ' << l.slot << '\n';
    }
    out << pattern.rows() << ' ' << pattern.cols() << ' ' << pattern.nonzeros().size() << '\n';
    for (const auto& [r, c] : pattern.nonzeros()) out << r + 1 << ' ' << c + 1 << '\n';
}

SparsityPattern read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw ParseError("missing %%MatrixMarket banner");
    if (line.find("coordinate") == std::string::npos) throw ParseError("only coordinate format is supported");

    std::map<int, RowLabel> row_labels;
    std::map<int, ColLabel> col_labels;
    int rows = -1, cols = -1;
    long long entries = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '%') {
            std::istringstream ls(line.substr(1));
            std::string tag, name;
            int index = 0, bus = 0, slot = 0;
            if (!(ls >> tag)) continue;
            if (tag != "row" && tag != "col") continue;
            if (!(ls >> index >> name >> bus >> slot)) throw ParseError("malformed label line: " + line);
            if (tag == "row") row_labels[index] = {parse_kind(name), bus, slot};
            else col_labels[index] = {parse_component(name), bus, slot};
            continue;
        }
        std::istringstream ls(line);
        if (!(ls >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0)
            throw ParseError("malformed size line: " + line);
        break;
    }
    if (rows < 0) throw ParseError("missing size line");

    SparsityPattern pattern;
    // Unlabelled files get synthetic labels so that they stay unique.
    for (int r = 1; r <= rows; ++r) {
        auto it = row_labels.find(r);
        pattern.add_row(it != row_labels.end() ? it->second : RowLabel{EquationKind::u, r - 1, 0});
    }
    for (int c = 1; c <= cols; ++c) {
        auto it = col_labels.find(c);
        pattern.add_col(it != col_labels.end() ? it->second : ColLabel{Component::vr, c - 1, 0});
    }
    for (long long k = 0; k < entries; ++k) {
        int r = 0, c = 0;
        if (!(in >> r >> c)) throw ParseError("expected " + std::to_string(entries) + " entries");
        std::string rest;
        std::getline(in, rest);  // tolerate a value column
        if (r < 1 || r > rows || c < 1 || c > cols) throw ParseError("entry out of bounds");
        pattern.add_nonzero(r - 1, c - 1);
    }
    pattern.finalize();
    return pattern;
}

}  // namespace gridprobe
