#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace gridprobe {

using Complex = std::complex<double>;

struct Bus {
    int id = 0;
    bool is_substation = false;
    Complex shunt{0.0, 0.0};  // per-unit siemens
    std::string name;
};

struct Line {
    int from = 0;
    int to = 0;
    Complex series{0.0, 0.0};  // per-unit siemens
    Complex shunt_from{0.0, 0.0};
    Complex shunt_to{0.0, 0.0};
};

struct PerUnitBase {
    double mva = 1.0;
    double kv = 1.0;
};

/// Validated feeder graph. Buses are indexed 0..N with the substation at 0.
///
/// The constructor enforces every structural invariant and throws
/// ValidationError otherwise; an instance is immutable afterwards.
class FeederGraph {
public:
    FeederGraph(std::vector<Bus> buses, std::vector<Line> lines, PerUnitBase base = {});

    int bus_count() const noexcept { return static_cast<int>(buses_.size()); }
    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Line>& lines() const noexcept { return lines_; }
    const PerUnitBase& base() const noexcept { return base_; }

    /// Sorted neighbour list of bus n (excluding n itself).
    const std::vector<int>& neighbors(int n) const { return adjacency_.at(n); }

    /// Adjacency-plus-diagonal pattern: row n lists n and its neighbours, sorted.
    std::vector<std::vector<int>> structural_pattern() const;

private:
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    PerUnitBase base_;
    std::vector<std::vector<int>> adjacency_;
};

/// Bus admittance matrix Y = G + jB. Both parts share one explicit sparsity
/// pattern (diagonal plus line endpoints); stored entries may be numerically zero.
class AdmittanceMatrix {
public:
    using Sparse = Eigen::SparseMatrix<double>;

    AdmittanceMatrix(Sparse conductance, Sparse susceptance);

    int size() const noexcept { return static_cast<int>(g_.rows()); }
    const Sparse& G() const noexcept { return g_; }
    const Sparse& B() const noexcept { return b_; }
    Complex operator()(int n, int m) const { return {g_.coeff(n, m), b_.coeff(n, m)}; }

    /// Column indices stored in row n (the structural neighbourhood plus n), sorted.
    const std::vector<int>& row_pattern(int n) const { return pattern_.at(n); }
    const std::vector<std::vector<int>>& pattern() const noexcept { return pattern_; }

private:
    Sparse g_;
    Sparse b_;
    std::vector<std::vector<int>> pattern_;
};

/// Metered set M (always containing the substation) and non-metered set O.
struct BusPartition {
    std::vector<int> metered;
    std::vector<int> non_metered;

    int M() const noexcept { return static_cast<int>(metered.size()); }
    int O() const noexcept { return static_cast<int>(non_metered.size()); }
};

/// Reads a feeder JSON file. Parallel lines are merged by admittance addition and
/// impedance-specified lines are converted to admittances before validation.
FeederGraph load_feeder(const std::filesystem::path& path);
FeederGraph parse_feeder(const std::string& json_text);
std::string serialize_feeder(const FeederGraph& feeder);

AdmittanceMatrix build_admittance(const FeederGraph& feeder);

/// Returns the partition with both sets sorted, or throws ValidationError.
BusPartition validate_partition(const FeederGraph& feeder, const BusPartition& partition);
BusPartition load_partition(const std::filesystem::path& path);
BusPartition parse_partition(const std::string& json_text);

}  // namespace gridprobe
