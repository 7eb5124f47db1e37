#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridprobe/feeder.hpp"
#include "gridprobe/identifiability.hpp"
#include "gridprobe/powerflow.hpp"

namespace gridprobe {

enum class EquationKind { u, theta, p_metered, q_metered, p_couple, q_couple, theta_ref };
enum class Component { vr, vi };

std::string to_string(EquationKind kind);
std::string to_string(Component component);

/// Equation row. Slots are 1-based; a coupling row with slot t couples t and t+1.
struct RowLabel {
    EquationKind kind = EquationKind::u;
    int bus = 0;
    int slot = 1;
    friend auto operator<=>(const RowLabel&, const RowLabel&) = default;
};

struct ColLabel {
    Component component = Component::vr;
    int bus = 0;
    int slot = 1;
    friend auto operator<=>(const ColLabel&, const ColLabel&) = default;
};

/// Labelled boolean matrix: which equations touch which state variables.
class SparsityPattern {
public:
    int add_row(RowLabel label);
    int add_col(ColLabel label);
    void add_nonzero(int row, int col);
    /// Sorts and deduplicates the nonzero list; throws on duplicate labels.
    void finalize();

    int rows() const noexcept { return static_cast<int>(row_labels_.size()); }
    int cols() const noexcept { return static_cast<int>(col_labels_.size()); }
    const std::vector<RowLabel>& row_labels() const noexcept { return row_labels_; }
    const std::vector<ColLabel>& col_labels() const noexcept { return col_labels_; }
    const std::vector<std::pair<int, int>>& nonzeros() const noexcept { return nonzeros_; }
    bool contains(int row, int col) const;

    /// Rows touched by each column.
    std::vector<std::vector<int>> column_adjacency() const;

private:
    std::vector<RowLabel> row_labels_;
    std::vector<ColLabel> col_labels_;
    std::vector<std::pair<int, int>> nonzeros_;
    bool sorted_ = true;
};

/// Structure of the interleaved probing Jacobian. Per slot t: metering rows
/// u_M, theta_M (phasor only), p_M, q_M, then coupling rows p_O, q_O linking t
/// to t+1. Columns per slot: v_r then v_i of every bus.
/// `g_pattern[n]` lists bus n and its neighbours.
SparsityPattern probing_jacobian_pattern(const BusPartition& partition, const std::vector<std::vector<int>>& g_pattern,
                                         int T, DataMode mode);

struct RankReport {
    bool structural_full_rank = false;
    int structural_rank = 0;
    int numeric_rank = 0;
    int required_rank = 0;
    double smallest_singular_ratio = 0.0;
};

/// Maximum matching from columns to rows of the pattern.
int structural_rank(const SparsityPattern& pattern);

/// Rank with threshold 1e-10 * sigma_max. Returns {rank, sigma_min / sigma_max}.
std::pair<int, double> numeric_rank(const Eigen::MatrixXd& matrix);

/// Structural rank plus the best numeric rank over `trials` random fills.
RankReport generic_rank(const SparsityPattern& pattern, int trials, std::mt19937_64& rng);

/// Numeric probing Jacobian, rows and columns ordered as in `pattern`.
struct ProbingJacobian {
    SparsityPattern pattern;
    Eigen::MatrixXd values;
};

/// Assembles the Jacobian of the metering and coupling equations at the given
/// per-slot states. With `angle_reference`, each slot gains a theta row for the
/// substation (the fixed 1+j0 reference); phasor mode already has one.
ProbingJacobian assemble_probing_jacobian(const AdmittanceMatrix& Y, const BusPartition& partition,
                                          std::span<const StateVector> states, DataMode mode,
                                          bool angle_reference);

/// Column rank of the assembled Jacobian. Non-phasor assembly includes the
/// substation angle reference; without it every slot has a rotational null vector.
RankReport numeric_rank_at_state(const AdmittanceMatrix& Y, const BusPartition& partition,
                                 std::span<const StateVector> states, DataMode mode);

/// Coordinate text with a label header (`%` comment lines), 1-based indices.
void write_matrix_market(std::ostream& out, const SparsityPattern& pattern);
SparsityPattern read_matrix_market(std::istream& in);

}  // namespace gridprobe
