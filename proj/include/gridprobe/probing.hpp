#pragma once

#include <map>
#include <random>
#include <variant>
#include <vector>

#include "gridprobe/feeder.hpp"
#include "gridprobe/identifiability.hpp"
#include "gridprobe/powerflow.hpp"
#include "gridprobe/zip.hpp"

namespace gridprobe {

/// Constant-power net injection (negative for a load).
struct ConstantLoad {
    double p = 0.0;
    double q = 0.0;
};

struct ZipLoad {
    ZipCoefficients p;
    ZipCoefficients q;
};

using BusLoad = std::variant<ConstantLoad, ZipLoad>;

/// Loads at non-metered buses; buses without an entry draw nothing.
struct LoadModel {
    std::map<int, BusLoad> loads;

    InjectionAtVoltage injection(int bus, double magnitude) const;
    bool all_constant() const;
};

/// Per-slot injection setpoints for every metered bus except the substation.
struct ProbingPlan {
    int T = 1;
    std::vector<std::map<int, Injection>> setpoints;
};

/// Throws ValidationError unless the plan covers the metered buses, is finite,
/// and (for T >= 2) contains at least two distinct slots.
void validate_plan(const ProbingPlan& plan, const BusPartition& partition);

/// Setpoints base + uniform(-amplitude, amplitude) per bus and slot.
ProbingPlan default_probing_plan(const BusPartition& partition, int T, std::mt19937_64& rng,
                                 double amplitude = 0.05, Injection base = {});

struct MeterReading {
    int bus = 0;
    double u_sq = 1.0;
    double theta = 0.0;  // ignored in non-phasor datasets
    double p = 0.0;
    double q = 0.0;
};

struct ProbingDataset {
    DataMode mode = DataMode::phasor;
    int T = 0;
    /// slots[t][i] is the reading of metered bus i at slot t+1, in partition order.
    std::vector<std::vector<MeterReading>> slots;
};

/// Solves one power flow per slot; ZIP loads are evaluated self-consistently.
std::vector<StateVector> simulate_states(const AdmittanceMatrix& Y, const BusPartition& partition,
                                         const LoadModel& loads, const ProbingPlan& plan);

/// Noiseless metered data recorded from simulate_states().
ProbingDataset simulate_probing(const AdmittanceMatrix& Y, const BusPartition& partition, const LoadModel& loads,
                                const ProbingPlan& plan, DataMode mode);

ProbingDataset record_dataset(const AdmittanceMatrix& Y, const BusPartition& partition,
                              const std::vector<StateVector>& states, DataMode mode);

/// Slot t (1-based) of a dataset as a single-slot dataset.
ProbingDataset slice_slot(const ProbingDataset& dataset, int t);

struct LoadEstimate {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
    double u = 0.0;  // voltage magnitude (per-slot estimates only)
};

struct RecoveryOptions {
    double tolerance = 1e-10;  // residual 2-norm and step 2-norm
    int max_iterations = 100;
};

struct RecoveryResult {
    std::vector<StateVector> states;
    std::vector<LoadEstimate> loads;                   // averaged over slots
    std::vector<std::vector<LoadEstimate>> per_slot;   // per_slot[t][i]
    double residual_norm = 0.0;
    std::vector<double> residual_history;
    bool converged = false;
    int iterations = 0;
    int jacobian_rank = 0;
    int required_rank = 0;
    bool rank_deficient = false;
};

/// Damped Gauss-Newton on the stacked metering and coupling equations from a
/// flat start, substation voltage held at its metered value. Non-convergence
/// and rank deficiency are reported in the result rather than thrown.
RecoveryResult recover_loads(const AdmittanceMatrix& Y, const BusPartition& partition, const ProbingDataset& dataset,
                             const RecoveryOptions& options = {});

/// Independent single-slot recoveries, one per slot (for non-constant loads).
std::vector<RecoveryResult> recover_loads_per_slot(const AdmittanceMatrix& Y, const BusPartition& partition,
                                                   const ProbingDataset& dataset, const RecoveryOptions& options = {});

}  // namespace gridprobe
