#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "gridprobe/feeder.hpp"

namespace gridprobe {

/// Rectangular bus voltages, stacked as [v_r; v_i] when flattened.
struct StateVector {
    Eigen::VectorXd vr;
    Eigen::VectorXd vi;

    static StateVector flat(int bus_count);
    static StateVector from_phasors(std::span<const Complex> v);

    int bus_count() const noexcept { return static_cast<int>(vr.size()); }
    Complex phasor(int n) const { return {vr[n], vi[n]}; }
    Eigen::VectorXd stacked() const;
    static StateVector from_stacked(const Eigen::VectorXd& x);
};

/// Substation at 1+j0, other buses with magnitude uniform in [lo, hi] and
/// angle uniform in [-max_angle, max_angle].
StateVector random_state(int bus_count, std::mt19937_64& rng, double lo = 0.9, double hi = 1.1,
                         double max_angle = 0.2);

/// Per-bus outputs: squared magnitude, angle, and net injections.
struct BusOutputs {
    Eigen::VectorXd u_sq;
    Eigen::VectorXd theta;
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

/// Derivatives of each output family with respect to [v_r; v_i].
/// Each matrix is (N+1) x 2(N+1); the stored structure is exactly
/// [I I] for u and theta and [Y Y] (adjacency plus diagonal) for p and q.
struct JacobianSet {
    using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
    Sparse u;
    Sparse theta;
    Sparse p;
    Sparse q;
};

/// Injections and currents without the angle, which has a singularity at v = 0.
void eval_injections(const StateVector& state, const AdmittanceMatrix& Y, Eigen::VectorXd& p,
                     Eigen::VectorXd& q);

/// theta is atan2(v_i, v_r); throws ZeroVoltageError where v = 0.
BusOutputs eval_outputs(const StateVector& state, const AdmittanceMatrix& Y);

JacobianSet jacobians(const StateVector& state, const AdmittanceMatrix& Y);

/// Injection specification at one bus (per-unit, positive = generation).
struct Injection {
    double p = 0.0;
    double q = 0.0;
};

/// Voltage-dependent injection and its derivative with respect to |v|.
struct InjectionAtVoltage {
    double p = 0.0;
    double q = 0.0;
    double dp_du = 0.0;
    double dq_du = 0.0;
};

/// Injection at bus n (1..N) as a function of the bus voltage magnitude.
using InjectionModel = std::function<InjectionAtVoltage(int bus, double magnitude)>;

struct PowerFlowOptions {
    double tolerance = 1e-10;  // max abs mismatch, per-unit
    int max_iterations = 50;
};

/// Newton power flow in rectangular coordinates with the substation as slack.
/// `injections` holds one entry per bus 1..N. Throws ConvergenceError.
StateVector solve_power_flow(const AdmittanceMatrix& Y, std::span<const Injection> injections,
                             Complex slack_voltage = {1.0, 0.0}, const PowerFlowOptions& options = {});

StateVector solve_power_flow(const AdmittanceMatrix& Y, const InjectionModel& model,
                             Complex slack_voltage = {1.0, 0.0}, const PowerFlowOptions& options = {});

}  // namespace gridprobe
