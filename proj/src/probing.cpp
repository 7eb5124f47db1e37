#include "gridprobe/probing.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "gridprobe/errors.hpp"
#include "gridprobe/pattern.hpp"

namespace gridprobe {

InjectionAtVoltage LoadModel::injection(int bus, double magnitude) const {
    const auto it = loads.find(bus);
    if (it == loads.end()) return {};
    if (const auto* c = std::get_if<ConstantLoad>(&it->second)) return {c->p, c->q, 0.0, 0.0};
    const auto& zip = std::get<ZipLoad>(it->second);
    return {-zip.p.consumption(magnitude), -zip.q.consumption(magnitude), -zip.p.derivative(magnitude),
            -zip.q.derivative(magnitude)};
}

bool LoadModel::all_constant() const {
    for (const auto& [bus, load] : loads)
        if (!std::holds_alternative<ConstantLoad>(load)) return false;
    return true;
}

void validate_plan(const ProbingPlan& plan, const BusPartition& partition) {
    if (plan.T < 1) throw ValidationError("probing plan needs T >= 1");
    if (static_cast<int>(plan.setpoints.size()) != plan.T)
        throw ValidationError("probing plan lists " + std::to_string(plan.setpoints.size()) + " slots, expected T = " +
                              std::to_string(plan.T));
    for (const auto& slot : plan.setpoints) {
        for (const auto& [bus, s] : slot) {
            if (!std::isfinite(s.p) || !std::isfinite(s.q)) throw ValidationError("non-finite setpoint");
            if (bus == 0) throw ValidationError("the substation has no setpoint");
            if (!std::binary_search(partition.metered.begin(), partition.metered.end(), bus))
                throw ValidationError("setpoint for non-metered bus " + std::to_string(bus));
        }
        for (int m : partition.metered)
            if (m != 0 && !slot.count(m)) throw ValidationError("missing setpoint for metered bus " + std::to_string(m));
    }
    if (plan.T >= 2) {
        bool distinct = false;
        for (int t = 1; t < plan.T && !distinct; ++t)
            for (const auto& [bus, s] : plan.setpoints[t]) {
                const Injection& first = plan.setpoints[0].at(bus);
                if (s.p != first.p || s.q != first.q) distinct = true;
            }
        if (!distinct) throw ValidationError("probing plan repeats the same setpoints in every slot");
    }
}

ProbingPlan default_probing_plan(const BusPartition& partition, int T, std::mt19937_64& rng, double amplitude,
                                 Injection base) {
    ProbingPlan plan;
    plan.T = T;
    std::uniform_real_distribution<double> perturb(-amplitude, amplitude);
    for (int t = 0; t < T; ++t) {
        std::map<int, Injection> slot;
        for (int m : partition.metered)
            if (m != 0) slot[m] = {base.p + perturb(rng), base.q + perturb(rng)};
        plan.setpoints.push_back(std::move(slot));
    }
    return plan;
}

std::vector<StateVector> simulate_states(const AdmittanceMatrix& Y, const BusPartition& partition,
                                         const LoadModel& loads, const ProbingPlan& plan) {
    validate_plan(plan, partition);
    std::vector<bool> metered(Y.size(), false);
    for (int m : partition.metered) metered[m] = true;
    for (const auto& [bus, load] : loads.loads)
        if (bus <= 0 || bus >= Y.size() || metered[bus])
            throw ValidationError("load given for bus " + std::to_string(bus) + " which is not non-metered");

    std::vector<StateVector> states;
    for (const auto& slot : plan.setpoints) {
        const InjectionModel model = [&](int bus, double magnitude) {
            if (metered[bus]) {
                const Injection& s = slot.at(bus);
                return InjectionAtVoltage{s.p, s.q, 0.0, 0.0};
            }
            return loads.injection(bus, magnitude);
        };
        states.push_back(solve_power_flow(Y, model));
    }
    return states;
}

ProbingDataset record_dataset(const AdmittanceMatrix& Y, const BusPartition& partition,
                              const std::vector<StateVector>& states, DataMode mode) {
    ProbingDataset data;
    data.mode = mode;
    data.T = static_cast<int>(states.size());
    for (const StateVector& state : states) {
        const BusOutputs out = eval_outputs(state, Y);
        std::vector<MeterReading> slot;
        for (int m : partition.metered)
            slot.push_back({m, out.u_sq[m], mode == DataMode::phasor ? out.theta[m] : 0.0, out.p[m], out.q[m]});
        data.slots.push_back(std::move(slot));
    }
    return data;
}

ProbingDataset simulate_probing(const AdmittanceMatrix& Y, const BusPartition& partition, const LoadModel& loads,
                                const ProbingPlan& plan, DataMode mode) {
    return record_dataset(Y, partition, simulate_states(Y, partition, loads, plan), mode);
}

ProbingDataset slice_slot(const ProbingDataset& dataset, int t) {
    if (t < 1 || t > dataset.T) throw std::out_of_range("slot index out of range");
    return {dataset.mode, 1, {dataset.slots[t - 1]}};
}

namespace {

void check_dataset(const ProbingDataset& dataset, const BusPartition& partition, int bus_count) {
    if (dataset.T < 1 || static_cast<int>(dataset.slots.size()) != dataset.T)
        throw ValidationError("dataset slot count does not match T");
    for (const auto& slot : dataset.slots) {
        if (static_cast<int>(slot.size()) != partition.M())
            throw ValidationError("dataset slot does not list every metered bus");
        for (std::size_t i = 0; i < slot.size(); ++i) {
            if (slot[i].bus != partition.metered[i]) throw ValidationError("dataset buses out of partition order");
            if (!(slot[i].u_sq > 0.0)) throw ValidationError("dataset has non-positive u at bus " + std::to_string(slot[i].bus));
        }
    }
    if (partition.metered.empty() || partition.metered[0] != 0 || bus_count < 2)
        throw ValidationError("partition must meter the substation");
}

}  // namespace

RecoveryResult recover_loads(const AdmittanceMatrix& Y, const BusPartition& partition, const ProbingDataset& dataset,
                             const RecoveryOptions& options) {
    const int n = Y.size();
    const int T = dataset.T;
    check_dataset(dataset, partition, n);
    const DataMode mode = dataset.mode;

    std::vector<int> reading_index(n, -1);
    for (int i = 0; i < partition.M(); ++i) reading_index[partition.metered[i]] = i;

    const SparsityPattern layout = probing_jacobian_pattern(partition, Y.pattern(), T, mode);
    const auto& rows = layout.row_labels();

    // Unknowns: v_r and v_i of buses 1..N per slot; the substation is pinned.
    std::vector<int> free_columns;
    for (int t = 0; t < T; ++t)
        for (int part = 0; part < 2; ++part)
            for (int bus = 1; bus < n; ++bus) free_columns.push_back(t * 2 * n + part * n + bus);
    const int unknowns = static_cast<int>(free_columns.size());

    RecoveryResult result;
    result.states.assign(T, StateVector::flat(n));
    // Start from the power flow with metered injections as read and nothing
    // drawn at unmetered buses; fall back to the metered magnitudes.
    for (int t = 0; t < T; ++t) {
        const MeterReading& sub = dataset.slots[t][reading_index[0]];
        const Complex slack =
            std::polar(std::sqrt(sub.u_sq), mode == DataMode::phasor ? sub.theta : 0.0);
        std::vector<Injection> injections(n - 1);
        for (const MeterReading& m : dataset.slots[t])
            if (m.bus > 0) injections[m.bus - 1] = {m.p, m.q};
        try {
            result.states[t] = solve_power_flow(Y, injections, slack);
        } catch (const Error&) {
            result.states[t] = StateVector::flat(n);
            for (const MeterReading& m : dataset.slots[t]) result.states[t].vr[m.bus] = std::sqrt(m.u_sq);
            result.states[t].vr[0] = slack.real();
            result.states[t].vi[0] = slack.imag();
        }
    }

    auto residual = [&](const std::vector<StateVector>& states) {
        std::vector<BusOutputs> out;
        for (const StateVector& s : states) out.push_back(eval_outputs(s, Y));
        Eigen::VectorXd r(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const RowLabel& l = rows[i];
            const BusOutputs& o = out[l.slot - 1];
            switch (l.kind) {
                case EquationKind::u: {
                    r[i] = o.u_sq[l.bus] - dataset.slots[l.slot - 1][reading_index[l.bus]].u_sq;
                    break;
                }
                case EquationKind::theta:
                case EquationKind::theta_ref: {
                    const double measured = dataset.slots[l.slot - 1][reading_index[l.bus]].theta;
                    r[i] = std::remainder(o.theta[l.bus] - measured, 2.0 * std::numbers::pi);
                    break;
                }
                case EquationKind::p_metered:
                    r[i] = o.p[l.bus] - dataset.slots[l.slot - 1][reading_index[l.bus]].p;
                    break;
                case EquationKind::q_metered:
                    r[i] = o.q[l.bus] - dataset.slots[l.slot - 1][reading_index[l.bus]].q;
                    break;
                case EquationKind::p_couple: r[i] = o.p[l.bus] - out[l.slot].p[l.bus]; break;
                case EquationKind::q_couple: r[i] = o.q[l.bus] - out[l.slot].q[l.bus]; break;
            }
        }
        return r;
    };
    auto reduced_jacobian = [&](const std::vector<StateVector>& states) {
        const ProbingJacobian full = assemble_probing_jacobian(Y, partition, states, mode, false);
        Eigen::MatrixXd J(full.values.rows(), unknowns);
        for (int k = 0; k < unknowns; ++k) J.col(k) = full.values.col(free_columns[k]);
        return J;
    };
    auto apply_step = [&](const std::vector<StateVector>& states, const Eigen::VectorXd& step, double scale) {
        std::vector<StateVector> next = states;
        for (int k = 0; k < unknowns; ++k) {
            const int col = free_columns[k];
            const int t = col / (2 * n);
            const int within = col % (2 * n);
            if (within < n) next[t].vr[within] += scale * step[k];
            else next[t].vi[within - n] += scale * step[k];
        }
        return next;
    };

    Eigen::VectorXd r = residual(result.states);
    double norm = r.norm();
    result.residual_history.push_back(norm);
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::MatrixXd J = reduced_jacobian(result.states);
        const Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-r);
        if (norm < options.tolerance && step.norm() < options.tolerance) break;
        double scale = 1.0;
        bool improved = false;
        while (scale > 1e-8) {
            try {
                auto trial = apply_step(result.states, step, scale);
                Eigen::VectorXd trial_r = residual(trial);
                const double trial_norm = trial_r.norm();
                if (std::isfinite(trial_norm) && trial_norm < norm) {
                    result.states = std::move(trial);
                    r = std::move(trial_r);
                    norm = trial_norm;
                    improved = true;
                    break;
                }
            } catch (const ZeroVoltageError&) {
            }
            scale *= 0.5;
        }
        result.residual_history.push_back(norm);
        if (!improved) {
            ++iter;
            break;
        }
    }
    result.iterations = iter;
    result.residual_norm = norm;
    result.converged = norm < options.tolerance;

    const Eigen::MatrixXd J = reduced_jacobian(result.states);
    result.required_rank = unknowns;
    result.jacobian_rank = numeric_rank(J).first;
    result.rank_deficient = result.jacobian_rank < unknowns;

    result.per_slot.resize(T);
    for (int o : partition.non_metered) result.loads.push_back({o, 0.0, 0.0, 0.0});
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd p, q;
        eval_injections(result.states[t], Y, p, q);
        for (std::size_t i = 0; i < partition.non_metered.size(); ++i) {
            const int o = partition.non_metered[i];
            result.per_slot[t].push_back({o, p[o], q[o], std::abs(result.states[t].phasor(o))});
            result.loads[i].p += p[o] / T;
            result.loads[i].q += q[o] / T;
        }
    }
    return result;
}

std::vector<RecoveryResult> recover_loads_per_slot(const AdmittanceMatrix& Y, const BusPartition& partition,
                                                   const ProbingDataset& dataset, const RecoveryOptions& options) {
    std::vector<RecoveryResult> out;
    for (int t = 1; t <= dataset.T; ++t) out.push_back(recover_loads(Y, partition, slice_slot(dataset, t), options));
    return out;
}

}  // namespace gridprobe
