#include "gridprobe/powerflow.hpp"

#include <cmath>

#include "gridprobe/errors.hpp"

namespace gridprobe {

StateVector StateVector::flat(int bus_count) {
    return {Eigen::VectorXd::Ones(bus_count), Eigen::VectorXd::Zero(bus_count)};
}

StateVector random_state(int bus_count, std::mt19937_64& rng, double lo, double hi, double max_angle) {
    std::uniform_real_distribution<double> mag(lo, hi);
    std::uniform_real_distribution<double> ang(-max_angle, max_angle);
    StateVector s = StateVector::flat(bus_count);
    for (int n = 1; n < bus_count; ++n) {
        const Complex v = std::polar(mag(rng), ang(rng));
        s.vr[n] = v.real();
        s.vi[n] = v.imag();
    }
    return s;
}

StateVector StateVector::from_phasors(std::span<const Complex> v) {
    StateVector s{Eigen::VectorXd(v.size()), Eigen::VectorXd(v.size())};
    for (std::size_t n = 0; n < v.size(); ++n) {
        s.vr[n] = v[n].real();
        s.vi[n] = v[n].imag();
    }
    return s;
}

Eigen::VectorXd StateVector::stacked() const {
    Eigen::VectorXd x(2 * vr.size());
    x << vr, vi;
    return x;
}

StateVector StateVector::from_stacked(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size() / 2;
    return {x.head(n), x.tail(n)};
}

namespace {

void check_dimensions(const StateVector& state, const AdmittanceMatrix& Y) {
    if (state.vr.size() != Y.size() || state.vi.size() != Y.size())
        throw std::invalid_argument("state dimension does not match admittance matrix");
}

}  // namespace

void eval_injections(const StateVector& state, const AdmittanceMatrix& Y, Eigen::VectorXd& p,
                     Eigen::VectorXd& q) {
    check_dimensions(state, Y);
    // I = Y v split into real/imaginary parts.
    const Eigen::VectorXd ir = Y.G() * state.vr - Y.B() * state.vi;
    const Eigen::VectorXd ii = Y.B() * state.vr + Y.G() * state.vi;
    p = state.vr.cwiseProduct(ir) + state.vi.cwiseProduct(ii);
    q = state.vi.cwiseProduct(ir) - state.vr.cwiseProduct(ii);
}

BusOutputs eval_outputs(const StateVector& state, const AdmittanceMatrix& Y) {
    BusOutputs out;
    eval_injections(state, Y, out.p, out.q);
    const int n = state.bus_count();
    out.u_sq = state.vr.cwiseAbs2() + state.vi.cwiseAbs2();
    out.theta.resize(n);
    for (int k = 0; k < n; ++k) {
        if (state.vr[k] == 0.0 && state.vi[k] == 0.0) throw ZeroVoltageError(k);
        out.theta[k] = std::atan2(state.vi[k], state.vr[k]);
    }
    return out;
}

JacobianSet jacobians(const StateVector& state, const AdmittanceMatrix& Y) {
    check_dimensions(state, Y);
    const int n = Y.size();
    const Eigen::VectorXd& vr = state.vr;
    const Eigen::VectorXd& vi = state.vi;
    const Eigen::VectorXd ir = Y.G() * vr - Y.B() * vi;
    const Eigen::VectorXd ii = Y.B() * vr + Y.G() * vi;

    using T = Eigen::Triplet<double>;
    std::vector<T> ju, jt, jp, jq;
    ju.reserve(2 * n);
    jt.reserve(2 * n);
    for (int k = 0; k < n; ++k) {
        const double mag2 = vr[k] * vr[k] + vi[k] * vi[k];
        if (mag2 == 0.0) throw ZeroVoltageError(k);
        ju.emplace_back(k, k, 2.0 * vr[k]);
        ju.emplace_back(k, n + k, 2.0 * vi[k]);
        jt.emplace_back(k, k, -vi[k] / mag2);
        jt.emplace_back(k, n + k, vr[k] / mag2);

        for (int m : Y.row_pattern(k)) {
            const double g = Y.G().coeff(k, m);
            const double b = Y.B().coeff(k, m);
            double dp_dvr = vr[k] * g + vi[k] * b;
            double dp_dvi = -vr[k] * b + vi[k] * g;
            double dq_dvr = vi[k] * g - vr[k] * b;
            double dq_dvi = -vi[k] * b - vr[k] * g;
            if (m == k) {
                dp_dvr += ir[k];
                dp_dvi += ii[k];
                dq_dvr -= ii[k];
                dq_dvi += ir[k];
            }
            jp.emplace_back(k, m, dp_dvr);
            jp.emplace_back(k, n + m, dp_dvi);
            jq.emplace_back(k, m, dq_dvr);
            jq.emplace_back(k, n + m, dq_dvi);
        }
    }
    JacobianSet J;
    auto fill = [n](JacobianSet::Sparse& mat, const std::vector<T>& trips) {
        mat.resize(n, 2 * n);
        mat.setFromTriplets(trips.begin(), trips.end());
        mat.makeCompressed();
    };
    fill(J.u, ju);
    fill(J.theta, jt);
    fill(J.p, jp);
    fill(J.q, jq);
    return J;
}

StateVector solve_power_flow(const AdmittanceMatrix& Y, std::span<const Injection> injections,
                             Complex slack_voltage, const PowerFlowOptions& options) {
    if (static_cast<int>(injections.size()) != Y.size() - 1)
        throw std::invalid_argument("need one injection per non-substation bus");
    const InjectionModel model = [&](int bus, double) {
        const Injection& s = injections[bus - 1];
        return InjectionAtVoltage{s.p, s.q, 0.0, 0.0};
    };
    return solve_power_flow(Y, model, slack_voltage, options);
}

StateVector solve_power_flow(const AdmittanceMatrix& Y, const InjectionModel& model, Complex slack_voltage,
                             const PowerFlowOptions& options) {
    const int n = Y.size();
    const int unknowns = n - 1;
    StateVector state = StateVector::flat(n);
    state.vr[0] = slack_voltage.real();
    state.vi[0] = slack_voltage.imag();

    Eigen::VectorXd p, q, mismatch(2 * unknowns);
    std::vector<InjectionAtVoltage> spec(n);
    auto evaluate = [&] {
        eval_injections(state, Y, p, q);
        for (int k = 1; k < n; ++k) {
            spec[k] = model(k, std::hypot(state.vr[k], state.vi[k]));
            mismatch[k - 1] = p[k] - spec[k].p;
            mismatch[unknowns + k - 1] = q[k] - spec[k].q;
        }
        return mismatch.size() == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
    };

    double residual = evaluate();
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (!std::isfinite(residual)) break;
        if (residual < options.tolerance) return state;

        const JacobianSet J = jacobians(state, Y);
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * unknowns, 2 * unknowns);
        auto scatter = [&](const JacobianSet::Sparse& block, int row_offset) {
            for (int k = 1; k < n; ++k) {
                for (JacobianSet::Sparse::InnerIterator it(block, k); it; ++it) {
                    const int col = static_cast<int>(it.col());
                    if (col == 0 || col == n) continue;  // slack is fixed
                    const int target = col < n ? col - 1 : unknowns + (col - n) - 1;
                    jac(row_offset + k - 1, target) += it.value();
                }
            }
        };
        scatter(J.p, 0);
        scatter(J.q, unknowns);
        for (int k = 1; k < n; ++k) {
            const double mag = std::hypot(state.vr[k], state.vi[k]);
            if (mag == 0.0) throw ZeroVoltageError(k);
            const double dvr = state.vr[k] / mag, dvi = state.vi[k] / mag;
            jac(k - 1, k - 1) -= spec[k].dp_du * dvr;
            jac(k - 1, unknowns + k - 1) -= spec[k].dp_du * dvi;
            jac(unknowns + k - 1, k - 1) -= spec[k].dq_du * dvr;
            jac(unknowns + k - 1, unknowns + k - 1) -= spec[k].dq_du * dvi;
        }

        const Eigen::VectorXd step = jac.partialPivLu().solve(-mismatch);
        if (!step.allFinite()) break;
        state.vr.tail(unknowns) += step.head(unknowns);
        state.vi.tail(unknowns) += step.tail(unknowns);
        residual = evaluate();
    }
    if (std::isfinite(residual) && residual < options.tolerance) return state;
    throw ConvergenceError("power flow did not converge", residual, options.max_iterations);
}

}  // namespace gridprobe
