#include <doctest.h>

#include <numbers>

#include "gridprobe/errors.hpp"
#include "gridprobe/powerflow.hpp"
#include "support.hpp"

using namespace gridprobe;

namespace {

// Row block of the finite-difference Jacobian of one output with respect to [v_r; v_i].
Eigen::MatrixXd finite_difference(const StateVector& s, const AdmittanceMatrix& Y,
                                  const std::function<Eigen::VectorXd(const BusOutputs&)>& pick, double h = 1e-6) {
    const int n = s.bus_count();
    Eigen::MatrixXd J(n, 2 * n);
    for (int k = 0; k < 2 * n; ++k) {
        StateVector plus = s, minus = s;
        (k < n ? plus.vr[k] : plus.vi[k - n]) += h;
        (k < n ? minus.vr[k] : minus.vi[k - n]) -= h;
        J.col(k) = (pick(eval_outputs(plus, Y)) - pick(eval_outputs(minus, Y))) / (2 * h);
    }
    return J;
}

}  // namespace

TEST_SUITE("powerflow") {

TEST_CASE("flat state on a shunt-free feeder") {
    std::mt19937_64 rng(1);
    const FeederGraph f = testsupport::random_feeder(6, rng);
    const BusOutputs out = eval_outputs(StateVector::flat(6), build_admittance(f));
    CHECK(out.p.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(out.q.cwiseAbs().maxCoeff() < 1e-14);
    CHECK((out.u_sq.array() - 1.0).abs().maxCoeff() == 0.0);
    CHECK(out.theta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-bus injections match complex arithmetic") {
    const FeederGraph f = testsupport::make_chain(2, {1.0, -2.0});
    const std::vector<Complex> v{{1.0, 0.0}, {0.98, 0.02}};
    const BusOutputs out = eval_outputs(StateVector::from_phasors(v), build_admittance(f));
    const Complex y(1.0, -2.0);
    const Complex s1 = v[1] * std::conj(-y * v[0] + y * v[1]);
    CHECK(out.p[1] == doctest::Approx(s1.real()).epsilon(1e-14));
    CHECK(out.q[1] == doctest::Approx(s1.imag()).epsilon(1e-14));
    CHECK(out.u_sq[1] == doctest::Approx(0.98 * 0.98 + 0.02 * 0.02));
    CHECK(out.theta[1] == doctest::Approx(std::atan2(0.02, 0.98)));
}

TEST_CASE("injections agree with the phasor oracle on random meshed feeders") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const FeederGraph f = testsupport::random_feeder(8, rng, 0.4);
        const AdmittanceMatrix Y = build_admittance(f);
        const StateVector s = random_state(8, rng);
        const Eigen::VectorXcd oracle =
            testsupport::complex_injections(testsupport::dense_admittance(f), testsupport::phasors(s));
        const BusOutputs out = eval_outputs(s, Y);
        for (int n = 0; n < 8; ++n) {
            CHECK(out.p[n] == doctest::Approx(oracle[n].real()).epsilon(1e-12));
            CHECK(out.q[n] == doctest::Approx(oracle[n].imag()).epsilon(1e-12));
        }
    }
}

TEST_CASE("global rotation leaves magnitudes and powers unchanged") {
    std::mt19937_64 rng(11);
    const FeederGraph f = testsupport::random_feeder(5, rng, 0.3);
    const AdmittanceMatrix Y = build_admittance(f);
    const StateVector s = random_state(5, rng);
    const double phi = 0.3;
    std::vector<Complex> rotated;
    for (int n = 0; n < 5; ++n) rotated.push_back(s.phasor(n) * std::polar(1.0, phi));
    const BusOutputs a = eval_outputs(s, Y), b = eval_outputs(StateVector::from_phasors(rotated), Y);
    CHECK((a.u_sq - b.u_sq).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a.p - b.p).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() < 1e-13);
    for (int n = 0; n < 5; ++n) CHECK(std::remainder(b.theta[n] - a.theta[n] - phi, 2 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("zero voltage is reported with the bus") {
    const FeederGraph f = testsupport::make_chain(3);
    StateVector s = StateVector::flat(3);
    s.vr[2] = 0.0;
    try {
        eval_outputs(s, build_admittance(f));
        FAIL("expected ZeroVoltageError");
    } catch (const ZeroVoltageError& e) {
        CHECK(e.bus() == 2);
    }
}

TEST_CASE("Jacobian of u at flat start") {
    const FeederGraph f = testsupport::make_chain(3);
    const JacobianSet J = jacobians(StateVector::flat(3), build_admittance(f));
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 6);
    expected.leftCols(3) = 2 * Eigen::MatrixXd::Identity(3, 3);
    CHECK((Eigen::MatrixXd(J.u) - expected).norm() == 0.0);
}

TEST_CASE("analytic Jacobians match central differences") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const FeederGraph f = testsupport::random_feeder(6, rng, 0.3);
        const AdmittanceMatrix Y = build_admittance(f);
        const StateVector s = random_state(6, rng);
        const JacobianSet J = jacobians(s, Y);
        auto compare = [&](const Eigen::SparseMatrix<double, Eigen::RowMajor>& a,
                           const std::function<Eigen::VectorXd(const BusOutputs&)>& pick) {
            const Eigen::MatrixXd fd = finite_difference(s, Y, pick);
            return (Eigen::MatrixXd(a) - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff());
        };
        CHECK(compare(J.u, [](const BusOutputs& o) { return o.u_sq; }) < 1e-8);
        CHECK(compare(J.theta, [](const BusOutputs& o) { return o.theta; }) < 1e-8);
        CHECK(compare(J.p, [](const BusOutputs& o) { return o.p; }) < 1e-8);
        CHECK(compare(J.q, [](const BusOutputs& o) { return o.q; }) < 1e-8);
    }
}

TEST_CASE("Jacobian structure equals the admittance pattern") {
    std::mt19937_64 rng(9);
    const FeederGraph f = testsupport::random_feeder(7, rng, 0.3);
    const AdmittanceMatrix Y = build_admittance(f);
    const JacobianSet J = jacobians(random_state(7, rng), Y);
    for (int n = 0; n < 7; ++n) {
        std::vector<int> cols;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(J.p, n); it; ++it)
            cols.push_back(static_cast<int>(it.col()));
        std::vector<int> expected = Y.row_pattern(n);
        for (int m : Y.row_pattern(n)) expected.push_back(m + 7);
        CHECK(cols == expected);
    }
}

TEST_CASE("zero injections give the flat state") {
    const FeederGraph f = testsupport::make_chain(4);
    const std::vector<Injection> none(3);
    const StateVector s = solve_power_flow(build_admittance(f), none);
    CHECK((s.vr.array() - 1.0).abs().maxCoeff() == 0.0);
    CHECK(s.vi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-bus load is self-consistent") {
    const FeederGraph f = testsupport::make_chain(2, {1.0, -2.0});
    const AdmittanceMatrix Y = build_admittance(f);
    const std::vector<Injection> load{{-0.1, -0.05}};
    const StateVector s = solve_power_flow(Y, load);
    const BusOutputs out = eval_outputs(s, Y);
    CHECK(out.p[1] == doctest::Approx(-0.1).epsilon(1e-10));
    CHECK(std::abs(out.p[1] + 0.1) < 1e-10);
    CHECK(std::abs(out.q[1] + 0.05) < 1e-10);
}

TEST_CASE("Newton agrees with a backward/forward sweep on radial feeders") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> load(-0.1, 0.0);
    for (int trial = 0; trial < 10; ++trial) {
        const FeederGraph f = testsupport::random_feeder(8, rng);
        std::vector<Injection> inj(7);
        std::vector<Complex> s(8);
        for (int n = 1; n < 8; ++n) {
            inj[n - 1] = {load(rng), load(rng) / 2};
            s[n] = {inj[n - 1].p, inj[n - 1].q};
        }
        const StateVector newton = solve_power_flow(build_admittance(f), inj);
        const Eigen::VectorXcd sweep = testsupport::sweep_power_flow(f, s);
        CHECK((testsupport::phasors(newton) - sweep).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("voltage-dependent injections are solved self-consistently") {
    const FeederGraph f = testsupport::make_chain(3, {5.0, -10.0});
    const AdmittanceMatrix Y = build_admittance(f);
    const double alpha = 0.3;
    const InjectionModel model = [&](int bus, double u) {
        if (bus == 2) return InjectionAtVoltage{-alpha * u * u, 0.0, -2 * alpha * u, 0.0};
        return InjectionAtVoltage{};
    };
    const StateVector s = solve_power_flow(Y, model);
    const BusOutputs out = eval_outputs(s, Y);
    CHECK(std::abs(-out.p[2] - alpha * out.u_sq[2]) < 1e-10);
    CHECK(std::abs(out.p[1]) < 1e-10);
}

TEST_CASE("excessive load does not converge") {
    const FeederGraph f = testsupport::make_chain(2, {1.0, -2.0});
    const std::vector<Injection> load{{-100.0, 0.0}};
    CHECK_THROWS_AS(solve_power_flow(build_admittance(f), load), ConvergenceError);
}

TEST_CASE("slack voltage is honoured") {
    const FeederGraph f = testsupport::make_chain(3);
    const std::vector<Injection> none(2);
    const StateVector s = solve_power_flow(build_admittance(f), none, Complex(1.02, 0.01));
    CHECK(std::abs(s.phasor(2) - Complex(1.02, 0.01)) < 1e-12);
}

}  // TEST_SUITE
