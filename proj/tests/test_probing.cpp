#include <doctest.h>

#include "gridprobe/errors.hpp"
#include "gridprobe/probing.hpp"
#include "gridprobe/zip.hpp"
#include "support.hpp"

using namespace gridprobe;
using testsupport::make_chain;
using testsupport::make_partition;

namespace {

ProbingPlan two_slot_plan(int bus, Injection a, Injection b) {
    return {2, {{{bus, a}}, {{bus, b}}}};
}

}  // namespace

TEST_SUITE("probing") {

TEST_CASE("plan validation") {
    const BusPartition p = make_partition(3, {0, 2});
    CHECK_NOTHROW(validate_plan(two_slot_plan(2, {0.1, 0}, {0.2, 0}), p));
    CHECK_THROWS_AS(validate_plan(two_slot_plan(2, {0.1, 0}, {0.1, 0}), p), ValidationError);
    CHECK_THROWS_AS(validate_plan({2, {{{2, {0.1, 0}}}}}, p), ValidationError);
    CHECK_THROWS_AS(validate_plan({1, {{{1, {0.1, 0}}, {2, {0.1, 0}}}}}, p), ValidationError);
    CHECK_THROWS_AS(validate_plan({1, {{}}}, p), ValidationError);
    CHECK_THROWS_AS(validate_plan({1, {{{2, {std::nan(""), 0}}}}}, p), ValidationError);
    CHECK_THROWS_AS(validate_plan({0, {}}, p), ValidationError);
}

TEST_CASE("default plan is seeded and distinct") {
    const BusPartition p = make_partition(5, {0, 2, 4});
    std::mt19937_64 a(3), b(3);
    const ProbingPlan x = default_probing_plan(p, 3, a), y = default_probing_plan(p, 3, b);
    CHECK(x.setpoints.size() == 3);
    CHECK(x.setpoints[1].at(2).p == y.setpoints[1].at(2).p);
    CHECK_NOTHROW(validate_plan(x, p));
    for (const auto& slot : x.setpoints)
        for (const auto& [bus, s] : slot) CHECK(std::abs(s.p) <= 0.05);
}

TEST_CASE("all-zero simulation is flat") {
    const FeederGraph f = make_chain(4);
    const BusPartition p = make_partition(4, {0, 3});
    const ProbingPlan plan{1, {{{3, {0.0, 0.0}}}}};
    const ProbingDataset d = simulate_probing(build_admittance(f), p, {}, plan, DataMode::phasor);
    for (const MeterReading& r : d.slots[0]) {
        CHECK(r.u_sq == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(std::abs(r.theta) < 1e-15);
        CHECK(std::abs(r.p) < 1e-15);
        CHECK(std::abs(r.q) < 1e-15);
    }
}

TEST_CASE("chain simulation is self-consistent") {
    const FeederGraph f = make_chain(3, {5.0, -10.0});
    const AdmittanceMatrix Y = build_admittance(f);
    const BusPartition p = make_partition(3, {0, 2});
    LoadModel loads;
    loads.loads[1] = ConstantLoad{-0.1, -0.05};
    const ProbingPlan plan = two_slot_plan(2, {0.05, 0.01}, {-0.03, 0.02});
    const std::vector<StateVector> states = simulate_states(Y, p, loads, plan);
    CHECK((testsupport::phasors(states[0]) - testsupport::phasors(states[1])).norm() > 1e-3);
    const ProbingDataset d = record_dataset(Y, p, states, DataMode::phasor);
    for (int t = 0; t < 2; ++t) {
        const BusOutputs out = eval_outputs(states[t], Y);
        CHECK(std::abs(out.p[1] + 0.1) < 1e-10);
        CHECK(std::abs(out.q[1] + 0.05) < 1e-10);
        CHECK(std::abs(out.p[2] - plan.setpoints[t].at(2).p) < 1e-10);
        CHECK(d.slots[t][1].bus == 2);
        CHECK(d.slots[t][1].p == out.p[2]);
    }
}

TEST_CASE("pure impedance ZIP load") {
    const FeederGraph f = make_chain(3, {5.0, -10.0});
    const AdmittanceMatrix Y = build_admittance(f);
    const BusPartition p = make_partition(3, {0, 2});
    LoadModel loads;
    loads.loads[1] = ZipLoad{{0.2, 0.0, 0.0}, {0.1, 0.0, 0.0}};
    const ProbingPlan plan{1, {{{2, {0.0, 0.0}}}}};
    const StateVector s = simulate_states(Y, p, loads, plan)[0];
    const BusOutputs out = eval_outputs(s, Y);
    CHECK(std::abs(-out.p[1] - 0.2 * out.u_sq[1]) < 1e-10);
    CHECK(std::abs(-out.q[1] - 0.1 * out.u_sq[1]) < 1e-10);
    CHECK_FALSE(loads.all_constant());
}

TEST_CASE("loads on metered buses are rejected") {
    const FeederGraph f = make_chain(3);
    const BusPartition p = make_partition(3, {0, 2});
    LoadModel loads;
    loads.loads[2] = ConstantLoad{-0.1, 0};
    CHECK_THROWS_AS(simulate_states(build_admittance(f), p, loads, {1, {{{2, {0, 0}}}}}), ValidationError);
}

TEST_CASE("chain round trip") {
    const FeederGraph f = make_chain(3, {5.0, -10.0});
    const AdmittanceMatrix Y = build_admittance(f);
    const BusPartition p = make_partition(3, {0, 2});
    LoadModel loads;
    loads.loads[1] = ConstantLoad{-0.1, -0.05};
    const ProbingPlan plan = two_slot_plan(2, {0.05, 0.01}, {-0.03, 0.02});
    for (DataMode mode : {DataMode::phasor, DataMode::non_phasor}) {
        const RecoveryResult r = recover_loads(Y, p, simulate_probing(Y, p, loads, plan, mode));
        CHECK(r.converged);
        CHECK_FALSE(r.rank_deficient);
        REQUIRE(r.loads.size() == 1);
        CHECK(std::abs(r.loads[0].p + 0.1) < 1e-6);
        CHECK(std::abs(r.loads[0].q + 0.05) < 1e-6);
        CHECK(std::abs(r.per_slot[0][0].p - r.per_slot[1][0].p) < 1e-8);
        CHECK(r.residual_history.front() >= r.residual_history.back());
    }
}

TEST_CASE("zero-load flat dataset needs no iterations") {
    const FeederGraph f = make_chain(3);
    const AdmittanceMatrix Y = build_admittance(f);
    const BusPartition p = make_partition(3, {0, 2});
    const ProbingPlan plan{1, {{{2, {0.0, 0.0}}}}};
    const RecoveryResult r = recover_loads(Y, p, simulate_probing(Y, p, {}, plan, DataMode::phasor));
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.loads[0].p == 0.0);
    CHECK(r.loads[0].q == 0.0);
}

TEST_CASE("under-determined setup is reported rank deficient") {
    // M = {0}, O = {1, 2, 3}, T = 2: M < O/T.
    const FeederGraph f = make_chain(4, {5.0, -10.0});
    const AdmittanceMatrix Y = build_admittance(f);
    const BusPartition p = make_partition(4, {0});
    LoadModel loads;
    loads.loads[1] = ConstantLoad{-0.05, -0.02};
    loads.loads[3] = ConstantLoad{-0.04, -0.01};
    REQUIRE_FALSE(test_for_T(f, p, DataMode::phasor, 2).success);
    // No metered inverters, so the two slots repeat; build the dataset by hand.
    const std::vector<StateVector> states = simulate_states(Y, p, loads, {1, {{}}});
    const ProbingDataset d = record_dataset(Y, p, {states[0], states[0]}, DataMode::phasor);
    const RecoveryResult r = recover_loads(Y, p, d);
    CHECK(r.rank_deficient);
    CHECK(r.jacobian_rank < r.required_rank);
}

TEST_CASE("dataset checks") {
    const FeederGraph f = make_chain(3);
    const AdmittanceMatrix Y = build_admittance(f);
    const BusPartition p = make_partition(3, {0, 2});
    ProbingDataset d = simulate_probing(Y, p, {}, {1, {{{2, {0.0, 0.0}}}}}, DataMode::phasor);
    ProbingDataset bad = d;
    bad.slots[0][1].u_sq = 0.0;
    CHECK_THROWS_AS(recover_loads(Y, p, bad), ValidationError);
    bad = d;
    bad.T = 2;
    CHECK_THROWS_AS(recover_loads(Y, p, bad), ValidationError);
    CHECK(slice_slot(d, 1).T == 1);
    CHECK_THROWS(slice_slot(d, 2));
}

TEST_CASE("Vandermonde diagnostics") {
    const std::vector<double> a{0.9, 1.0, 1.1}, b{1.0, 1.0, 1.1}, c{0.95, 1.0, 1.05};
    CHECK(std::abs(*vandermonde_conditioning(a).determinant + 2e-3) < 1e-15);
    CHECK(*vandermonde_conditioning(b).determinant == 0.0);
    CHECK(std::abs(*vandermonde_conditioning(c).determinant + 2.5e-4) < 1e-15);
    const std::vector<double> four{0.9, 1.0, 1.1, 1.2};
    const VandermondeDiagnostics d = vandermonde_conditioning(four);
    CHECK_FALSE(d.determinant.has_value());
    // Oracle: condition number from the singular values of the regressor.
    Eigen::MatrixXd U(4, 3);
    for (int t = 0; t < 4; ++t) U.row(t) << four[t] * four[t], four[t], 1.0;
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(U).singularValues();
    CHECK(d.condition_number == doctest::Approx(s[0] / s[2]).epsilon(1e-10));
    // For three samples the determinant equals det(U) up to sign convention.
    Eigen::Matrix3d V;
    for (int t = 0; t < 3; ++t) V.row(t) << a[t] * a[t], a[t], 1.0;
    CHECK(std::abs(std::abs(V.determinant()) - 2e-3) < 1e-15);
}

TEST_CASE("ZIP fit") {
    const ZipCoefficients truth{0.02, 0.03, 0.05};
    const std::vector<double> u{0.92, 1.00, 1.08};
    std::vector<double> s;
    for (double x : u) s.push_back(truth.consumption(x));
    const ZipFit fit = fit_zip(u, s);
    CHECK(fit.residual < 1e-10);
    CHECK(std::abs(fit.coefficients.alpha - 0.02) < 1e-10);
    CHECK(std::abs(fit.coefficients.beta - 0.03) < 1e-10);
    CHECK(std::abs(fit.coefficients.gamma - 0.05) < 1e-10);
    CHECK_FALSE(fit.ill_conditioned);

    const std::vector<double> flat{1.0, 1.0, 1.0};
    CHECK_THROWS_AS(fit_zip(flat, s), IllPosedError);
    const std::vector<double> close{1.0, 1.0 + 1e-7, 1.0 + 2e-7};
    CHECK_THROWS_AS(fit_zip(close, s), IllPosedError);
    CHECK_THROWS_AS(fit_zip(std::vector<double>{1.0, 1.1}, std::vector<double>{1.0, 1.0}), std::invalid_argument);
    CHECK(truth.consumption(1.0) == doctest::Approx(0.1));
}

TEST_CASE("ZIP fit over more slots is least squares") {
    const std::vector<double> u{0.9, 0.95, 1.0, 1.05, 1.1};
    const std::vector<double> s{0.1, 0.12, 0.1, 0.13, 0.11};
    const ZipFit fit = fit_zip(u, s);
    // Oracle: normal equations.
    Eigen::MatrixXd U(5, 3);
    Eigen::VectorXd y(5);
    for (int t = 0; t < 5; ++t) {
        U.row(t) << u[t] * u[t], u[t], 1.0;
        y[t] = s[t];
    }
    const Eigen::Vector3d c = (U.transpose() * U).ldlt().solve(U.transpose() * y);
    CHECK(fit.coefficients.alpha == doctest::Approx(c[0]).epsilon(1e-8));
    CHECK(fit.coefficients.beta == doctest::Approx(c[1]).epsilon(1e-8));
    CHECK(fit.coefficients.gamma == doctest::Approx(c[2]).epsilon(1e-8));
    CHECK(fit.residual > 0.0);
}

}  // TEST_SUITE
