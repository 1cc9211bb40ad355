#include <catch2/catch_amalgamated.hpp>

#include "qmask/checks.hpp"
#include "qmask/decoupling.hpp"

using namespace qmask;
using Catch::Matchers::WithinAbs;

TEST_CASE("op operator transposes the coefficient matrix", "[decoupling]") {
    // psi = sum c_ij |i>_A |j>_B  =>  op_{A->B}(psi) = sum c_ij |j><i|
    const PureState psi({0.6, 0, 0, 0.8}, SubsystemShape({lbl::A, lbl::B}, {2, 2}));
    const OpOperator op = build_op(psi, {lbl::A}, {lbl::B});
    CHECK_THAT(op.matrix(0, 0).real(), WithinAbs(0.6, 1e-15));
    CHECK_THAT(op.matrix(1, 1).real(), WithinAbs(0.8, 1e-15));
    const PureState skew({0, 1, 0, 0}, SubsystemShape({lbl::A, lbl::B}, {2, 2}));  // |0>_A |1>_B
    const OpOperator s = build_op(skew, {lbl::A}, {lbl::B});
    CHECK(s.matrix(1, 0) == cplx(1));
    CHECK(s.matrix(0, 1) == cplx(0));
}

TEST_CASE("op operator of a mixed state is rejected", "[decoupling]") {
    const DensityOperator mixed = DensityOperator::maximally_mixed(SubsystemShape({lbl::A, lbl::B}, {2, 2}));
    CHECK_THROWS_AS(build_op(mixed, {lbl::A}, {lbl::B}), PurityError);
}

TEST_CASE("op operator swap and transfer identities", "[decoupling][property]") {
    const auto swap = op_swap_trials(100, 6);
    const auto transfer = op_transfer_trials(100, 6);
    INFO("swap worst " << swap.worst << ", transfer worst " << transfer.worst);
    CHECK(swap.worst <= 1e-10);
    CHECK(transfer.worst <= 1e-10);
}

TEST_CASE("T channel induced by a dilation is trace preserving", "[decoupling]") {
    const PureState omega = omega_from_dilation(stinespring(dephasing_qubit(0.2)));
    const TChannel t = t_channel(omega);
    CHECK(t.tp_residual < 1e-12);
    CHECK_FALSE(t.warning());
    // The flat omega discards a1 and dephases a2.
    const TChannel flat = t_channel(flat_omega());
    CHECK(flat.tp_residual < 1e-12);
    const double h = conditional_entropy(flat_omega().density(), {lbl::A}, {lbl::K});
    CHECK_THAT(h, WithinAbs(1.0, 1e-12));
}

TEST_CASE("decoupling bounds follow the closed form", "[decoupling]") {
    const DecouplingRow r = decoupling_bounds(1.0, 2, 4, 1, 0.0);
    CHECK_THAT(r.bound, WithinAbs(std::sqrt(4.0 * 0.25), 1e-15));
    CHECK_THAT(r.bound_g, WithinAbs(1.0, 1e-15));
    CHECK_FALSE(r.vacuous);
    const DecouplingRow v = decoupling_bounds(0.0, 1, 16, 1, 0.0);
    CHECK(v.vacuous);
    const DecouplingRow e = decoupling_bounds(1.0, 2, 4, 1, 0.1);
    CHECK(e.bound > r.bound);
    CHECK(r.bound_eps_slope > 0);
}

TEST_CASE("Monte Carlo decoupling stays below the bound", "[decoupling][property]") {
    for (auto [ds, dg] : {std::pair<std::size_t, std::size_t>{1, 4}, {2, 2}, {4, 1}}) {
        DecouplingConfig cfg;
        cfg.omega = flat_omega();
        cfg.dim_s = ds;
        cfg.dim_g = dg;
        cfg.blocklengths = {2, 3};
        cfg.samples = 60;
        cfg.seed = 12;
        const auto rep = run_iid_decoupling(cfg);
        for (const auto& row : rep.rows) {
            INFO("ds=" << ds << " dg=" << dg << " n=" << row.n << " mean=" << row.mean << " bound=" << row.bound);
            if (!row.vacuous) CHECK(row.mean + 2 * row.stderr_ <= row.bound);
            if (!row.vacuous_g) CHECK(row.mean_g + 2 * row.stderr_g <= row.bound_g);
        }
    }
}

TEST_CASE("decoupling runs are seed-deterministic", "[decoupling]") {
    DecouplingConfig cfg;
    cfg.omega = flat_omega();
    cfg.dim_s = 2;
    cfg.blocklengths = {1, 2};
    cfg.samples = 20;
    cfg.seed = 5;
    const auto a = run_iid_decoupling(cfg), b = run_iid_decoupling(cfg);
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].mean == b.rows[i].mean);
    cfg.seed = 6;
    CHECK(run_iid_decoupling(cfg).rows[1].mean != a.rows[1].mean);
}

TEST_CASE("decoupling configuration errors", "[decoupling]") {
    DecouplingConfig cfg;
    cfg.omega = flat_omega();
    cfg.dim_s = 8;
    cfg.dim_g = 1;
    cfg.blocklengths = {1};
    CHECK_THROWS_AS(run_iid_decoupling(cfg), EmbeddingError);
    cfg.dim_s = 1;
    cfg.samples = 0;
    CHECK_THROWS_AS(run_iid_decoupling(cfg), ConfigError);
    cfg.samples = 1;
    cfg.blocklengths = {7};
    CHECK_THROWS_AS(run_iid_decoupling(cfg), DimensionLimitError);
}

TEST_CASE("one-shot bound uses min-entropy lower bounds", "[decoupling]") {
    const DensityOperator mixed = DensityOperator::maximally_mixed(SubsystemShape({lbl::A, lbl::K}, {2, 2}));
    const auto r = one_shot_rhs(mixed, {lbl::K}, mixed, {lbl::K}, {2, 0, 1500});
    CHECK_THAT(r.hmin_zeta, WithinAbs(1.0, 1e-9));
    CHECK_THAT(r.rhs, WithinAbs(0.5, 1e-9));
}

TEST_CASE("Uhlmann recovery", "[decoupling][property]") {
    const auto bound = uhlmann_trials(50, 10);
    CHECK(bound.worst <= 1e-9);
    const auto eq = uhlmann_equal_marginal_trials(50, 10);
    CHECK(eq.worst <= 1e-8);
}

TEST_CASE("Uhlmann isometry is an isometry", "[decoupling]") {
    Rng rng(2);
    const PureState psi = random_pure(SubsystemShape({lbl::A, lbl::B}, {2, 3}), rng);
    const PureState theta = random_pure(SubsystemShape({lbl::A, lbl::C}, {2, 4}), rng);
    const auto r = uhlmann_isometry(psi, theta, {lbl::A});
    CHECK(r.isometry.rows() == 4);
    CHECK(r.isometry.cols() == 3);
    CHECK(max_abs_diff(r.isometry.adjoint() * r.isometry, ComplexMatrix::identity(3)) < 1e-10);
    CHECK(r.achieved_distance <= r.bound + 1e-9);
    const PureState small = random_pure(SubsystemShape({lbl::A, lbl::C}, {3, 1}), rng);
    const PureState wide = random_pure(SubsystemShape({lbl::A, lbl::B}, {3, 3}), rng);
    CHECK_THROWS_AS(uhlmann_isometry(wide, small, {lbl::A}), EmbeddingError);
}
