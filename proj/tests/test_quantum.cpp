#include <catch2/catch_amalgamated.hpp>

#include "qmask/checks.hpp"
#include "qmask/quantum.hpp"

using namespace qmask;
using Catch::Matchers::WithinAbs;

TEST_CASE("density operators validate their input", "[quantum]") {
    const SubsystemShape q({"A"}, {2});
    CHECK_THROWS_AS(DensityOperator(ComplexMatrix{{1, 1}, {0, 0}}, q), SymmetryError);
    CHECK_THROWS_AS(DensityOperator(ComplexMatrix{{1, 0}, {0, 1}}, q), ValidationError);
    CHECK_THROWS_AS(DensityOperator::checked(ComplexMatrix{{1.5, 0}, {0, -0.5}}, q), PositivityError);
    CHECK_THROWS_AS(DensityOperator(ComplexMatrix::identity(3) * cplx(1.0 / 3), q), ShapeError);
    CHECK_NOTHROW(DensityOperator::maximally_mixed(q));
    CHECK_THROWS_AS(PureState({1, 1}, q), ValidationError);
    CHECK_NOTHROW(PureState::normalized({1, 1}, q));
}

TEST_CASE("maximally entangled state has maximally mixed marginals", "[quantum]") {
    for (std::size_t d : {2u, 3u, 4u}) {
        const PureState phi = maximally_entangled(d);
        const auto ra = phi.reduce({lbl::A});
        CHECK(max_abs_diff(ra.matrix(), DensityOperator::maximally_mixed(ra.shape()).matrix()) < 1e-15);
    }
}

TEST_CASE("identity channel and Stinespring dilation agree", "[quantum]") {
    Rng rng(4);
    const KrausChannel dep = dephasing_qubit(0.3);
    const IsometricDilation dil = stinespring(dep);
    CHECK(dil.isometry_residual() < 1e-12);
    const DensityOperator rho = random_density(SubsystemShape({lbl::Ap}, {2}), rng);
    const DensityOperator direct = apply_channel(dep, rho);
    const DensityOperator via = dil.apply(rho).reduce({lbl::B});
    CHECK(trace_distance_aligned(direct, via) < 1e-12);
}

TEST_CASE("Kraus completeness is checked", "[quantum]") {
    const ComplexMatrix half = ComplexMatrix::identity(2) * cplx(0.5);
    CHECK_THROWS_AS(KrausChannel({half}, SubsystemShape({"A"}, {2}), SubsystemShape({"B"}, {2})), CompletenessError);
    CHECK_NOTHROW(KrausChannel::unchecked({half}, SubsystemShape({"A"}, {2}), SubsystemShape({"B"}, {2})));
}

TEST_CASE("channel acting on a subset keeps the reference", "[quantum]") {
    const PureState phi = maximally_entangled(2, lbl::A, lbl::Ap);
    const DensityOperator out = apply_channel(dephasing_qubit(0.5), phi.density(), {lbl::Ap});
    REQUIRE(out.shape().contains(lbl::A));
    REQUIRE(out.shape().contains(lbl::B));
    // Full dephasing of half a Bell pair: (|00><00| + |11><11|)/2.
    const auto m = out.permuted({lbl::A, lbl::B}).matrix();
    CHECK_THAT(m(0, 0).real(), WithinAbs(0.5, 1e-14));
    CHECK_THAT(std::abs(m(0, 3)), WithinAbs(0.0, 1e-14));
}

TEST_CASE("complementary channel of the identity is trace-and-prepare", "[quantum]") {
    const KrausChannel id = identity_channel(SubsystemShape({lbl::Ap}, {2}), {lbl::B});
    const KrausChannel comp = complementary(stinespring(id));
    Rng rng(8);
    const DensityOperator rho = random_density(SubsystemShape({lbl::Ap}, {2}), rng);
    const DensityOperator env = apply_channel(comp, rho);
    CHECK(env.dim() == 1);
}

TEST_CASE("Choi matrix of a unital qubit channel", "[quantum]") {
    const ComplexMatrix c = choi_matrix(dephasing_qubit(0.2));
    CHECK_THAT(c.trace().real(), WithinAbs(2.0, 1e-14));
    CHECK(hermiticity_residual(c) < 1e-15);
    for (double v : hermitian_eigenvalues(c)) CHECK(v > -1e-12);
}

TEST_CASE("maximally correlated triple", "[quantum]") {
    const ChannelStateTriple t = maximally_correlated({0.25, 0.75});
    CHECK(t.state().shape().labels == Labels{lbl::E, lbl::E0, lbl::C});
    const auto pc = t.phi_C().matrix();
    CHECK_THAT(pc(1, 1).real(), WithinAbs(0.75, 1e-15));
    CHECK_THROWS_AS(maximally_correlated({0.5, 0.6}), ProbabilityError);
    CHECK_THROWS_AS(maximally_correlated({-0.1, 1.1}), ProbabilityError);
}

TEST_CASE("purified channel state adds T and keeps the marginal", "[quantum]") {
    const ChannelStateTriple t = maximally_correlated({0.3, 0.7});
    const ChannelStateTriple p = purify_channel_state(t);
    CHECK(p.has_purifier());
    CHECK(p.env_group() == Labels{lbl::T, lbl::E});
    const auto back = p.state().reduce({lbl::E, lbl::E0, lbl::C});
    CHECK(trace_distance_aligned(back, t.state()) < 1e-12);
}

TEST_CASE("POVM outcome probabilities", "[quantum]") {
    const DensityOperator plus = PureState::normalized({1, 1}, SubsystemShape({"A"}, {2})).density();
    const ComplexMatrix p0{{1, 0}, {0, 0}}, p1{{0, 0}, {0, 1}};
    const auto pr = povm_measure(plus, {p0, p1});
    CHECK_THAT(pr[0], WithinAbs(0.5, 1e-15));
    CHECK_THAT(pr[1], WithinAbs(0.5, 1e-15));
}
