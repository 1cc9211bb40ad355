#include <catch2/catch_amalgamated.hpp>

#include "qmask/checks.hpp"
#include "qmask/harness.hpp"

using namespace qmask;
using Catch::Matchers::WithinAbs;

namespace {

KrausChannel identity_map(const std::string& in, const std::string& out, std::size_t d) {
    return identity_channel(SubsystemShape({in}, {d}), {out});
}

// Ignores its input and prepares |0>.
KrausChannel constant_decoder(const Labels& in, const std::vector<std::size_t>& dims, std::size_t dm) {
    const SubsystemShape s(in, dims);
    std::vector<ComplexMatrix> ops;
    for (std::size_t j = 0; j < s.total(); ++j) {
        ComplexMatrix k(dm, s.total());
        k(0, j) = 1.0;
        ops.push_back(std::move(k));
    }
    return {std::move(ops), s, SubsystemShape({lbl::Mhat}, {dm})};
}

}  // namespace

TEST_CASE("controlled pre-flip superdense code masks the channel state", "[harness]") {
    const CodeReport r = controlled_z_code({0.5, 0.0, 1.0});
    CHECK(r.error <= 1e-9);
    CHECK(r.leakage <= 1e-9);
    CHECK(r.Q == 2.0);
    CHECK(r.R_e == 1.0);
    REQUIRE(r.messages.size() == 4);
    CHECK(r.label == "max over tested messages");
    for (const auto& m : r.messages) CHECK(m.error <= 1e-9);
}

TEST_CASE("uncontrolled superdense code leaks the channel state", "[harness]") {
    const MaskingInstance inst(dephasing_channel({0.5, 0.0, 1.0}));
    const CodeReport r = evaluate_code(inst, superdense_code(false), classical_messages(4));
    CHECK(r.leakage > 0.5);
    CHECK(r.leakage <= r.leakage_ceiling + 1e-9);
    CHECK(r.error > 0.1);
}

TEST_CASE("superdense coding over a noiseless qubit", "[harness]") {
    for (std::size_t m = 0; m < 4; ++m) {
        const CodeReport r = superdense(m);
        CHECK(r.error <= 1e-12);
        CHECK(r.leakage <= 1e-12);
    }
    CHECK_THROWS_AS(superdense(4), DomainError);
}

TEST_CASE("superdense decoder inputs are orthogonal Bell states", "[harness]") {
    const auto states = superdense_decoder_inputs();
    REQUIRE(states.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK_THAT(states[i].matrix().trace().real(), WithinAbs(1.0, 1e-12));
        for (std::size_t j = 0; j < 4; ++j) {
            const double overlap = (states[i].matrix() * states[j].matrix()).trace().real();
            CHECK_THAT(overlap, WithinAbs(i == j ? 1.0 : 0.0, 1e-12));
        }
    }
}

TEST_CASE("teleportation reproduces qubit messages", "[harness]") {
    Rng rng(31);
    for (int t = 0; t < 5; ++t) {
        const auto psi = haar_state(2, rng);
        const CodeReport r = teleportation(psi);
        CHECK(r.error <= 1e-9);
        CHECK(r.Q == 1.0);
        CHECK(r.R_e == 1.0);
        // sqrt(1 - F^2) bottoms out near 1e-8 in double precision.
        CHECK(r.messages[0].fidelity_distance <= 1e-7);
    }
    const std::vector<cplx> zero{1, 0};
    CHECK(teleportation(zero).error <= 1e-12);
}

TEST_CASE("global phase does not change the report", "[harness]") {
    const std::vector<cplx> psi{0.6, cplx(0, 0.8)};
    const cplx ph = std::polar(1.0, 1.234);
    const std::vector<cplx> rotated{psi[0] * ph, psi[1] * ph};
    const CodeReport a = teleportation(psi), b = teleportation(rotated);
    CHECK_THAT(a.error, WithinAbs(b.error, 1e-14));
    CHECK_THAT(a.leakage, WithinAbs(b.leakage, 1e-14));
}

TEST_CASE("constant decoder has error at least one half", "[harness]") {
    const MaskingInstance inst(without_state(noiseless_qubit()));
    CodeSpec code;
    code.encoder = identity_map(lbl::M, lbl::Ap, 2);
    code.decoder = constant_decoder({lbl::B}, {2}, 2);
    const CodeReport r = evaluate_code(inst, code);
    CHECK(r.error >= 0.5);
    CHECK(r.R_e == 0.0);
    // Default message set: basis, four Haar states, maximally mixed.
    CHECK(r.messages.size() == 2 + 4 + 1);
}

TEST_CASE("unassisted identity code needs no entanglement", "[harness]") {
    const MaskingInstance inst(without_state(noiseless_qubit()));
    CodeSpec code;
    code.encoder = identity_map(lbl::M, lbl::Ap, 2);
    code.decoder = identity_map(lbl::B, lbl::Mhat, 2);
    const CodeReport r = evaluate_code(inst, code, {}, 4);
    CHECK(r.error <= 1e-12);
    CHECK(r.leakage <= 1e-12);
    CHECK(r.leakage_ceiling == 0.0);
}

TEST_CASE("code validation", "[harness]") {
    const MaskingInstance inst(without_state(noiseless_qubit()));
    CodeSpec code;
    code.encoder = identity_map(lbl::M, lbl::Ap, 2);
    code.decoder = identity_map(lbl::B, lbl::Mhat, 2);

    CodeSpec uses_ga = code;
    uses_ga.encoder = KrausChannel({ComplexMatrix::identity(4)}, SubsystemShape({lbl::M, lbl::GA}, {2, 2}),
                                   SubsystemShape({lbl::Ap, "X"}, {2, 2}));
    CHECK_THROWS_AS(evaluate_code(inst, uses_ga), LabelError);

    CodeSpec wrong_dim = code;
    wrong_dim.encoder = identity_map(lbl::M, lbl::Ap, 3);
    wrong_dim.decoder = identity_map(lbl::B, lbl::Mhat, 3);
    CHECK_THROWS_AS(evaluate_code(inst, wrong_dim), ShapeError);

    const NamedMessage bad{"bad", DensityOperator::maximally_mixed(SubsystemShape({lbl::M}, {4}))};
    CHECK_THROWS_AS(evaluate_code(inst, code, {bad}), ShapeError);
}

TEST_CASE("code evaluation respects the dimension cap", "[harness]") {
    const std::size_t saved = dim_cap();
    set_dim_cap(4);
    CHECK_THROWS_AS(controlled_z_code({0.5, 0.0, 1.0}), DimensionLimitError);
    set_dim_cap(saved);
}
