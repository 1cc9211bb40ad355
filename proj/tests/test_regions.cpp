#include <catch2/catch_amalgamated.hpp>

#include "qmask/checks.hpp"
#include "qmask/regions.hpp"

using namespace qmask;
using Catch::Matchers::WithinAbs;

namespace {

MaskingInstance erasure_instance(double eps) { return MaskingInstance(without_state(erasure_channel(eps))); }

OptimizeRequest small_request(RegionObjective obj) {
    OptimizeRequest req;
    req.objective = obj;
    req.family = CandidateFamily::product;
    req.budget.dim_a = 2;
    req.budget.restarts = 2;
    req.budget.seed = 3;
    return req;
}

}  // namespace

TEST_CASE("instance validation", "[regions]") {
    CHECK_NOTHROW(MaskingInstance(dephasing_channel({0.3, 0.1, 0.8})));
    CHECK_THROWS_AS(MaskingInstance(dephasing_qubit(0.1), maximally_correlated({0.5, 0.5})), LabelError);
    CHECK(is_maximally_correlated(maximally_correlated({0.2, 0.8})));
    Rng rng(1);
    const ChannelStateTriple generic(random_density(SubsystemShape({lbl::E, lbl::E0, lbl::C}, {2, 2, 2}), rng));
    CHECK_FALSE(is_maximally_correlated(generic));
}

TEST_CASE("candidates must reproduce the channel state", "[regions]") {
    const MaskingInstance inst(dephasing_channel({0.3, 0.1, 0.8}));
    const InputCandidate good = dephasing_r0_candidate({0.3, 0.1, 0.8}, 0.2);
    CHECK(feasibility_residual(inst, good.state) < 1e-12);
    const InputCandidate bad = dephasing_r0_candidate({0.5, 0.1, 0.8}, 0.2);
    CHECK_THROWS_AS(require_feasible(inst, bad), ConstraintError);
}

TEST_CASE("dephasing candidates match the closed-form frontiers", "[regions]") {
    for (double q : {0.1, 0.3, 0.5}) {
        for (auto [e0, e1] : {std::pair{0.0, 1.0}, std::pair{0.1, 0.8}}) {
            const DephasingSpec spec{q, e0, e1};
            const MaskingInstance inst(dephasing_channel(spec));
            std::vector<double> grid;
            for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
            const auto cf = dephasing_closed_form(spec, grid);
            CHECK(cf.in_regime);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const auto r0 = eval_ea_point(inst, dephasing_r0_candidate(spec, grid[i]), true);
                const auto r1 = eval_ea_point(inst, dephasing_r1_candidate(spec, grid[i]), true);
                const auto qp = eval_unassisted_inner(inst, dephasing_r1_candidate(spec, grid[i]));
                CHECK_THAT(r0.rate, WithinAbs(cf.r0[i].rate, 1e-9));
                CHECK_THAT(r0.leakage, WithinAbs(cf.r0[i].leakage, 1e-9));
                CHECK_THAT(r1.rate, WithinAbs(cf.r1[i].rate, 1e-9));
                CHECK_THAT(r1.leakage, WithinAbs(cf.r1[i].leakage, 1e-9));
                CHECK_THAT(qp.rate, WithinAbs(cf.quantum[i].rate, 1e-9));
                CHECK(r0.flag.empty());
            }
        }
    }
}

TEST_CASE("closed form at the corners", "[regions]") {
    // eps0 = 0, eps1 = 1, state-aware pre-flip at lambda = 0: R = 2, L = 0.
    const auto cf = dephasing_closed_form({0.5, 0.0, 1.0}, {0.0, 0.5});
    CHECK_THAT(cf.r1[0].rate, WithinAbs(2.0, 1e-12));
    CHECK_THAT(cf.r1[0].leakage, WithinAbs(0.0, 1e-12));
    // Unconditioned pre-flip at q = 1/2 sees eps_bar = 1/2.
    CHECK_THAT(cf.r0[0].rate, WithinAbs(1.0, 1e-12));
    CHECK_THAT(cf.r0[0].leakage, WithinAbs(1.0, 1e-12));
    // lambda = 1/2 randomizes completely.
    CHECK_THAT(cf.r1[1].rate, WithinAbs(1.0, 1e-12));
    CHECK_THAT(cf.r1[1].leakage, WithinAbs(0.0, 1e-12));
    const auto out = dephasing_closed_form({0.2, 0.6, 0.9}, {0.0});
    CHECK_FALSE(out.in_regime);
    CHECK_THROWS_AS(dephasing_closed_form({0.2, 0.1, 0.9}, {1.5}), DomainError);
}

TEST_CASE("maximally entangled input over the identity", "[regions]") {
    const MaskingInstance inst(without_state(identity_channel(SubsystemShape({lbl::Ap}, {2}), {lbl::B})));
    const InputCandidate cand{product_state(inst, ComplexMatrix::projector(embedded_phi(2, 2)), 2), "product", {}};
    const auto ea = eval_ea_point(inst, cand);
    CHECK_THAT(ea.rate, WithinAbs(1.0, 1e-12));
    CHECK_THAT(ea.leakage, WithinAbs(0.0, 1e-12));
    const auto un = eval_unassisted_inner(inst, cand);
    CHECK_THAT(un.rate, WithinAbs(1.0, 1e-12));
    const auto reg = eval_rate_limited(inst, cand);
    CHECK_THAT(reg.q_max(0.0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(reg.re_star, WithinAbs(0.0, 1e-12));
}

TEST_CASE("rate-limited region corners", "[regions]") {
    const MaskingInstance inst = erasure_instance(0.3);
    const InputCandidate cand{product_state(inst, ComplexMatrix::projector(embedded_phi(2, 2)), 2), "product", {}};
    const auto reg = eval_rate_limited(inst, cand);
    const double h = reg.entropies.H_A_given_EC, i = reg.entropies.Icoh;
    CHECK_THAT(h, WithinAbs(1.0, 1e-12));
    CHECK_THAT(i, WithinAbs(1.0 - 2 * 0.3, 1e-12));
    CHECK_THAT(reg.q_max(0.0), WithinAbs(i, 1e-12));
    CHECK_THAT(reg.q_max(reg.re_star), WithinAbs(0.5 * (h + i), 1e-12));
    CHECK_THAT(reg.q_max(h), WithinAbs(0.0, 1e-12));
    CHECK(reg.corners.size() == 3);
}

TEST_CASE("general channel states get the inner-bound label", "[regions]") {
    Rng rng(4);
    const ChannelStateTriple generic(random_density(SubsystemShape({lbl::E, lbl::E0, lbl::C}, {2, 2, 2}), rng));
    const MaskingInstance inst(dephasing_channel({0.3, 0.1, 0.8}).channel, generic);
    const InputCandidate cand{product_state(inst, ComplexMatrix::projector(embedded_phi(2, 2)), 2), "product", {}};
    CHECK(eval_ea_point(inst, cand).flag.find("inner bound only") != std::string::npos);
}

TEST_CASE("leakage above twice H(C) is flagged", "[regions]") {
    CHECK(leakage_flag(2.5, 1.0) == "trivially satisfiable");
    CHECK(leakage_flag(1.5, 1.0).empty());
    CHECK(join_flags({"a", "", "b"}) == "a; b");
}

TEST_CASE("erasure capacities are recovered by optimization", "[regions][optimize]") {
    for (double eps : {0.1, 0.4}) {
        const auto ea = optimize_region(erasure_instance(eps), small_request(RegionObjective::ea_quantum));
        REQUIRE(ea.points.size() == 1);
        CHECK_THAT(ea.points[0].rate, WithinAbs(1.0 - eps, 5e-3));
        CHECK(ea.label == "achievable lower bound");
        const auto un = optimize_region(erasure_instance(eps), small_request(RegionObjective::unassisted_inner));
        CHECK_THAT(un.points[0].rate, WithinAbs(std::max(0.0, 1.0 - 2 * eps), 5e-3));
    }
    const auto zero = optimize_region(erasure_instance(0.6), small_request(RegionObjective::unassisted_inner));
    CHECK_THAT(zero.points[0].rate, WithinAbs(0.0, 1e-12));
}

TEST_CASE("leakage-constrained frontier is monotone", "[regions][optimize]") {
    const MaskingInstance inst(dephasing_channel({0.3, 0.1, 0.8}));
    OptimizeRequest req;
    req.objective = RegionObjective::ea_classical;
    req.family = CandidateFamily::controlled;
    req.leakage_grid = {0.4, 0.0, 0.2};
    req.budget.restarts = 2;
    req.budget.max_evals = 1500;
    req.budget.seed = 1;
    const auto fr = optimize_region(inst, req);
    REQUIRE(fr.points.size() == 3);
    CHECK(fr.levels == std::vector<double>{0.0, 0.2, 0.4});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(fr.points[i].leakage <= fr.levels[i] + req.budget.leakage_tol);
        if (i) CHECK(fr.points[i].rate >= fr.points[i - 1].rate);
        CHECK(fr.points[i].kind == "R");
    }
    // Zero leakage is reachable by full randomization (R = 1 at lambda = 1/2).
    CHECK(fr.points[0].rate >= 1.0 - 1e-6);
}

TEST_CASE("candidate families produce feasible states", "[regions]") {
    const MaskingInstance inst(dephasing_channel({0.3, 0.1, 0.8}));
    Rng rng(6);
    for (auto fam : {CandidateFamily::controlled, CandidateFamily::product, CandidateFamily::free}) {
        const FamilyModel fm = make_family(inst, fam, fam == CandidateFamily::controlled ? std::optional<std::size_t>{}
                                                                                          : std::optional<std::size_t>{3});
        std::vector<double> x(fm.num_params);
        std::normal_distribution<double> normal;
        for (auto& v : x) v = normal(rng);
        const InputCandidate c = fm.build(x);
        INFO(to_string(fam));
        CHECK(feasibility_residual(inst, c.state) < 1e-9);
        CHECK(c.state.shape().dim(lbl::A) == fm.dim_a);
    }
    CHECK_THROWS_AS(make_family(inst, CandidateFamily::controlled, 3), ConfigError);
}

TEST_CASE("two-letter regularization doubles single-letter entropies", "[regions]") {
    const MaskingInstance one = erasure_instance(0.2);
    const MaskingInstance two = regularize(one, 2);
    CHECK(two.dim_ap() == 4);
    const InputCandidate c1{product_state(one, ComplexMatrix::projector(embedded_phi(2, 2)), 2), "product", {}};
    const InputCandidate c2{product_state(two, ComplexMatrix::projector(embedded_phi(4, 4)), 4), "product", {}};
    const auto e1 = evaluate_entropies(one, c1.state), e2 = evaluate_entropies(two, c2.state);
    CHECK_THAT(e2.I_AB, WithinAbs(2 * e1.I_AB, 1e-10));
    CHECK_THAT(e2.Icoh, WithinAbs(2 * e1.Icoh, 1e-10));
    CHECK_THROWS_AS(regularize(one, 3), ConfigError);
}

TEST_CASE("Hadamard outer evaluation", "[regions][property]") {
    const auto s = pure_candidate_identity_trials(20, 9);
    CHECK(s.worst <= 1e-9);
    // With a nontrivial C1, H(A|CK) only upper-bounds the coherent information.
    Rng rng(12);
    const HadamardSpec spec = random_hadamard_spec(2, 2, 2, 2, 4, rng);
    const HadamardChannel h = hadamard_channel(spec);
    const MaskingInstance inst(h.channel, default_triple_for(spec), h.dilation);
    for (int t = 0; t < 5; ++t) {
        const auto theta = haar_state(4, rng);
        const InputCandidate c{product_state(inst, ComplexMatrix::projector(theta), 2), "product", {}};
        const auto p = eval_hadamard_outer(inst, c);
        CHECK(p.entropies.H_A_given_CK >= p.entropies.Icoh - 1e-9);
        CHECK(p.flag.find("per-candidate upper-bound evaluation") != std::string::npos);
    }
}
