#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "decoupling.hpp"
#include "entropy.hpp"
#include "regions.hpp"
#include "zoo.hpp"

namespace qmask {

// Randomized property checks shared by the CLI and the acceptance runner.
// `worst` is the largest residual (or bound excess) seen over all trials.
struct TrialSummary {
    std::string name;
    std::size_t trials = 0;
    double worst = 0;
    double tolerance = 0;
    bool pass = false;
    std::string note;
};

inline DensityOperator random_density(const SubsystemShape& shape, Rng& rng, std::size_t rank = 0) {
    const std::size_t d = shape.total();
    if (rank == 0 || rank > d) rank = d;
    const ComplexMatrix g = gaussian_matrix(d, rank, rng);
    ComplexMatrix m = g * g.adjoint();
    m *= cplx(1.0 / m.trace().real());
    return {std::move(m), shape};
}

inline PureState random_pure(const SubsystemShape& shape, Rng& rng) { return {haar_state(shape.total(), rng), shape}; }

namespace detail {
inline TrialSummary finish(TrialSummary s) {
    s.pass = s.worst <= s.tolerance;
    return s;
}
inline std::size_t small_dim(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}
}  // namespace detail

inline TrialSummary op_swap_trials(std::size_t trials, std::uint64_t seed) {
    TrialSummary s{"op-swap", trials, 0, 1e-10, false, {}};
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const std::size_t da = detail::small_dim(rng, 2, 3), db = detail::small_dim(rng, 2, 3),
                          dc = detail::small_dim(rng, 2, 3);
        const PureState psi = random_pure(SubsystemShape({lbl::A, lbl::B}, {da, db}), rng);
        const PureState theta = random_pure(SubsystemShape({lbl::A, lbl::C}, {da, dc}), rng);
        s.worst = std::max(s.worst, op_swap_residual(psi, theta, lbl::A, lbl::B, lbl::C));
    }
    return detail::finish(s);
}

inline TrialSummary op_transfer_trials(std::size_t trials, std::uint64_t seed) {
    TrialSummary s{"op-transfer", trials, 0, 1e-10, false, {}};
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const std::size_t da = detail::small_dim(rng, 2, 4), db = detail::small_dim(rng, 2, 4);
        const PureState psi = random_pure(SubsystemShape({lbl::A, lbl::B}, {da, db}), rng);
        s.worst = std::max(s.worst, op_transfer_residual(psi, lbl::A, lbl::B));
    }
    return detail::finish(s);
}

// Excess over -log|B| <= H_min(A|B) <= H(A|B) <= log|A|.
inline TrialSummary min_entropy_bracket_trials(std::size_t trials, std::uint64_t seed,
                                               const MinEntropyOptions& opt = {2, 0, 1500}) {
    TrialSummary s{"min-entropy-bracket", trials, 0, 1e-9, false, {}};
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const std::size_t da = detail::small_dim(rng, 2, 3), db = detail::small_dim(rng, 2, 3);
        const std::size_t rank = detail::small_dim(rng, 1, da * db);
        const DensityOperator rho = random_density(SubsystemShape({lbl::A, lbl::B}, {da, db}), rng, rank);
        MinEntropyOptions o = opt;
        o.seed = mix_seed(seed ^ 0x5EEDULL, t);
        const MinEntropyResult r = min_entropy(rho, {lbl::B}, o);
        const double hc = conditional_entropy(rho, {lbl::A}, {lbl::B});
        const double lo = -std::log2(static_cast<double>(db)), hi = std::log2(static_cast<double>(da));
        s.worst = std::max({s.worst, lo - r.value, r.value - hc, hc - hi});
    }
    return detail::finish(s);
}

// Csiszar sum identity on random states over A_1..A_n, B_1..B_n (qubits).
inline TrialSummary csiszar_trials(std::size_t trials, std::uint64_t seed, std::size_t n = 2) {
    TrialSummary s{"csiszar-sum", trials, 0, 1e-9, false, {}};
    const Labels a = lbl::indexed(lbl::A, 1, n), b = lbl::indexed(lbl::B, 1, n);
    Labels all = a;
    all.insert(all.end(), b.begin(), b.end());
    const SubsystemShape shape(all, std::vector<std::size_t>(2 * n, 2));
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const DensityOperator rho = random_density(shape, rng, detail::small_dim(rng, 1, 4));
        s.worst = std::max(s.worst, csiszar_sum_check(rho, a, b).residual);
    }
    return detail::finish(s);
}

// Random pairs: achieved - 2 sqrt(marginal distance), worst case.
inline TrialSummary uhlmann_trials(std::size_t trials, std::uint64_t seed) {
    TrialSummary s{"uhlmann-bound", trials, 0, 1e-9, false, {}};
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        // F: B -> C needs |C| >= Schmidt rank of psi.
        const std::size_t da = detail::small_dim(rng, 2, 3), db = detail::small_dim(rng, 2, 4),
                          dc = std::min(da, db) + detail::small_dim(rng, 0, 2);
        const PureState psi = random_pure(SubsystemShape({lbl::A, lbl::B}, {da, db}), rng);
        const PureState theta = random_pure(SubsystemShape({lbl::A, lbl::C}, {da, dc}), rng);
        const UhlmannResult r = uhlmann_isometry(psi, theta, {lbl::A});
        s.worst = std::max(s.worst, r.achieved_distance - r.bound);
    }
    return detail::finish(s);
}

// theta = (I (x) W) psi for a random isometry W: B -> C; recovery distance.
inline TrialSummary uhlmann_equal_marginal_trials(std::size_t trials, std::uint64_t seed) {
    TrialSummary s{"uhlmann-equal-marginals", trials, 0, 1e-8, false, {}};
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const std::size_t da = detail::small_dim(rng, 2, 3), db = detail::small_dim(rng, 2, 3),
                          dc = db + detail::small_dim(rng, 0, 2);
        const PureState psi = random_pure(SubsystemShape({lbl::A, lbl::B}, {da, db}), rng);
        const ComplexMatrix w = haar_isometry(dc, db, rng);
        const PureState theta = psi.apply(w, {lbl::B}, SubsystemShape({lbl::C}, {dc}));
        const UhlmannResult r = uhlmann_isometry(psi, theta, {lbl::A});
        s.worst = std::max(s.worst, r.achieved_distance);
    }
    return detail::finish(s);
}

inline TrialSummary hadamard_L_trials(const HadamardSpec& spec, std::size_t trials, std::uint64_t seed,
                                      const std::string& name = "hadamard-L") {
    TrialSummary s{name, trials, 0, 1e-8, false, {}};
    s.worst = hadamard_L_check(spec, trials, seed);
    return detail::finish(s);
}

inline TrialSummary hadamard_degrader_trials(const HadamardSpec& spec, std::size_t trials, std::uint64_t seed,
                                             const std::string& name = "hadamard-degrader") {
    TrialSummary s{name, trials, 0, 1e-9, false, {}};
    const HadamardChannel h = hadamard_channel(spec);
    s.worst = check_degradable(h.dilation, hadamard_degrader(spec), default_triple_for(spec), trials, seed);
    return detail::finish(s);
}

// Hadamard instance with |C1| = 1 and a pure channel state phi_EC (E0 trivial).
inline MaskingInstance pure_state_hadamard_instance(Rng& rng, std::size_t de = 2, std::size_t dap = 2,
                                                    std::size_t dk = 2, std::size_t db = 4) {
    const HadamardSpec spec = random_hadamard_spec(de, dap, 1, dk, db, rng);
    const HadamardChannel h = hadamard_channel(spec);
    const std::vector<cplx> v = haar_state(de * de, rng);
    ComplexMatrix m = ComplexMatrix::projector(v);
    ChannelStateTriple triple(
        DensityOperator(std::move(m), SubsystemShape({lbl::E, lbl::E0, lbl::C}, {de, 1, de})));
    return {h.channel, std::move(triple), h.dilation};
}

// |H(A|CK) - I(A>B)| for pure candidates phi_EC (x) theta_{AA'}.
inline TrialSummary pure_candidate_identity_trials(std::size_t trials, std::uint64_t seed) {
    TrialSummary s{"pure-candidate-identity", trials, 0, 1e-9, false, {}};
    s.note = "|C1| = 1, pure phi_EC";
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const MaskingInstance inst = pure_state_hadamard_instance(rng);
        const std::size_t dap = inst.dim_ap(), da = detail::small_dim(rng, 2, 4);
        const auto theta = haar_state(da * dap, rng);
        const InputCandidate cand{product_state(inst, ComplexMatrix::projector(theta), da), "product", {}};
        const RegionEntropies e = evaluate_entropies(inst, cand.state, true);
        s.worst = std::max(s.worst, std::abs(e.H_A_given_CK - e.Icoh));
    }
    return detail::finish(s);
}

}  // namespace qmask
