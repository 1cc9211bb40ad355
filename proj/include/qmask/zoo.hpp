#pragma once

#include <optional>
#include <string>
#include <vector>

#include "entropy.hpp"
#include "quantum.hpp"

namespace qmask {

// A state-dependent channel (E, A') -> B together with its channel state.
struct ChannelWithState {
    KrausChannel channel;
    ChannelStateTriple triple;
};

// Lift a channel A' -> B to (E, A') -> B with a trivial one-dimensional state.
inline ChannelWithState without_state(const KrausChannel& ch) {
    if (ch.in_shape().size() != 1) throw ShapeError("expected a single-factor input");
    std::vector<ComplexMatrix> ops = ch.kraus_ops();
    KrausChannel lifted(std::move(ops), SubsystemShape({lbl::E}, {1}).concat(ch.in_shape()), ch.out_shape());
    return {std::move(lifted), maximally_correlated({1.0})};
}

// ---------------------------------------------------------------------------
// Dephasing

struct DephasingSpec {
    double q = 0.0;
    double eps0 = 0.0;
    double eps1 = 0.0;

    void validate() const {
        if (!(q >= 0.0 && q <= 0.5)) throw DomainError("q must lie in [0, 0.5]");
        if (!(eps0 >= 0.0 && eps0 <= 1.0)) throw DomainError("eps0 must lie in [0, 1]");
        if (!(eps1 >= 0.0 && eps1 <= 1.0)) throw DomainError("eps1 must lie in [0, 1]");
    }
    double eps_bar() const { return (1.0 - q) * eps0 + q * eps1; }
    double eps_hat() const { return (1.0 - q) * eps0 + q * (1.0 - eps1); }
};

inline const ComplexMatrix& pauli_x() {
    static const ComplexMatrix m{{0, 1}, {1, 0}};
    return m;
}
inline const ComplexMatrix& pauli_y() {
    static const ComplexMatrix m{{0, cplx(0, -1)}, {cplx(0, 1), 0}};
    return m;
}
inline const ComplexMatrix& pauli_z() {
    static const ComplexMatrix m{{1, 0}, {0, -1}};
    return m;
}

// P(rho) = (1 - eps) rho + eps Z rho Z on A' -> B.
inline KrausChannel dephasing_qubit(double eps, const std::string& in = lbl::Ap, const std::string& out = lbl::B) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("dephasing parameter outside [0,1]");
    return {{ComplexMatrix::identity(2) * cplx(std::sqrt(1.0 - eps)), pauli_z() * cplx(std::sqrt(eps))},
            SubsystemShape({in}, {2}),
            SubsystemShape({out}, {2})};
}

// Block channel: P^(s) applied to A' when E is |s>. Kraus order (s, flip).
inline ChannelWithState dephasing_channel(const DephasingSpec& spec) {
    spec.validate();
    std::vector<ComplexMatrix> ops;
    const double eps[2] = {spec.eps0, spec.eps1};
    for (std::size_t s = 0; s < 2; ++s) {
        for (int flip = 0; flip < 2; ++flip) {
            const double w = std::sqrt(flip ? eps[s] : 1.0 - eps[s]);
            const ComplexMatrix& p = flip ? pauli_z() : ComplexMatrix::identity(2);
            ComplexMatrix k(2, 4);
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t c = 0; c < 2; ++c) k(r, s * 2 + c) = w * p(r, c);
            ops.push_back(std::move(k));
        }
    }
    KrausChannel ch(std::move(ops), SubsystemShape({lbl::E, lbl::Ap}, {2, 2}), SubsystemShape({lbl::B}, {2}));
    return {std::move(ch), maximally_correlated({1.0 - spec.q, spec.q})};
}

// ---------------------------------------------------------------------------
// Erasure

// P(rho) = (1 - eps) rho + eps |e><e|; the flag |e> is basis index 2 of B.
inline KrausChannel erasure_channel(double eps, const std::string& in = lbl::Ap, const std::string& out = lbl::B) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("erasure probability outside [0,1]");
    ComplexMatrix keep(3, 2), e0(3, 2), e1(3, 2);
    keep(0, 0) = keep(1, 1) = std::sqrt(1.0 - eps);
    e0(2, 0) = e1(2, 1) = std::sqrt(eps);
    return {{keep, e0, e1}, SubsystemShape({in}, {2}), SubsystemShape({out}, {3})};
}

// ---------------------------------------------------------------------------
// Hadamard channels

// V = sum_x |eta^x>_{C1 K} <zeta^x|_{E A'} (x) |psi^x>_B
struct HadamardSpec {
    std::vector<std::vector<cplx>> eta;   // over eta_shape, unit norm
    std::vector<std::vector<cplx>> zeta;  // over zeta_shape, sum |z><z| = I
    std::vector<std::vector<cplx>> psi;   // orthonormal basis of psi_shape
    SubsystemShape eta_shape{{lbl::C1, lbl::K}, {1, 1}};
    SubsystemShape zeta_shape{{lbl::E, lbl::Ap}, {1, 1}};
    SubsystemShape psi_shape{{lbl::B}, {1}};

    std::size_t size() const { return psi.size(); }

    void validate() const {
        eta_shape.validate();
        zeta_shape.validate();
        psi_shape.validate();
        const std::size_t n = psi.size();
        if (n == 0 || eta.size() != n || zeta.size() != n)
            throw ValidationError("Hadamard spec needs equally many eta, zeta and psi vectors");
        if (n != psi_shape.total()) throw ValidationError("psi vectors must form a basis of B");
        for (std::size_t x = 0; x < n; ++x) {
            if (eta[x].size() != eta_shape.total() || zeta[x].size() != zeta_shape.total() ||
                psi[x].size() != psi_shape.total())
                throw ShapeError("Hadamard spec vector has the wrong length");
            if (std::abs(vector_norm(eta[x]) - 1.0) > 1e-9) throw ValidationError("eta vector is not normalized");
        }
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y)
                if (std::abs(inner(psi[x], psi[y]) - (x == y ? 1.0 : 0.0)) > 1e-9)
                    throw ValidationError("psi vectors are not orthonormal");
        const std::size_t dz = zeta_shape.total();
        ComplexMatrix s(dz, dz);
        for (const auto& z : zeta) s += ComplexMatrix::projector(z);
        if (max_abs_diff(s, ComplexMatrix::identity(dz)) > 1e-9)
            throw CompletenessError("zeta projectors do not resolve the identity");
    }
};

struct HadamardChannel {
    KrausChannel channel;
    IsometricDilation dilation;  // outputs (B, C1, K); environment (C1, K)
};

inline ComplexMatrix hadamard_isometry(const HadamardSpec& spec) {
    spec.validate();
    const std::size_t db = spec.psi_shape.total(), de = spec.eta_shape.total(), dz = spec.zeta_shape.total();
    check_dim(db * de, "hadamard_channel");
    ComplexMatrix v(db * de, dz);
    for (std::size_t x = 0; x < spec.size(); ++x)
        for (std::size_t b = 0; b < db; ++b) {
            if (spec.psi[x][b] == cplx{}) continue;
            for (std::size_t e = 0; e < de; ++e) {
                const cplx pe = spec.psi[x][b] * spec.eta[x][e];
                if (pe == cplx{}) continue;
                for (std::size_t i = 0; i < dz; ++i) v(b * de + e, i) += pe * std::conj(spec.zeta[x][i]);
            }
        }
    return v;
}

inline HadamardChannel hadamard_channel(const HadamardSpec& spec) {
    IsometricDilation dil(hadamard_isometry(spec), spec.zeta_shape, spec.psi_shape.concat(spec.eta_shape),
                          spec.eta_shape.labels);
    KrausChannel ch = dil.channel();
    if (ch.completeness_residual() > 1e-6) throw CompletenessError("Hadamard spec does not define a channel");
    return {std::move(ch), std::move(dil)};
}

// Measure in the psi basis and prepare eta^x: B -> (C1, K).
inline KrausChannel hadamard_degrader(const HadamardSpec& spec) {
    spec.validate();
    std::vector<ComplexMatrix> ops;
    for (std::size_t x = 0; x < spec.size(); ++x) ops.push_back(ComplexMatrix::outer(spec.eta[x], spec.psi[x]));
    return {std::move(ops), spec.psi_shape, spec.eta_shape};
}

// L: measure in the psi basis, keep psi^x and append eta^x: B -> (B, C1, K).
inline KrausChannel hadamard_L_map(const HadamardSpec& spec) {
    spec.validate();
    std::vector<ComplexMatrix> ops;
    for (std::size_t x = 0; x < spec.size(); ++x)
        ops.push_back(ComplexMatrix::outer(tensor_product(spec.psi[x], spec.eta[x]), spec.psi[x]));
    return {std::move(ops), spec.psi_shape, spec.psi_shape.concat(spec.eta_shape)};
}

// Single-letter dephasing P_eps as a Hadamard channel: E and C1 trivial,
// eta^x = sqrt(1-eps)|0> + (-1)^x sqrt(eps)|1> on K.
inline HadamardSpec dephasing_hadamard_spec(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("dephasing parameter outside [0,1]");
    HadamardSpec spec;
    spec.zeta_shape = SubsystemShape({lbl::E, lbl::Ap}, {1, 2});
    spec.psi_shape = SubsystemShape({lbl::B}, {2});
    spec.eta_shape = SubsystemShape({lbl::C1, lbl::K}, {1, 2});
    const double a = std::sqrt(1.0 - eps), b = std::sqrt(eps);
    spec.zeta = {{1, 0}, {0, 1}};
    spec.psi = {{1, 0}, {0, 1}};
    spec.eta = {{a, b}, {a, -b}};
    return spec;
}

// Random valid spec: zeta from a Haar isometry frame, psi a Haar basis of B
// with dim B = |X| >= dim(E A'), eta Haar-random states on (C1, K).
inline HadamardSpec random_hadamard_spec(std::size_t de, std::size_t dap, std::size_t dc1, std::size_t dk,
                                         std::size_t db, Rng& rng) {
    const std::size_t dz = de * dap;
    if (db < dz) throw ValidationError("dim B must be at least dim(E A')");
    HadamardSpec spec;
    spec.zeta_shape = SubsystemShape({lbl::E, lbl::Ap}, {de, dap});
    spec.psi_shape = SubsystemShape({lbl::B}, {db});
    spec.eta_shape = SubsystemShape({lbl::C1, lbl::K}, {dc1, dk});
    const ComplexMatrix w = haar_isometry(db, dz, rng);  // rows indexed by x
    const ComplexMatrix u = haar_unitary(db, rng);
    for (std::size_t x = 0; x < db; ++x) {
        std::vector<cplx> z(dz);
        for (std::size_t i = 0; i < dz; ++i) z[i] = std::conj(w(x, i));
        spec.zeta.push_back(std::move(z));
        spec.psi.push_back(u.column_vector(x));
        spec.eta.push_back(haar_state(dc1 * dk, rng));
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Random inputs honoring rho_EC = phi_EC

struct ExtensionOptions {
    std::size_t dim_a = 2;
    std::size_t max_batch = 3;
};

// rho over (A, <env group>, A', C): a mixture of 1..max_batch random
// purifications of phi_EC, each an isometry from the purifying space into A A'.
inline DensityOperator sample_extension(const ChannelStateTriple& triple, std::size_t dim_ap, Rng& rng,
                                        const ExtensionOptions& opt = {}) {
    const DensityOperator phi = triple.phi_EC();
    const auto eig = hermitian_eig(phi.matrix());
    std::size_t rank = 0;
    for (double v : eig.values)
        if (v > 1e-12) ++rank;
    const std::size_t dext = opt.dim_a * dim_ap;
    if (rank > dext) throw EmbeddingError("ancillas too small to purify phi_EC");
    const std::size_t dphi = phi.dim();
    SubsystemShape shape = phi.shape().concat(SubsystemShape({lbl::A, lbl::Ap}, {opt.dim_a, dim_ap}));
    std::uniform_int_distribution<std::size_t> pick(1, std::max<std::size_t>(1, opt.max_batch));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t batch = pick(rng);
    std::vector<double> weights(batch);
    double total = 0;
    for (auto& w : weights) total += (w = batch == 1 ? 1.0 : 0.05 + unif(rng));
    ComplexMatrix rho(shape.total(), shape.total());
    for (std::size_t m = 0; m < batch; ++m) {
        const ComplexMatrix iso = haar_isometry(dext, rank, rng);
        std::vector<cplx> v(shape.total());
        for (std::size_t k = 0; k < rank; ++k) {
            const double w = std::sqrt(std::max(0.0, eig.values[k]));
            for (std::size_t i = 0; i < dphi; ++i) {
                const cplx c = w * eig.vectors(i, k);
                if (c == cplx{}) continue;
                for (std::size_t j = 0; j < dext; ++j) v[i * dext + j] += c * iso(j, k);
            }
        }
        rho += ComplexMatrix::projector(v) * cplx(weights[m] / total);
    }
    Labels order{lbl::A};
    for (const auto& l : triple.env_group()) order.push_back(l);
    order.push_back(lbl::Ap);
    order.push_back(lbl::C);
    return DensityOperator(std::move(rho), std::move(shape)).permuted(order);
}

// Pure extension psi over (A, <env group>, A', C) from an explicit isometry
// (purifier -> A A'); used by parameterized candidate families.
inline DensityOperator extension_from_isometry(const ChannelStateTriple& triple, const ComplexMatrix& iso,
                                               std::size_t dim_a, std::size_t dim_ap) {
    const DensityOperator phi = triple.phi_EC();
    const auto eig = hermitian_eig(phi.matrix());
    const std::size_t dext = dim_a * dim_ap;
    if (iso.rows() != dext) throw ShapeError("isometry does not map into A A'");
    const std::size_t dphi = phi.dim();
    SubsystemShape shape = phi.shape().concat(SubsystemShape({lbl::A, lbl::Ap}, {dim_a, dim_ap}));
    std::vector<cplx> v(shape.total());
    for (std::size_t k = 0; k < iso.cols() && k < eig.values.size(); ++k) {
        const double w = std::sqrt(std::max(0.0, eig.values[k]));
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < dphi; ++i) {
            const cplx c = w * eig.vectors(i, k);
            if (c == cplx{}) continue;
            for (std::size_t j = 0; j < dext; ++j) v[i * dext + j] += c * iso(j, k);
        }
    }
    Labels order{lbl::A};
    for (const auto& l : triple.env_group()) order.push_back(l);
    order.push_back(lbl::Ap);
    order.push_back(lbl::C);
    return DensityOperator(ComplexMatrix::projector(v), std::move(shape)).permuted(order);
}

inline std::size_t phi_ec_rank(const ChannelStateTriple& triple) {
    std::size_t rank = 0;
    for (double v : hermitian_eigenvalues(triple.phi_EC().matrix()))
        if (v > 1e-12) ++rank;
    return rank;
}

// ---------------------------------------------------------------------------
// Class checks. These sample inputs; they can exhibit violations but never
// certify membership.

struct LessNoisyReport {
    std::size_t trials = 0;
    std::size_t violations = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();  // max of H(A|B) - H(A|KC)
    std::string caveat = "canonical dilation only; no violation found means none in the sampled trials";
};

inline LessNoisyReport check_less_noisy(const IsometricDilation& dil, const ChannelStateTriple& triple,
                                        std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    LessNoisyReport rep;
    rep.trials = trials;
    const std::size_t dap = dil.in_shape().dim(lbl::Ap);
    Labels kc = dil.env_labels();
    kc.push_back(lbl::C);
    const Labels b = dil.output_labels();
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const DensityOperator rho = sample_extension(triple, dap, rng);
        const DensityOperator out = dil.apply(rho);
        const double margin = conditional_entropy(out, {lbl::A}, b) - conditional_entropy(out, {lbl::A}, kc);
        rep.worst_margin = std::max(rep.worst_margin, margin);
        if (margin > 1e-8) ++rep.violations;
    }
    return rep;
}

// max ||N^c(rho) - D(N(rho))||_1 over sampled rho (full joint state kept).
inline double check_degradable(const IsometricDilation& dil, const KrausChannel& degrader,
                               const ChannelStateTriple& triple, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    const KrausChannel n = dil.channel();
    const KrausChannel nc = complementary(dil);
    const std::size_t dap = dil.in_shape().dim(lbl::Ap);
    double worst = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const DensityOperator rho = sample_extension(triple, dap, rng);
        const DensityOperator lhs = apply_channel(nc, rho);
        const DensityOperator rhs = apply_channel(degrader, apply_channel(n, rho));
        worst = std::max(worst, trace_distance_aligned(lhs, rhs));
    }
    return worst;
}

// max ||V rho V^dagger - L(N(rho))||_1 over sampled rho, for a dilation V
// with main output B and a map L: B -> (B, env).
inline double l_check(const IsometricDilation& dil, const KrausChannel& l_map, const ChannelStateTriple& triple,
                      std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    const KrausChannel n = dil.channel();
    const std::size_t dap = dil.in_shape().dim(lbl::Ap);
    double worst = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(mix_seed(seed, t));
        const DensityOperator rho = sample_extension(triple, dap, rng);
        const DensityOperator lhs = dil.apply(rho);
        const DensityOperator rhs = apply_channel(l_map, apply_channel(n, rho));
        worst = std::max(worst, trace_distance_aligned(lhs, rhs));
    }
    return worst;
}

inline ChannelStateTriple default_triple_for(const HadamardSpec& spec) {
    const std::size_t de = spec.zeta_shape.dim(lbl::E);
    return maximally_correlated(std::vector<double>(de, 1.0 / static_cast<double>(de)));
}

inline double hadamard_L_check(const HadamardSpec& spec, std::size_t trials, std::uint64_t seed,
                               const std::optional<ChannelStateTriple>& triple = std::nullopt) {
    const HadamardChannel h = hadamard_channel(spec);
    return l_check(h.dilation, hadamard_L_map(spec), triple ? *triple : default_triple_for(spec), trials, seed);
}

}  // namespace qmask
