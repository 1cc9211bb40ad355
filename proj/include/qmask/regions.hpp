#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entropy.hpp"
#include "optimize.hpp"
#include "quantum.hpp"
#include "zoo.hpp"

namespace qmask {

struct MaskingInstance {
    KrausChannel channel;  // (env group, A') -> B
    ChannelStateTriple triple;
    std::optional<IsometricDilation> dilation;

    MaskingInstance() = default;
    MaskingInstance(KrausChannel ch, ChannelStateTriple tr, std::optional<IsometricDilation> dil = std::nullopt)
        : channel(std::move(ch)), triple(std::move(tr)), dilation(std::move(dil)) {
        validate();
    }
    explicit MaskingInstance(ChannelWithState cws, std::optional<IsometricDilation> dil = std::nullopt)
        : MaskingInstance(std::move(cws.channel), std::move(cws.triple), std::move(dil)) {}

    void validate() const {
        const auto& in = channel.in_shape();
        in.index_of(lbl::Ap);
        for (const auto& l : triple.env_group()) {
            if (!in.contains(l)) throw LabelError("channel input lacks environment label '" + l + "'");
            if (in.dim(l) != triple.state().shape().dim(l))
                throw ShapeError("channel and channel state disagree on dim " + l);
        }
        if (in.size() != triple.env_group().size() + 1)
            throw LabelError("channel inputs must be exactly the environment group and A'");
        if (dilation && dilation->in_shape() != in) throw ShapeError("dilation input differs from channel input");
    }

    Labels env() const { return triple.env_group(); }
    Labels outputs() const { return channel.out_shape().labels; }
    std::size_t dim_ap() const { return channel.in_shape().dim(lbl::Ap); }
};

inline bool is_maximally_correlated(const ChannelStateTriple& triple) {
    if (triple.has_purifier()) return false;
    const DensityOperator rho = triple.state().permuted({lbl::E, lbl::E0, lbl::C});
    const auto& d = rho.shape().dims;
    if (d[0] != d[1] || d[1] != d[2]) return false;
    const std::size_t n = d[0];
    const auto& m = rho.matrix();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (m(i, j) == cplx{}) continue;
            if (i != j) return false;
            const std::size_t s = i / (n * n), s0 = (i / n) % n, c = i % n;
            if (s != s0 || s != c) return false;
        }
    return true;
}

// Purify the channel state and absorb T into the environment group.
inline MaskingInstance lift_instance(const MaskingInstance& inst) {
    if (inst.triple.has_purifier()) return inst;
    ChannelStateTriple pure = purify_channel_state(inst.triple);
    const std::size_t dt = pure.state().shape().dim(lbl::T);
    return {lift_channel(inst.channel, dt), std::move(pure)};
}

// ---------------------------------------------------------------------------

struct InputCandidate {
    DensityOperator state;  // over (A, env group, A', C)
    std::string family;
    std::vector<double> params;
};

constexpr double kFeasibilityTol = 1e-8;

inline double feasibility_residual(const MaskingInstance& inst, const DensityOperator& rho) {
    Labels ec = inst.env();
    ec.push_back(lbl::C);
    return trace_distance_aligned(inst.triple.phi_EC(), rho.reduce(ec));
}

inline void require_feasible(const MaskingInstance& inst, const InputCandidate& cand) {
    const auto& s = cand.state.shape();
    s.index_of(lbl::A);
    s.index_of(lbl::Ap);
    s.index_of(lbl::C);
    if (feasibility_residual(inst, cand.state) > kFeasibilityTol)
        throw ConstraintError("candidate violates rho_EC = phi_EC");
}

struct RegionEntropies {
    double H_A_given_EC = 0;
    double Icoh = 0;      // I(A>B)
    double I_AB = 0;
    double I_A_EC = 0;
    double I_C_AB = 0;
    double H_C = 0;       // H(C)_phi
    double H_A_given_CK = std::numeric_limits<double>::quiet_NaN();
};

struct RateLeakagePoint {
    std::string kind = "Q";  // "Q" qubits/use or "R" bits/use
    double rate = 0;
    double leakage = 0;
    std::optional<double> re;
    RegionEntropies entropies;
    std::string family;
    std::vector<double> params;
    std::string flag;
};

// Entropies of the candidate and of its channel output rho_{A B C}.
inline RegionEntropies evaluate_entropies(const MaskingInstance& inst, const DensityOperator& rho,
                                          bool with_dilation = false) {
    RegionEntropies e;
    const Labels env = inst.env();
    Labels ec = env;
    ec.push_back(lbl::C);
    Labels aec = ec;
    aec.insert(aec.begin(), lbl::A);
    const double h_ec = entropy(rho, ec);
    const double h_aec = entropy(rho, aec);
    const double h_a = entropy(rho, {lbl::A});
    e.H_A_given_EC = h_aec - h_ec;
    e.I_A_EC = h_a + h_ec - h_aec;

    const DensityOperator out = apply_channel(inst.channel, rho);
    const Labels b = inst.outputs();
    Labels ab = b;
    ab.insert(ab.begin(), lbl::A);
    Labels abc = ab;
    abc.push_back(lbl::C);
    const double h_b = entropy(out, b);
    const double h_ab = entropy(out, ab);
    const double h_abc = entropy(out, abc);
    const double h_c = entropy(out, {lbl::C});
    e.Icoh = h_b - h_ab;
    e.I_AB = h_a + h_b - h_ab;
    e.I_C_AB = h_c + h_ab - h_abc;
    e.H_C = von_neumann(inst.triple.phi_C());

    if (with_dilation) {
        if (!inst.dilation) throw ConfigError("Hadamard outer bound needs a dilation");
        const DensityOperator full = inst.dilation->apply(rho);
        Labels ck{lbl::C};
        for (const auto& l : inst.dilation->env_labels())
            if (l != lbl::C1) ck.push_back(l);
        Labels ack = ck;
        ack.insert(ack.begin(), lbl::A);
        e.H_A_given_CK = entropy(full, ack) - entropy(full, ck);
    }
    return e;
}

inline std::string leakage_flag(double leakage, double h_c) {
    return leakage > 2.0 * h_c + 1e-9 ? "trivially satisfiable" : "";
}

inline std::string join_flags(std::initializer_list<std::string> parts) {
    std::string out;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        if (!out.empty()) out += "; ";
        out += p;
    }
    return out;
}

struct RateLimitedRegion {
    RegionEntropies entropies;
    double re_star = 0;  // H(A|EC)/2 - I(A>B)/2
    std::vector<RateLeakagePoint> corners;

    // Largest Q with Q + R_e <= H(A|EC) and Q - R_e <= I(A>B).
    double q_max(double re) const {
        return std::max(0.0, std::min(entropies.H_A_given_EC - re, entropies.Icoh + re));
    }
};

inline RateLimitedRegion eval_rate_limited(const MaskingInstance& inst, const InputCandidate& cand) {
    require_feasible(inst, cand);
    RateLimitedRegion reg;
    reg.entropies = evaluate_entropies(inst, cand.state);
    const double h = reg.entropies.H_A_given_EC, i = reg.entropies.Icoh;
    reg.re_star = 0.5 * h - 0.5 * i;
    auto corner = [&](double q, double re) {
        RateLeakagePoint p;
        p.rate = q;
        p.re = re;
        p.leakage = reg.entropies.I_C_AB;
        p.entropies = reg.entropies;
        p.family = cand.family;
        p.params = cand.params;
        reg.corners.push_back(std::move(p));
    };
    corner(std::max(0.0, std::min(h, i)), 0.0);
    if (h > i && h + i > 0) corner(0.5 * (h + i), 0.5 * (h - i));
    if (h > 0 && -h <= i) corner(0.0, h);
    return reg;
}

inline RateLeakagePoint eval_ea_point(const MaskingInstance& inst, const InputCandidate& cand,
                                      bool classical = false) {
    require_feasible(inst, cand);
    RateLeakagePoint p;
    p.entropies = evaluate_entropies(inst, cand.state);
    const double diff = p.entropies.I_AB - p.entropies.I_A_EC;
    p.kind = classical ? "R" : "Q";
    p.rate = std::max(0.0, classical ? diff : 0.5 * diff);
    p.leakage = p.entropies.I_C_AB;
    p.family = cand.family;
    p.params = cand.params;
    p.flag = join_flags({is_maximally_correlated(inst.triple) ? "" : "inner bound only",
                         leakage_flag(p.leakage, p.entropies.H_C)});
    return p;
}

inline RateLeakagePoint eval_unassisted_inner(const MaskingInstance& inst, const InputCandidate& cand) {
    require_feasible(inst, cand);
    RateLeakagePoint p;
    p.entropies = evaluate_entropies(inst, cand.state);
    p.rate = std::max(0.0, std::min(p.entropies.Icoh, p.entropies.H_A_given_EC));
    p.leakage = p.entropies.I_C_AB;
    p.family = cand.family;
    p.params = cand.params;
    p.flag = leakage_flag(p.leakage, p.entropies.H_C);
    return p;
}

inline RateLeakagePoint eval_hadamard_outer(const MaskingInstance& inst, const InputCandidate& cand) {
    if (!inst.dilation) throw ConfigError("Hadamard outer bound needs a dilation");
    require_feasible(inst, cand);
    RateLeakagePoint p;
    p.entropies = evaluate_entropies(inst, cand.state, true);
    p.rate = std::max(0.0, p.entropies.H_A_given_CK);
    p.leakage = p.entropies.I_C_AB;
    p.family = cand.family;
    p.params = cand.params;
    p.flag = join_flags({"per-candidate upper-bound evaluation", leakage_flag(p.leakage, p.entropies.H_C)});
    return p;
}

// ---------------------------------------------------------------------------
// Candidate families

enum class CandidateFamily { controlled, product, free };
enum class RegionObjective { ea_quantum, ea_classical, unassisted_inner, hadamard_outer };

inline std::string to_string(CandidateFamily f) {
    switch (f) {
        case CandidateFamily::controlled: return "controlled";
        case CandidateFamily::product: return "product";
        case CandidateFamily::free: return "free";
    }
    return "?";
}

inline std::string to_string(RegionObjective o) {
    switch (o) {
        case RegionObjective::ea_quantum: return "ea";
        case RegionObjective::ea_classical: return "ea-classical";
        case RegionObjective::unassisted_inner: return "unassisted-inner";
        case RegionObjective::hadamard_outer: return "hadamard-outer";
    }
    return "?";
}

// Probabilities q(s) of a maximally correlated state.
inline std::vector<double> correlated_weights(const ChannelStateTriple& triple) {
    if (!is_maximally_correlated(triple)) throw ConfigError("controlled family needs a maximally correlated state");
    const DensityOperator ec = triple.state().reduce({lbl::E, lbl::C}).permuted({lbl::E, lbl::C});
    const std::size_t n = ec.shape().dim(lbl::E);
    std::vector<double> q(n);
    for (std::size_t s = 0; s < n; ++s) q[s] = ec.matrix()(s * n + s, s * n + s).real();
    return q;
}

// sum_s q(s) |s><s|_E (x) |s><s|_C (x) omega^s_{A A'}, ordered (A, E, A', C).
inline DensityOperator controlled_state(const std::vector<double>& q, const std::vector<ComplexMatrix>& omega,
                                        std::size_t dim_a, std::size_t dim_ap) {
    const std::size_t n = q.size();
    if (omega.size() != n) throw ShapeError("one conditional state per value of s is required");
    const std::size_t dw = dim_a * dim_ap;
    SubsystemShape shape({lbl::E, lbl::C, lbl::A, lbl::Ap}, {n, n, dim_a, dim_ap});
    ComplexMatrix m(shape.total(), shape.total());
    for (std::size_t s = 0; s < n; ++s) {
        if (omega[s].rows() != dw || omega[s].cols() != dw) throw ShapeError("conditional state has the wrong size");
        const std::size_t base = (s * n + s) * dw;
        for (std::size_t i = 0; i < dw; ++i)
            for (std::size_t j = 0; j < dw; ++j) m(base + i, base + j) = q[s] * omega[s](i, j);
    }
    return DensityOperator(std::move(m), std::move(shape)).permuted({lbl::A, lbl::E, lbl::Ap, lbl::C});
}

// phi_EC (x) omega_{A A'}, ordered (A, env, A', C).
inline DensityOperator product_state(const MaskingInstance& inst, const ComplexMatrix& omega, std::size_t dim_a) {
    const DensityOperator phi = inst.triple.phi_EC();
    DensityOperator w(omega, SubsystemShape({lbl::A, lbl::Ap}, {dim_a, inst.dim_ap()}));
    Labels order{lbl::A};
    for (const auto& l : inst.env()) order.push_back(l);
    order.push_back(lbl::Ap);
    order.push_back(lbl::C);
    return tensor(phi, w).permuted(order);
}

// Maximally entangled |Phi> between A and A', embedded when dims differ.
inline std::vector<cplx> embedded_phi(std::size_t dim_a, std::size_t dim_ap) {
    const std::size_t r = std::min(dim_a, dim_ap);
    std::vector<cplx> v(dim_a * dim_ap);
    for (std::size_t i = 0; i < r; ++i) v[i * dim_ap + i] = 1.0 / std::sqrt(static_cast<double>(r));
    return v;
}

// exp(i H) with H Hermitian built from d^2 reals.
inline ComplexMatrix unitary_from_params(std::span<const double> p, std::size_t d) {
    ComplexMatrix h(d, d);
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i) h(i, i) = p[k++];
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            h(i, j) = cplx(p[k], p[k + 1]);
            h(j, i) = std::conj(h(i, j));
            k += 2;
        }
    return hermitian_function(h, [](double x) { return std::exp(cplx(0.0, x)); });
}

struct FamilyModel {
    CandidateFamily family;
    std::size_t dim_a = 0;
    std::size_t num_params = 0;
    std::function<InputCandidate(const std::vector<double>&)> build;
    std::vector<double> seed_params;  // structured starting point
};

// Family (a): per s, (1 - l_s) U_s Phi U_s^+ + l_s W_s Phi W_s^+ with l_s = sin^2(t_s), A of dim |A'|.
// Family (b): phi_EC (x) |w><w| with |w> on A A'.
// Family (c): pure extensions of phi_EC by an isometry from its purifier into A A'.
inline FamilyModel make_family(const MaskingInstance& inst, CandidateFamily family,
                               std::optional<std::size_t> dim_a_override = std::nullopt) {
    FamilyModel fm;
    fm.family = family;
    const std::size_t dap = inst.dim_ap();
    std::size_t default_a = dap * inst.triple.state().shape().dim_of(inst.env()) *
                            inst.triple.state().shape().dim(lbl::C);
    switch (family) {
        case CandidateFamily::controlled: {
            const auto q = correlated_weights(inst.triple);
            const std::size_t n = q.size();
            const std::size_t da = dim_a_override.value_or(dap);
            if (da != dap) throw ConfigError("controlled family uses |A| = |A'|");
            fm.dim_a = da;
            const std::size_t per = 2 * dap * dap + 1;
            fm.num_params = n * per;
            fm.seed_params.assign(fm.num_params, 0.0);
            fm.build = [q, n, dap, per](const std::vector<double>& x) {
                const auto phi = ComplexMatrix::projector(embedded_phi(dap, dap));
                std::vector<ComplexMatrix> omega;
                for (std::size_t s = 0; s < n; ++s) {
                    std::span<const double> p(x.data() + s * per, per);
                    const ComplexMatrix u = tensor_product(ComplexMatrix::identity(dap), unitary_from_params(p, dap));
                    const ComplexMatrix w =
                        tensor_product(ComplexMatrix::identity(dap), unitary_from_params(p.subspan(dap * dap), dap));
                    const double l = std::pow(std::sin(p[2 * dap * dap]), 2);
                    omega.push_back(u * phi * u.adjoint() * cplx(1.0 - l) + w * phi * w.adjoint() * cplx(l));
                }
                return InputCandidate{controlled_state(q, omega, dap, dap), "controlled", x};
            };
            break;
        }
        case CandidateFamily::product: {
            const std::size_t da = dim_a_override.value_or(default_a);
            fm.dim_a = da;
            const std::size_t dw = da * dap;
            fm.num_params = 2 * dw;
            const auto phi = embedded_phi(da, dap);
            fm.seed_params.resize(fm.num_params);
            for (std::size_t i = 0; i < dw; ++i) {
                fm.seed_params[2 * i] = phi[i].real();
                fm.seed_params[2 * i + 1] = phi[i].imag();
            }
            fm.build = [&inst, da, dw](const std::vector<double>& x) {
                std::vector<cplx> w(dw);
                for (std::size_t i = 0; i < dw; ++i) w[i] = cplx(x[2 * i], x[2 * i + 1]);
                const double nrm = vector_norm(w);
                if (nrm < 1e-9) throw ConditioningError("degenerate product candidate");
                for (auto& c : w) c /= nrm;
                return InputCandidate{product_state(inst, ComplexMatrix::projector(w), da), "product", x};
            };
            break;
        }
        case CandidateFamily::free: {
            const std::size_t da = dim_a_override.value_or(default_a);
            fm.dim_a = da;
            const std::size_t rank = phi_ec_rank(inst.triple);
            const std::size_t dext = da * dap;
            if (rank > dext) throw EmbeddingError("A A' too small to purify phi_EC");
            fm.num_params = 2 * dext * rank;
            fm.seed_params.assign(fm.num_params, 0.0);
            for (std::size_t k = 0; k < rank; ++k) fm.seed_params[2 * (k * rank + k)] = 1.0;
            fm.build = [&inst, da, dap, dext, rank](const std::vector<double>& x) {
                ComplexMatrix g(dext, rank);
                for (std::size_t i = 0; i < dext * rank; ++i) g.data()[i] = cplx(x[2 * i], x[2 * i + 1]);
                const ComplexMatrix iso = orthonormalize_columns(g);
                return InputCandidate{extension_from_isometry(inst.triple, iso, da, dap), "free", x};
            };
            break;
        }
    }
    return fm;
}

// ---------------------------------------------------------------------------
// Regularization over k = 2 uses of the channel.

// N (x) N with the two environment letters and the two A' letters merged.
inline MaskingInstance regularize(const MaskingInstance& inst, std::size_t k) {
    if (k == 1) return inst;
    if (k != 2) throw ConfigError("regularized evaluation supports k in {1, 2}");
    if (inst.triple.has_purifier()) throw ConfigError("regularize the unlifted instance");
    const auto& in = inst.channel.in_shape();
    const auto& out = inst.channel.out_shape();
    if (out.size() != 1) throw ShapeError("regularization expects a single output factor");
    const KrausChannel two = tensor(inst.channel.with_labels({"E_1", "A'_1"}, {"B_1"}),
                                    KrausChannel::unchecked(inst.channel.kraus_ops(),
                                                            SubsystemShape({"E_2", "A'_2"}, in.dims),
                                                            SubsystemShape({"B_2"}, out.dims)));
    const SubsystemShape two_in = two.in_shape();
    const auto col_map = detail::offsets(two_in, {"E_1", "E_2", "A'_1", "A'_2"});
    std::vector<ComplexMatrix> ops;
    for (const auto& op : two.kraus_ops()) {
        ComplexMatrix m(op.rows(), op.cols());
        for (std::size_t r = 0; r < op.rows(); ++r)
            for (std::size_t c = 0; c < op.cols(); ++c) m(r, c) = op(r, col_map[c]);
        ops.push_back(std::move(m));
    }
    const std::size_t de = in.dim(lbl::E), dap = in.dim(lbl::Ap);
    KrausChannel merged(std::move(ops), SubsystemShape({lbl::E, lbl::Ap}, {de * de, dap * dap}),
                        SubsystemShape({lbl::B}, {out.total() * out.total()}));

    const DensityOperator phi = inst.triple.state().permuted({lbl::E, lbl::E0, lbl::C});
    const DensityOperator p2 = tensor(phi.relabeled({lbl::E, lbl::E0, lbl::C}, {"E_1", "E0_1", "C_1"}),
                                      phi.relabeled({lbl::E, lbl::E0, lbl::C}, {"E_2", "E0_2", "C_2"}))
                                   .permuted({"E_1", "E_2", "E0_1", "E0_2", "C_1", "C_2"});
    const auto& d = phi.shape().dims;
    DensityOperator st(p2.matrix(), SubsystemShape({lbl::E, lbl::E0, lbl::C}, {d[0] * d[0], d[1] * d[1], d[2] * d[2]}));
    return {std::move(merged), ChannelStateTriple(std::move(st))};
}

// ---------------------------------------------------------------------------
// Optimization

struct OptimizeBudget {
    std::size_t restarts = 8;
    std::size_t max_evals = 6000;  // per restart and leakage level
    double initial_step = 0.25;
    double decay = 0.5;
    double floor = 1e-4;
    std::uint64_t seed = 0;
    std::optional<std::size_t> dim_a;
    double leakage_tol = 1e-7;  // slack on I(C;AB) <= L
};

struct OptimizeRequest {
    RegionObjective objective = RegionObjective::ea_quantum;
    CandidateFamily family = CandidateFamily::product;
    std::vector<double> leakage_grid;  // empty: unconstrained
    OptimizeBudget budget;
    std::size_t k = 1;
};

struct RegionFrontier {
    std::vector<RateLeakagePoint> points;  // nondecreasing in leakage level
    std::vector<double> levels;            // leakage constraint per point (inf: none)
    std::size_t dim_a = 0;
    std::size_t k = 1;
    bool budget_exhausted = false;
    std::string label = "achievable lower bound";
};

inline double objective_rate(RegionObjective obj, const RegionEntropies& e) {
    switch (obj) {
        case RegionObjective::ea_quantum: return 0.5 * (e.I_AB - e.I_A_EC);
        case RegionObjective::ea_classical: return e.I_AB - e.I_A_EC;
        case RegionObjective::unassisted_inner: return std::min(e.Icoh, e.H_A_given_EC);
        case RegionObjective::hadamard_outer: return e.H_A_given_CK;
    }
    return 0;
}

inline RegionFrontier optimize_region(const MaskingInstance& base, const OptimizeRequest& req) {
    const MaskingInstance inst = regularize(base, req.k);
    const bool dil = req.objective == RegionObjective::hadamard_outer;
    if (dil && !inst.dilation) throw ConfigError("Hadamard outer objective needs a dilation");
    const FamilyModel fm = make_family(inst, req.family, req.budget.dim_a);
    const double kk = static_cast<double>(req.k);

    std::vector<double> levels = req.leakage_grid;
    if (levels.empty()) levels.push_back(std::numeric_limits<double>::infinity());
    std::sort(levels.begin(), levels.end());

    RegionFrontier fr;
    fr.dim_a = fm.dim_a;
    fr.k = req.k;
    if (req.objective == RegionObjective::hadamard_outer) fr.label = "per-candidate upper-bound evaluation";
    const double h_c = von_neumann(inst.triple.phi_C());

    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double level = levels[li];
        double best_rate = -std::numeric_limits<double>::infinity();
        std::vector<double> best_x;
        RegionEntropies best_e;
        // Even restarts use the L1 penalty; odd restarts rank every infeasible
        // point below every feasible one, which reaches tight levels (L = 0)
        // that the penalty alone trades away for rate.
        bool feasibility_first = false;
        const Objective f = [&](const std::vector<double>& x) {
            RegionEntropies e;
            try {
                e = evaluate_entropies(inst, fm.build(x).state, dil);
            } catch (const NumericalError&) {
                return -std::numeric_limits<double>::infinity();
            } catch (const ValidationError&) {
                return -std::numeric_limits<double>::infinity();
            }
            const double rate = objective_rate(req.objective, e) / kk;
            const double excess = std::max(0.0, e.I_C_AB / kk - level);
            if (excess <= req.budget.leakage_tol && rate > best_rate) {
                best_rate = rate;
                best_x = x;
                best_e = e;
            }
            if (!std::isfinite(level)) return rate;
            if (feasibility_first) return excess <= req.budget.leakage_tol ? rate : -1e3 - excess;
            return rate - 50.0 * excess;
        };
        const std::size_t runs = std::isfinite(level) ? std::max<std::size_t>(2, req.budget.restarts) : req.budget.restarts;
        for (std::size_t r = 0; r < runs; ++r) {
            feasibility_first = r % 2 == 1;
            std::vector<double> x0 = fm.seed_params;
            if (r > 1 || (r == 1 && !std::isfinite(level))) {
                Rng rng(mix_seed(mix_seed(req.budget.seed, li), r));
                std::normal_distribution<double> normal(0.0, 1.0);
                for (auto& v : x0) v = normal(rng);
            }
            PatternSearchOptions ps;
            ps.initial_step = req.budget.initial_step;
            ps.decay = req.budget.decay;
            ps.floor = req.budget.floor;
            ps.max_evals = req.budget.max_evals;
            const auto res = pattern_search(f, x0, ps);
            fr.budget_exhausted = fr.budget_exhausted || res.budget_exhausted;
        }
        RateLeakagePoint p;
        p.kind = req.objective == RegionObjective::ea_classical ? "R" : "Q";
        p.family = to_string(req.family);
        if (std::isfinite(best_rate)) {
            p.rate = std::max(0.0, best_rate);
            p.leakage = best_e.I_C_AB / kk;
            p.entropies = best_e;
            p.params = best_x;
            if (req.objective == RegionObjective::ea_quantum || req.objective == RegionObjective::ea_classical)
                p.re = 0.5 * (best_e.H_A_given_EC - best_e.Icoh) / kk;
        } else {
            p.rate = 0.0;
            p.leakage = std::numeric_limits<double>::quiet_NaN();
        }
        std::string flag = fr.label;
        if (std::isfinite(level) && level > 2.0 * h_c + 1e-9) flag = join_flags({flag, "trivially satisfiable"});
        if ((req.objective == RegionObjective::ea_quantum || req.objective == RegionObjective::ea_classical) &&
            !is_maximally_correlated(base.triple))
            flag = join_flags({flag, "inner bound only"});
        if (fr.budget_exhausted) flag = join_flags({flag, "budget"});
        p.flag = flag;
        // Monotone envelope: a point feasible at a lower level stays feasible.
        if (!fr.points.empty() && fr.points.back().rate > p.rate) {
            RateLeakagePoint carried = fr.points.back();
            carried.flag = p.flag;
            p = std::move(carried);
        }
        fr.points.push_back(std::move(p));
        fr.levels.push_back(level);
    }
    return fr;
}

// ---------------------------------------------------------------------------
// Dephasing example

// (1 - lambda) Phi + lambda (1 (x) Z) Phi (1 (x) Z) on (A, A').
inline ComplexMatrix preflip_mixture(double lambda, bool flipped_base) {
    const auto phi = ComplexMatrix::projector(embedded_phi(2, 2));
    const ComplexMatrix z = tensor_product(ComplexMatrix::identity(2), pauli_z());
    const ComplexMatrix zphi = z * phi * z;
    const ComplexMatrix& base = flipped_base ? zphi : phi;
    const ComplexMatrix& other = flipped_base ? phi : zphi;
    return base * cplx(1.0 - lambda) + other * cplx(lambda);
}

// Unconditioned pre-flip: phi_EC (x) [(1 - l) Phi + l Z Phi Z].
inline InputCandidate dephasing_r0_candidate(const DephasingSpec& spec, double lambda) {
    const ComplexMatrix w = preflip_mixture(lambda, false);
    return {controlled_state({1.0 - spec.q, spec.q}, {w, w}, 2, 2), "controlled", {lambda}};
}

// State-aware pre-flip: s = 0 as above; s = 1 starts from Z Phi Z.
inline InputCandidate dephasing_r1_candidate(const DephasingSpec& spec, double lambda) {
    return {controlled_state({1.0 - spec.q, spec.q}, {preflip_mixture(lambda, false), preflip_mixture(lambda, true)},
                             2, 2),
            "controlled",
            {lambda}};
}

struct ClosedFormRow {
    double lambda = 0;
    double rate = 0;
    double leakage = 0;
};

struct DephasingClosedForm {
    std::vector<ClosedFormRow> r0, r1, quantum;
    bool in_regime = true;  // eps0 <= 1/2 <= eps1
    std::string flag;
};

inline DephasingClosedForm dephasing_closed_form(const DephasingSpec& spec, const std::vector<double>& lambda_grid) {
    spec.validate();
    DephasingClosedForm out;
    out.in_regime = spec.eps0 <= 0.5 && 0.5 <= spec.eps1;
    if (!out.in_regime) out.flag = "outside eps0 <= 1/2 <= eps1";
    const double q = spec.q;
    for (double l : lambda_grid) {
        if (!(l >= 0.0 && l <= 1.0)) throw DomainError("lambda outside [0,1]");
        const double cond = (1.0 - q) * h2(star(l, spec.eps0)) + q * h2(star(l, spec.eps1));
        const double hb = h2(star(l, spec.eps_bar()));
        const double hh = h2(star(l, spec.eps_hat()));
        out.r0.push_back({l, 2.0 - hb, hb - cond});
        out.r1.push_back({l, 2.0 - hh, hh - cond});
        out.quantum.push_back({l, 1.0 - hh, hh - cond});
    }
    return out;
}

}  // namespace qmask
