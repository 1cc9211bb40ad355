#pragma once

#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "entropy.hpp"
#include "regions.hpp"
#include "zoo.hpp"

namespace qmask {

constexpr std::size_t kHarnessDimCap = std::size_t{1} << 12;

// Encoder: subsets of (M, GA, E0_1..E0_n) -> (A'_1..A'_n).
// Decoder: subsets of (B_1..B_n, GB) -> Mhat.
// For n = 1 the plain labels E0, A', B are accepted and renamed to E0_1, A'_1, B_1.
struct CodeSpec {
    std::size_t n = 1;
    std::optional<PureState> entangled_state;  // over (GA, GB); absent means no assistance
    KrausChannel encoder;
    KrausChannel decoder;

    std::size_t dim_m() const { return encoder.in_shape().contains(lbl::M) ? encoder.in_shape().dim(lbl::M) : 1; }
    std::size_t dim_g() const { return entangled_state ? entangled_state->shape().dim(lbl::GA) : 1; }
    double Q() const { return std::log2(static_cast<double>(dim_m())) / static_cast<double>(n); }
    double R_e() const { return std::log2(static_cast<double>(dim_g())) / static_cast<double>(n); }

    void normalize_labels() {
        if (n != 1) return;
        auto rename = [](const SubsystemShape& s) {
            Labels l = s.labels;
            for (auto& x : l)
                if (x == lbl::E0 || x == lbl::Ap || x == lbl::B || x == lbl::T) x = lbl::indexed(x, 1);
            return l;
        };
        encoder = encoder.with_labels(rename(encoder.in_shape()), rename(encoder.out_shape()));
        decoder = decoder.with_labels(rename(decoder.in_shape()), decoder.out_shape().labels);
    }

    void validate(const MaskingInstance& inst) const {
        if (n < 1) throw ConfigError("blocklength must be at least 1");
        auto is_pow2 = [](std::size_t d) { return d > 0 && (d & (d - 1)) == 0; };
        const std::size_t dm = dim_m();
        if (!is_pow2(dm) || (static_cast<std::size_t>(std::log2(static_cast<double>(dm)) + 0.5) % n) != 0)
            throw ShapeError("dim M must be 2^{nQ} for integer nQ");
        if (entangled_state) {
            const auto& s = entangled_state->shape();
            if (s.size() != 2 || !s.contains(lbl::GA) || !s.contains(lbl::GB))
                throw LabelError("entangled state must live on (GA, GB)");
            if (s.dim(lbl::GA) != s.dim(lbl::GB)) throw ShapeError("dim GA must equal dim GB");
            if (!is_pow2(s.dim(lbl::GA))) throw ShapeError("dim GA must be 2^{nR_e}");
        }
        Labels allowed_in{lbl::M, lbl::GA};
        for (std::size_t i = 1; i <= n; ++i) allowed_in.push_back(lbl::indexed(lbl::E0, i));
        for (const auto& l : encoder.in_shape().labels)
            if (std::find(allowed_in.begin(), allowed_in.end(), l) == allowed_in.end())
                throw LabelError("encoder input '" + l + "' is not one of M, GA, E0_i");
        if (encoder.in_shape().contains(lbl::GA) && !entangled_state)
            throw LabelError("encoder uses GA but no entangled state is given");
        const Labels ap = lbl::indexed(lbl::Ap, 1, n);
        if (encoder.out_shape().labels != ap) throw LabelError("encoder must output A'_1..A'_n");
        for (std::size_t i = 0; i < n; ++i)
            if (encoder.out_shape().dims[i] != inst.dim_ap()) throw ShapeError("encoder output dim differs from |A'|");
        Labels allowed_dec = lbl::indexed(lbl::B, 1, n);
        allowed_dec.push_back(lbl::GB);
        for (const auto& l : decoder.in_shape().labels)
            if (std::find(allowed_dec.begin(), allowed_dec.end(), l) == allowed_dec.end())
                throw LabelError("decoder input '" + l + "' is not one of B_i, GB");
        if (decoder.out_shape().labels != Labels{lbl::Mhat} || decoder.out_shape().dims[0] != dm)
            throw ShapeError("decoder must output Mhat with dim M");
    }
};

struct MessageDiagnostic {
    std::string name;
    double error = 0;
    double leakage = 0;
    double fidelity_distance = 0;
};

struct CodeReport {
    double error = 0;    // max over tested messages
    double leakage = 0;  // bits per use, max over tested messages
    double Q = 0;
    double R_e = 0;
    std::size_t n = 1;
    double leakage_ceiling = 0;  // 2 H(C)_phi
    std::vector<MessageDiagnostic> messages;
    std::string label = "max over tested messages";
};

struct NamedMessage {
    std::string name;
    DensityOperator state;  // over M
};

inline std::vector<NamedMessage> default_messages(std::size_t dim_m, std::uint64_t seed = 0) {
    const SubsystemShape s({lbl::M}, {dim_m});
    std::vector<NamedMessage> out;
    for (std::size_t i = 0; i < dim_m; ++i) out.push_back({"basis_" + std::to_string(i), DensityOperator::basis_state(s, i)});
    for (std::size_t k = 0; k < 4; ++k) {
        Rng rng(mix_seed(seed, k));
        out.push_back({"haar_" + std::to_string(k), PureState(haar_state(dim_m, rng), s).density()});
    }
    out.push_back({"maximally_mixed", DensityOperator::maximally_mixed(s)});
    return out;
}

namespace detail {

inline Labels indexed_labels(const Labels& base, std::size_t i) {
    Labels out;
    for (const auto& l : base) out.push_back(lbl::indexed(l, i));
    return out;
}

inline void harness_dim_check(const DensityOperator& rho, const char* stage) {
    if (rho.dim() > std::min(kHarnessDimCap, dim_cap()))
        throw DimensionLimitError(std::string("code evaluation exceeds the dimension cap at ") + stage);
}

}  // namespace detail

// State rho_{C^n B^n GB} before decoding and the decoded Mhat, for one message.
struct CodeTrace {
    DensityOperator pre_decoder;
    DensityOperator decoded;
};

inline CodeTrace run_code(const MaskingInstance& inst, const CodeSpec& code, const DensityOperator& rho_m) {
    const std::size_t n = code.n;
    const Labels phi_labels = inst.triple.state().labels();
    const std::size_t per_copy = inst.triple.state().dim() * inst.channel.out_shape().total();
    double est = static_cast<double>(rho_m.dim()) * std::pow(static_cast<double>(code.dim_g()), 2);
    for (std::size_t i = 0; i < n; ++i) est *= static_cast<double>(per_copy);
    if (est > static_cast<double>(std::min(kHarnessDimCap, dim_cap())) * 4096.0)
        throw DimensionLimitError("code evaluation exceeds the dimension cap");

    DensityOperator rho = rho_m;
    if (code.entangled_state) rho = tensor(rho, code.entangled_state->density());
    for (std::size_t i = 1; i <= n; ++i)
        rho = tensor(rho, inst.triple.state().relabeled(phi_labels, detail::indexed_labels(phi_labels, i)));
    detail::harness_dim_check(rho, "input");
    rho = apply_channel(code.encoder, rho);
    detail::harness_dim_check(rho, "encoder");
    for (std::size_t i = 1; i <= n; ++i) {
        const KrausChannel ch = inst.channel.with_labels(detail::indexed_labels(inst.channel.in_shape().labels, i),
                                                         detail::indexed_labels(inst.channel.out_shape().labels, i));
        rho = apply_channel(ch, rho);
        detail::harness_dim_check(rho, "channel");
    }
    // Alice's leftovers (E0 copies, T copies) are traced out.
    Labels keep = lbl::indexed(lbl::C, 1, n);
    for (std::size_t i = 1; i <= n; ++i)
        for (const auto& l : inst.channel.out_shape().labels) keep.push_back(lbl::indexed(l, i));
    if (code.entangled_state) keep.push_back(lbl::GB);
    CodeTrace t;
    t.pre_decoder = rho.reduce(keep);
    t.decoded = apply_channel(code.decoder, t.pre_decoder).reduce({lbl::Mhat});
    return t;
}

inline CodeReport evaluate_code(const MaskingInstance& inst, CodeSpec code, std::vector<NamedMessage> messages = {},
                                std::uint64_t seed = 0) {
    code.normalize_labels();
    code.validate(inst);
    if (inst.channel.out_shape().size() != 1 || inst.channel.out_shape().labels[0] != lbl::B)
        throw LabelError("code evaluation expects channel output B");
    if (messages.empty()) messages = default_messages(code.dim_m(), seed);
    for (const auto& m : messages)
        if (m.state.labels() != Labels{lbl::M} || m.state.dim() != code.dim_m())
            throw ShapeError("message state must live on M");

    CodeReport rep;
    rep.n = code.n;
    rep.Q = code.Q();
    rep.R_e = code.R_e();
    rep.leakage_ceiling = 2.0 * von_neumann(inst.triple.phi_C());
    const Labels c = lbl::indexed(lbl::C, 1, code.n);
    Labels bg = lbl::indexed(lbl::B, 1, code.n);
    if (code.entangled_state) bg.push_back(lbl::GB);

    std::vector<std::future<MessageDiagnostic>> jobs;
    for (const auto& m : messages)
        jobs.push_back(std::async(std::launch::async, [&inst, &code, &c, &bg, &m] {
            const CodeTrace t = run_code(inst, code, m.state);
            MessageDiagnostic d;
            d.name = m.name;
            const ComplexMatrix diff = m.state.matrix() - t.decoded.matrix();
            d.error = std::clamp(0.5 * trace_norm(diff), 0.0, 1.0);
            d.fidelity_distance = fidelity_distance(m.state.matrix(), t.decoded.matrix());
            d.leakage = std::max(0.0, mutual_information(t.pre_decoder, c, bg) / static_cast<double>(code.n));
            return d;
        }));
    for (auto& j : jobs) {
        rep.messages.push_back(j.get());
        rep.error = std::max(rep.error, rep.messages.back().error);
        rep.leakage = std::max(rep.leakage, rep.messages.back().leakage);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Reference protocols

// X^{m1} Z^{m2} with m = 2 m1 + m2.
inline ComplexMatrix bell_pauli(std::size_t m) {
    ComplexMatrix p = ComplexMatrix::identity(2);
    if (m & 2u) p = p * pauli_x();
    if (m & 1u) p = p * pauli_z();
    return p;
}

// (P_m (x) 1)|Phi> on (first, second).
inline std::vector<cplx> bell_state(std::size_t m) {
    const auto phi = embedded_phi(2, 2);
    return tensor_product(bell_pauli(m), ComplexMatrix::identity(2)) * std::span<const cplx>(phi);
}

// Bell measurement (first, second) -> out with outcome m written as |m>.
inline KrausChannel bell_measurement(const Labels& in, const std::string& out) {
    std::vector<ComplexMatrix> ops;
    for (std::size_t m = 0; m < 4; ++m) {
        const auto b = bell_state(m);
        ComplexMatrix k(4, 4);
        for (std::size_t j = 0; j < 4; ++j) k(m, j) = std::conj(b[j]);
        ops.push_back(std::move(k));
    }
    return {std::move(ops), SubsystemShape(in, {2, 2}), SubsystemShape({out}, {4})};
}

// Read classical m from M and apply P_m to GA; when `controlled`, also
// apply Z^{s} with s read from E0_1.
inline KrausChannel superdense_encoder(bool controlled) {
    std::vector<ComplexMatrix> ops;
    const std::size_t ds = controlled ? 2 : 1;
    for (std::size_t m = 0; m < 4; ++m)
        for (std::size_t s = 0; s < ds; ++s) {
            ComplexMatrix p = bell_pauli(m);
            if (s == 1) p = pauli_z() * p;
            // Input order (M, E0_1?, GA).
            ComplexMatrix k(2, 4 * ds * 2);
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t g = 0; g < 2; ++g) k(a, (m * ds + s) * 2 + g) = p(a, g);
            ops.push_back(std::move(k));
        }
    Labels in{lbl::M};
    std::vector<std::size_t> dims{4};
    if (controlled) {
        in.push_back(lbl::indexed(lbl::E0, 1));
        dims.push_back(2);
    }
    in.push_back(lbl::GA);
    dims.push_back(2);
    return {std::move(ops), SubsystemShape(in, dims), SubsystemShape({lbl::indexed(lbl::Ap, 1)}, {2})};
}

inline CodeSpec superdense_code(bool controlled = false) {
    CodeSpec code;
    code.n = 1;
    code.entangled_state = maximally_entangled(2, lbl::GA, lbl::GB);
    code.encoder = superdense_encoder(controlled);
    code.decoder = bell_measurement({lbl::indexed(lbl::B, 1), lbl::GB}, lbl::Mhat);
    return code;
}

inline std::vector<NamedMessage> classical_messages(std::size_t dim) {
    std::vector<NamedMessage> out;
    const SubsystemShape s({lbl::M}, {dim});
    for (std::size_t i = 0; i < dim; ++i) out.push_back({"m" + std::to_string(i), DensityOperator::basis_state(s, i)});
    return out;
}

// Pre-flip on GA controlled by E0, then superdense coding, over the
// state-dependent dephasing channel.
inline CodeReport controlled_z_code(const DephasingSpec& spec) {
    const MaskingInstance inst(dephasing_channel(spec));
    return evaluate_code(inst, superdense_code(true), classical_messages(4));
}

inline KrausChannel noiseless_qubit() { return identity_channel(SubsystemShape({lbl::Ap}, {2}), {lbl::B}); }

// Two bits over one use of `channel` (noiseless qubit by default); message m in {0..3}.
inline CodeReport superdense(std::size_t message_bits, const std::optional<KrausChannel>& channel = std::nullopt) {
    if (message_bits > 3) throw DomainError("superdense message must be two bits");
    const MaskingInstance inst(without_state(channel.value_or(noiseless_qubit())));
    auto msgs = classical_messages(4);
    return evaluate_code(inst, superdense_code(false), {msgs[message_bits]});
}

// Bob's (B, GB) state for each message, before the Bell measurement.
inline std::vector<DensityOperator> superdense_decoder_inputs(const std::optional<KrausChannel>& channel = std::nullopt) {
    const MaskingInstance inst(without_state(channel.value_or(noiseless_qubit())));
    CodeSpec code = superdense_code(false);
    code.normalize_labels();
    std::vector<DensityOperator> out;
    for (const auto& m : classical_messages(4)) out.push_back(run_code(inst, code, m.state).pre_decoder);
    return out;
}

// Two noiseless classical bits: complete dephasing of a 4-level system.
inline KrausChannel two_classical_bits() {
    std::vector<ComplexMatrix> ops;
    for (std::size_t x = 0; x < 4; ++x) {
        ComplexMatrix p(4, 4);
        p(x, x) = 1.0;
        ops.push_back(std::move(p));
    }
    return {std::move(ops), SubsystemShape({lbl::Ap}, {4}), SubsystemShape({lbl::B}, {4})};
}

inline CodeSpec teleportation_code() {
    CodeSpec code;
    code.n = 1;
    code.entangled_state = maximally_entangled(2, lbl::GA, lbl::GB);
    code.encoder = bell_measurement({lbl::M, lbl::GA}, lbl::indexed(lbl::Ap, 1));
    // Outcome m: Bob holds P_m^T-rotated half; undo with the matching Pauli.
    std::vector<ComplexMatrix> ops;
    for (std::size_t m = 0; m < 4; ++m) {
        const ComplexMatrix corr = bell_pauli(m).transpose();
        const ComplexMatrix fix = corr.adjoint();
        ComplexMatrix k(2, 8);  // input order (B_1, GB)
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t g = 0; g < 2; ++g) k(a, m * 2 + g) = fix(a, g);
        ops.push_back(std::move(k));
    }
    code.decoder = KrausChannel(std::move(ops), SubsystemShape({lbl::indexed(lbl::B, 1), lbl::GB}, {4, 2}),
                                SubsystemShape({lbl::Mhat}, {2}));
    return code;
}

// One qubit over two classical bit uses plus one ebit.
inline CodeReport teleportation(std::span<const cplx> message_state) {
    if (message_state.size() != 2) throw ShapeError("teleportation message must be a qubit");
    const PureState psi = PureState::normalized({message_state.begin(), message_state.end()},
                                                SubsystemShape({lbl::M}, {2}));
    const MaskingInstance inst(without_state(two_classical_bits()));
    return evaluate_code(inst, teleportation_code(), {{"input", psi.density()}});
}

}  // namespace qmask
