#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matcore.hpp"

namespace qmask {

// Canonical subsystem labels.
namespace lbl {
inline const std::string E = "E";
inline const std::string E0 = "E0";
inline const std::string C = "C";
inline const std::string A = "A";
inline const std::string Ap = "A'";
inline const std::string B = "B";
inline const std::string K = "K";
inline const std::string C1 = "C1";
inline const std::string T = "T";
inline const std::string M = "M";
inline const std::string Mhat = "Mhat";
inline const std::string R = "R";
inline const std::string GA = "GA";
inline const std::string GB = "GB";
inline const std::string J = "J";
// Label of the i-th copy (1-based) in a block of n uses.
inline std::string indexed(const std::string& base, std::size_t i) { return base + "_" + std::to_string(i); }
inline Labels indexed(const std::string& base, std::size_t first, std::size_t last) {
    Labels out;
    for (std::size_t i = first; i <= last; ++i) out.push_back(indexed(base, i));
    return out;
}
}  // namespace lbl

constexpr double kTraceTol = 1e-9;
constexpr double kPositivityTol = 1e-9;
constexpr double kCompletenessTol = 1e-9;

class PureState;

// ---------------------------------------------------------------------------

class DensityOperator {
public:
    DensityOperator() = default;

    // Checks shape, Hermiticity and unit trace. Positivity is checked by
    // `checked` or `require_positive`, since it needs an eigendecomposition.
    DensityOperator(ComplexMatrix m, SubsystemShape s) : matrix_(std::move(m)), shape_(std::move(s)) {
        shape_.validate();
        check_dim(shape_.total(), "DensityOperator");
        if (matrix_.rows() != shape_.total() || matrix_.cols() != shape_.total())
            throw ShapeError("density matrix dimension does not match subsystem shape");
        const double scale = std::max(1.0, matrix_.max_abs());
        if (hermiticity_residual(matrix_) > kHermitianTol * scale)
            throw SymmetryError("density matrix is not Hermitian");
        const std::size_t n = matrix_.rows();
        for (std::size_t i = 0; i < n; ++i) {
            matrix_(i, i) = matrix_(i, i).real();
            for (std::size_t j = i + 1; j < n; ++j) {
                const cplx avg = 0.5 * (matrix_(i, j) + std::conj(matrix_(j, i)));
                matrix_(i, j) = avg;
                matrix_(j, i) = std::conj(avg);
            }
        }
        if (std::abs(matrix_.trace() - 1.0) > kTraceTol) throw ValidationError("density matrix trace differs from 1");
    }

    static DensityOperator checked(ComplexMatrix m, SubsystemShape s) {
        DensityOperator rho(std::move(m), std::move(s));
        rho.require_positive();
        return rho;
    }

    static DensityOperator maximally_mixed(const SubsystemShape& s) {
        const std::size_t d = s.total();
        return {ComplexMatrix::identity(d) * cplx(1.0 / static_cast<double>(d)), s};
    }

    static DensityOperator basis_state(const SubsystemShape& s, std::size_t index) {
        ComplexMatrix m(s.total(), s.total());
        m(index, index) = 1.0;
        return {std::move(m), s};
    }

    const ComplexMatrix& matrix() const { return matrix_; }
    const SubsystemShape& shape() const { return shape_; }
    const Labels& labels() const { return shape_.labels; }
    std::size_t dim() const { return shape_.total(); }

    double min_eigenvalue() const { return hermitian_eigenvalues(matrix_).back(); }
    void require_positive() const {
        if (min_eigenvalue() < -kPositivityTol) throw PositivityError("density matrix has a negative eigenvalue");
    }

    DensityOperator reduce(const Labels& keep) const {
        return {partial_trace(matrix_, shape_, keep), shape_.restrict_to(keep)};
    }
    DensityOperator permuted(const Labels& order) const {
        if (order == shape_.labels) return *this;
        return {permute_subsystems(matrix_, shape_, order), shape_.select(order)};
    }
    DensityOperator relabeled(const Labels& from, const Labels& to) const {
        DensityOperator out = *this;
        out.shape_ = shape_.relabeled(from, to);
        return out;
    }

private:
    ComplexMatrix matrix_;
    SubsystemShape shape_;
};

inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
    return {tensor_product(a.matrix(), b.matrix()), a.shape().concat(b.shape())};
}

// Trace distance-style comparison after aligning label order.
inline double trace_distance_aligned(const DensityOperator& a, const DensityOperator& b) {
    const DensityOperator bb = b.permuted(a.labels());
    return trace_norm(a.matrix() - bb.matrix());
}

// ---------------------------------------------------------------------------

class PureState {
public:
    PureState() = default;
    PureState(std::vector<cplx> amplitudes, SubsystemShape s) : amps_(std::move(amplitudes)), shape_(std::move(s)) {
        shape_.validate();
        check_dim(shape_.total(), "PureState");
        if (amps_.size() != shape_.total()) throw ShapeError("amplitude count does not match subsystem shape");
        if (std::abs(vector_norm(amps_) - 1.0) > 1e-9) throw ValidationError("pure state is not normalized");
    }

    // Normalizes before validation.
    static PureState normalized(std::vector<cplx> amplitudes, SubsystemShape s) {
        const double n = vector_norm(amplitudes);
        if (n == 0.0) throw ValidationError("cannot normalize the zero vector");
        for (auto& x : amplitudes) x /= n;
        return {std::move(amplitudes), std::move(s)};
    }

    const std::vector<cplx>& amplitudes() const { return amps_; }
    const SubsystemShape& shape() const { return shape_; }
    const Labels& labels() const { return shape_.labels; }
    std::size_t dim() const { return shape_.total(); }

    DensityOperator density() const { return {ComplexMatrix::projector(amps_), shape_}; }
    DensityOperator reduce(const Labels& keep) const {
        return {partial_trace_pure(amps_, shape_, keep), shape_.restrict_to(keep)};
    }
    PureState permuted(const Labels& order) const {
        if (order == shape_.labels) return *this;
        return {permute_subsystems(amps_, shape_, order), shape_.select(order)};
    }
    PureState relabeled(const Labels& from, const Labels& to) const {
        PureState out = *this;
        out.shape_ = shape_.relabeled(from, to);
        return out;
    }
    // Apply an isometry to some factors.
    PureState apply(const ComplexMatrix& isometry, const Labels& acting, const SubsystemShape& out_shape) const {
        auto lv = apply_to_subsystems(amps_, shape_, isometry, acting, out_shape);
        return {std::move(lv.amplitudes), std::move(lv.shape)};
    }

private:
    std::vector<cplx> amps_;
    SubsystemShape shape_;
};

inline PureState tensor(const PureState& a, const PureState& b) {
    return {tensor_product(a.amplitudes(), b.amplitudes()), a.shape().concat(b.shape())};
}

// (1/sqrt(D)) sum_j |j>|j>
inline PureState maximally_entangled(std::size_t dim, const std::string& first = lbl::A,
                                     const std::string& second = lbl::B) {
    if (dim == 0) throw ValidationError("maximally entangled state needs dim >= 1");
    std::vector<cplx> amps(dim * dim);
    const double a = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t j = 0; j < dim; ++j) amps[j * dim + j] = a;
    return {std::move(amps), SubsystemShape({first, second}, {dim, dim})};
}

// ---------------------------------------------------------------------------

class KrausChannel {
public:
    KrausChannel() = default;

    KrausChannel(std::vector<ComplexMatrix> ops, SubsystemShape in, SubsystemShape out)
        : KrausChannel(unchecked(std::move(ops), std::move(in), std::move(out))) {
        if (completeness_residual() > kCompletenessTol)
            throw CompletenessError("Kraus operators do not sum to the identity");
    }

    // Shape-checked only; used for trace-nonincreasing maps and maps whose
    // completeness is reported separately.
    static KrausChannel unchecked(std::vector<ComplexMatrix> ops, SubsystemShape in, SubsystemShape out) {
        in.validate();
        out.validate();
        if (ops.empty()) throw ValidationError("channel needs at least one Kraus operator");
        for (const auto& k : ops)
            if (k.rows() != out.total() || k.cols() != in.total())
                throw ShapeError("Kraus operator shape does not match channel shapes");
        KrausChannel ch;
        ch.ops_ = std::move(ops);
        ch.in_ = std::move(in);
        ch.out_ = std::move(out);
        return ch;
    }

    const std::vector<ComplexMatrix>& kraus_ops() const { return ops_; }
    const SubsystemShape& in_shape() const { return in_; }
    const SubsystemShape& out_shape() const { return out_; }

    // max |sum N_j^dagger N_j - I|
    double completeness_residual() const {
        ComplexMatrix s(in_.total(), in_.total());
        for (const auto& k : ops_) s += k.adjoint() * k;
        return max_abs_diff(s, ComplexMatrix::identity(in_.total()));
    }

    KrausChannel with_labels(const Labels& in_labels, const Labels& out_labels) const {
        KrausChannel ch = *this;
        ch.in_ = SubsystemShape(in_labels, in_.dims);
        ch.out_ = SubsystemShape(out_labels, out_.dims);
        return ch;
    }

private:
    std::vector<ComplexMatrix> ops_;
    SubsystemShape in_;
    SubsystemShape out_;
};

inline KrausChannel identity_channel(const SubsystemShape& in, const Labels& out_labels) {
    return {{ComplexMatrix::identity(in.total())}, in, SubsystemShape(out_labels, in.dims)};
}

// Kraus operators of N1 (x) N2 on (in1, in2) -> (out1, out2).
inline KrausChannel tensor(const KrausChannel& a, const KrausChannel& b) {
    std::vector<ComplexMatrix> ops;
    ops.reserve(a.kraus_ops().size() * b.kraus_ops().size());
    for (const auto& x : a.kraus_ops())
        for (const auto& y : b.kraus_ops()) ops.push_back(tensor_product(x, y));
    return KrausChannel::unchecked(std::move(ops), a.in_shape().concat(b.in_shape()),
                                   a.out_shape().concat(b.out_shape()));
}

namespace detail {

// Apply sum_j K_j rho K_j^dagger on the `acting` factors (ordered as the
// Kraus input) and return the matrix in order (rest..., out...).
inline ComplexMatrix apply_kraus_raw(const std::vector<ComplexMatrix>& ops, const ComplexMatrix& rho,
                                     const SubsystemShape& shape, const Labels& acting, std::size_t dout) {
    const auto rest = shape.complement(acting);
    const auto ro = offsets(shape, rest);
    const auto ao = offsets(shape, acting);
    const std::size_t nr = ro.size(), din = ao.size();
    check_dim(nr * dout, "apply_channel");
    ComplexMatrix out(nr * dout, nr * dout);
    ComplexMatrix block(din, din);
    for (std::size_t r1 = 0; r1 < nr; ++r1)
        for (std::size_t r2 = 0; r2 < nr; ++r2) {
            bool nonzero = false;
            for (std::size_t i = 0; i < din; ++i)
                for (std::size_t j = 0; j < din; ++j) {
                    block(i, j) = rho(ro[r1] + ao[i], ro[r2] + ao[j]);
                    nonzero = nonzero || block(i, j) != cplx{};
                }
            if (!nonzero) continue;
            for (const auto& k : ops) {
                const ComplexMatrix t = k * block;
                for (std::size_t o1 = 0; o1 < dout; ++o1)
                    for (std::size_t o2 = 0; o2 < dout; ++o2) {
                        cplx s = 0;
                        for (std::size_t i = 0; i < din; ++i) s += t(o1, i) * std::conj(k(o2, i));
                        out(r1 * dout + o1, r2 * dout + o2) += s;
                    }
            }
        }
    return out;
}

}  // namespace detail

// Apply `ch` to the subsystems named by its input shape. Output factors are
// placed where the first input factor was.
inline DensityOperator apply_channel(const KrausChannel& ch, const DensityOperator& rho) {
    const auto& in = ch.in_shape();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!rho.shape().contains(in.labels[i]))
            throw LabelError("channel input '" + in.labels[i] + "' is not a subsystem of the state");
        if (rho.shape().dim(in.labels[i]) != in.dims[i])
            throw ShapeError("channel input '" + in.labels[i] + "' has the wrong dimension");
    }
    const auto rest = rho.shape().complement(in.labels);
    for (const auto& l : ch.out_shape().labels)
        if (std::find(rest.begin(), rest.end(), l) != rest.end())
            throw LabelError("channel output '" + l + "' collides with an untouched subsystem");
    ComplexMatrix raw = detail::apply_kraus_raw(ch.kraus_ops(), rho.matrix(), rho.shape(), in.labels,
                                                ch.out_shape().total());
    SubsystemShape mid = rho.shape().select(rest).concat(ch.out_shape());
    SubsystemShape target = detail::splice_shape(rho.shape(), in.labels, ch.out_shape());
    if (target.labels != mid.labels) raw = permute_subsystems(raw, mid, target.labels);
    return {std::move(raw), std::move(target)};
}

// Explicit acting set; must name exactly the channel's input labels.
inline DensityOperator apply_channel(const KrausChannel& ch, const DensityOperator& rho, const Labels& acting_on) {
    Labels a = acting_on, b = ch.in_shape().labels;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw LabelError("acting labels do not match the channel input labels");
    return apply_channel(ch, rho);
}

// Choi matrix sum_ij |i><j| (x) N(|i><j|), input index first.
inline ComplexMatrix choi_matrix(const KrausChannel& ch) {
    const std::size_t din = ch.in_shape().total(), dout = ch.out_shape().total();
    ComplexMatrix choi(din * dout, din * dout);
    for (const auto& k : ch.kraus_ops())
        for (std::size_t i = 0; i < din; ++i)
            for (std::size_t j = 0; j < din; ++j)
                for (std::size_t a = 0; a < dout; ++a)
                    for (std::size_t b = 0; b < dout; ++b)
                        choi(i * dout + a, j * dout + b) += k(a, i) * std::conj(k(b, j));
    return choi;
}

// ---------------------------------------------------------------------------

class IsometricDilation {
public:
    IsometricDilation() = default;
    IsometricDilation(ComplexMatrix isometry, SubsystemShape in, SubsystemShape out, Labels env)
        : u_(std::move(isometry)), in_(std::move(in)), out_(std::move(out)), env_(std::move(env)) {
        in_.validate();
        out_.validate();
        if (env_.empty()) throw LabelError("dilation needs at least one environment label");
        for (const auto& l : env_) out_.index_of(l);
        if (u_.rows() != out_.total() || u_.cols() != in_.total())
            throw ShapeError("isometry shape does not match dilation shapes");
        if (isometry_residual() > kCompletenessTol) throw CompletenessError("dilation is not an isometry");
    }

    const ComplexMatrix& isometry() const { return u_; }
    const SubsystemShape& in_shape() const { return in_; }
    const SubsystemShape& out_shape() const { return out_; }
    const Labels& env_labels() const { return env_; }
    Labels output_labels() const { return out_.complement(env_); }

    double isometry_residual() const { return max_abs_diff(u_.adjoint() * u_, ComplexMatrix::identity(in_.total())); }

    // Same isometry with the roles of output and environment exchanged.
    IsometricDilation swapped() const { return {u_, in_, out_, output_labels()}; }

    // Trace out `traced` and return the Kraus channel onto the remaining outputs.
    KrausChannel reduced_channel(const Labels& traced) const {
        const Labels kept = out_.complement(traced);
        const auto ko = detail::offsets(out_, kept);
        const auto to = detail::offsets(out_, traced);
        std::vector<ComplexMatrix> ops;
        for (auto t : to) {
            ComplexMatrix k(ko.size(), in_.total());
            for (std::size_t r = 0; r < ko.size(); ++r)
                for (std::size_t c = 0; c < in_.total(); ++c) k(r, c) = u_(ko[r] + t, c);
            ops.push_back(std::move(k));
        }
        return {std::move(ops), in_, out_.restrict_to(kept)};
    }

    KrausChannel channel() const { return reduced_channel(env_); }

    PureState apply(const PureState& psi) const { return psi.apply(u_, in_.labels, out_); }
    DensityOperator apply(const DensityOperator& rho) const {
        return apply_channel(KrausChannel({u_}, in_, out_), rho);
    }

private:
    ComplexMatrix u_;
    SubsystemShape in_;
    SubsystemShape out_;
    Labels env_;
};

// U = sum_j N_j (x) |j>_K
inline IsometricDilation stinespring(const KrausChannel& ch, const std::string& env_label = lbl::K) {
    const std::size_t dk = ch.kraus_ops().size();
    const std::size_t dout = ch.out_shape().total(), din = ch.in_shape().total();
    if (ch.out_shape().contains(env_label)) throw LabelError("environment label already used by the output");
    check_dim(dout * dk, "stinespring");
    ComplexMatrix u(dout * dk, din);
    for (std::size_t j = 0; j < dk; ++j) {
        const auto& n = ch.kraus_ops()[j];
        for (std::size_t b = 0; b < dout; ++b)
            for (std::size_t i = 0; i < din; ++i) u(b * dk + j, i) = n(b, i);
    }
    return {std::move(u), ch.in_shape(), ch.out_shape().concat(SubsystemShape({env_label}, {dk})), {env_label}};
}

// rho -> Tr_B(U rho U^dagger)
inline KrausChannel complementary(const IsometricDilation& dil) { return dil.reduced_channel(dil.output_labels()); }

// ---------------------------------------------------------------------------

class ChannelStateTriple {
public:
    ChannelStateTriple() = default;
    explicit ChannelStateTriple(DensityOperator state) : state_(std::move(state)) { validate(); }
    explicit ChannelStateTriple(PureState state) : state_(state.density()), pure_(std::move(state)) { validate(); }

    const DensityOperator& state() const { return state_; }
    const std::optional<PureState>& pure() const { return pure_; }
    bool has_purifier() const { return state_.shape().contains(lbl::T); }
    // Environment group: E, or (T, E) after lifting.
    Labels env_group() const { return has_purifier() ? Labels{lbl::T, lbl::E} : Labels{lbl::E}; }
    DensityOperator phi_EC() const {
        Labels keep = env_group();
        keep.push_back(lbl::C);
        return state_.reduce(keep);
    }
    DensityOperator phi_C() const { return state_.reduce({lbl::C}); }

private:
    void validate() const {
        Labels l = state_.labels();
        std::sort(l.begin(), l.end());
        Labels plain{lbl::C, lbl::E, lbl::E0};
        Labels with_t{lbl::C, lbl::E, lbl::E0, lbl::T};
        std::sort(plain.begin(), plain.end());
        std::sort(with_t.begin(), with_t.end());
        if (l != plain && l != with_t) throw LabelError("channel state must live on exactly E, E0, C (and optional T)");
    }

    DensityOperator state_;
    std::optional<PureState> pure_;
};

inline void validate_distribution(std::span<const double> q) {
    if (q.empty()) throw ProbabilityError("empty distribution");
    double s = 0;
    for (double x : q) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw ProbabilityError("distribution has a negative or non-finite entry");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ProbabilityError("distribution does not sum to 1");
}

// sum_s q(s) |s><s|_E (x) |s><s|_E0 (x) |s><s|_C
inline ChannelStateTriple maximally_correlated(std::span<const double> q) {
    validate_distribution(q);
    const std::size_t d = q.size();
    SubsystemShape shape({lbl::E, lbl::E0, lbl::C}, {d, d, d});
    ComplexMatrix m(d * d * d, d * d * d);
    for (std::size_t s = 0; s < d; ++s) {
        const std::size_t idx = s * d * d + s * d + s;
        m(idx, idx) = q[s];
    }
    return ChannelStateTriple(DensityOperator(std::move(m), std::move(shape)));
}

inline ChannelStateTriple maximally_correlated(std::initializer_list<double> q) {
    std::vector<double> v(q);
    return maximally_correlated(std::span<const double>(v));
}

// Purification over (T, E, E0, C): sum_k sqrt(l_k) |k>_T |v_k>.
inline ChannelStateTriple purify_channel_state(const ChannelStateTriple& triple) {
    if (triple.has_purifier()) {
        if (!triple.pure()) throw PurityError("triple already carries T but is not pure");
        return triple;
    }
    const DensityOperator rho = triple.state().permuted({lbl::E, lbl::E0, lbl::C});
    const auto eig = hermitian_eig(rho.matrix());
    std::size_t rank = 0;
    for (double v : eig.values)
        if (v > 1e-12) ++rank;
    rank = std::max<std::size_t>(rank, 1);
    const std::size_t d = rho.dim();
    std::vector<cplx> amps(rank * d);
    for (std::size_t k = 0; k < rank; ++k) {
        const double w = std::sqrt(std::max(0.0, eig.values[k]));
        for (std::size_t i = 0; i < d; ++i) amps[k * d + i] = w * eig.vectors(i, k);
    }
    SubsystemShape shape = SubsystemShape({lbl::T}, {rank}).concat(rho.shape());
    return ChannelStateTriple(PureState::normalized(std::move(amps), std::move(shape)));
}

// N~_{T E A' -> B}(rho) = N_{E A' -> B}(Tr_T rho)
inline KrausChannel lift_channel(const KrausChannel& ch, std::size_t t_dim) {
    const std::size_t din = ch.in_shape().total();
    std::vector<ComplexMatrix> ops;
    for (const auto& n : ch.kraus_ops())
        for (std::size_t t = 0; t < t_dim; ++t) {
            ComplexMatrix k(n.rows(), din * t_dim);
            for (std::size_t r = 0; r < n.rows(); ++r)
                for (std::size_t c = 0; c < din; ++c) k(r, t * din + c) = n(r, c);
            ops.push_back(std::move(k));
        }
    return {std::move(ops), SubsystemShape({lbl::T}, {t_dim}).concat(ch.in_shape()), ch.out_shape()};
}

// ---------------------------------------------------------------------------

inline std::vector<double> povm_measure(const DensityOperator& rho, const std::vector<ComplexMatrix>& povm) {
    const std::size_t d = rho.dim();
    if (povm.empty()) throw CompletenessError("empty POVM");
    ComplexMatrix sum(d, d);
    for (const auto& el : povm) {
        if (el.rows() != d || el.cols() != d) throw ShapeError("POVM element has the wrong dimension");
        if (hermiticity_residual(el) > kHermitianTol) throw CompletenessError("POVM element is not Hermitian");
        if (hermitian_eigenvalues(el).back() < -kPositivityTol)
            throw CompletenessError("POVM element is not positive semidefinite");
        sum += el;
    }
    if (max_abs_diff(sum, ComplexMatrix::identity(d)) > kCompletenessTol)
        throw CompletenessError("POVM elements do not sum to the identity");
    std::vector<double> p;
    for (const auto& el : povm) {
        cplx t = 0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) t += el(i, j) * rho.matrix()(j, i);
        p.push_back(std::max(0.0, t.real()));
    }
    return p;
}

}  // namespace qmask
