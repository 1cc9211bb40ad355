#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "entropy.hpp"
#include "quantum.hpp"

namespace qmask {

// op_{A->B}(|i>_A |j>_B) = |j>_B <i|_A, extended linearly.
struct OpOperator {
    ComplexMatrix matrix;  // dim(to) x dim(from)
    SubsystemShape from_shape;
    SubsystemShape to_shape;
};

inline OpOperator build_op(const PureState& psi, const Labels& from, const Labels& to) {
    Labels all = from;
    all.insert(all.end(), to.begin(), to.end());
    const auto ordered = psi.permuted(all);
    const SubsystemShape fs = psi.shape().select(from);
    const SubsystemShape ts = psi.shape().select(to);
    const std::size_t df = fs.total(), dt = ts.total();
    ComplexMatrix m(dt, df);
    for (std::size_t i = 0; i < df; ++i)
        for (std::size_t j = 0; j < dt; ++j) m(j, i) = ordered.amplitudes()[i * dt + j];
    return {std::move(m), fs, ts};
}

inline OpOperator build_op(const DensityOperator& rho, const Labels& from, const Labels& to) {
    const auto eig = hermitian_eig(rho.matrix());
    if (std::abs(eig.values.front() - 1.0) > 1e-9) throw PurityError("op operator needs a pure state");
    return build_op(PureState::normalized(eig.vectors.column_vector(0), rho.shape()), from, to);
}

// Apply op(psi) to the `from` factors of theta (relabelled to match).
inline LabeledVector apply_op(const OpOperator& op, const PureState& target, const Labels& acting) {
    return apply_to_subsystems(target.amplitudes(), target.shape(), op.matrix, acting, op.to_shape);
}

namespace detail {
inline double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw ShapeError("vector lengths differ");
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}
}  // namespace detail

// op_{A->B}(psi_AB) |theta_AC>  vs  op_{A->C}(theta_AC) |psi_AB>, compared on (B, C).
inline double op_swap_residual(const PureState& psi_ab, const PureState& theta_ac, const std::string& a,
                              const std::string& b, const std::string& c) {
    const auto lhs = apply_op(build_op(psi_ab, {a}, {b}), theta_ac, {a});
    const auto rhs = apply_op(build_op(theta_ac, {a}, {c}), psi_ab, {a});
    const auto l = permute_subsystems(lhs.amplitudes, lhs.shape, {b, c});
    const auto r = permute_subsystems(rhs.amplitudes, rhs.shape, {b, c});
    return detail::max_abs_diff(l, r);
}

// sqrt|A| op_{A->B}(psi_AB) |Phi_AA'>  vs  |psi_A'B>.
inline double op_transfer_residual(const PureState& psi_ab, const std::string& a, const std::string& b) {
    const std::string ap = a + "'";
    const std::size_t da = psi_ab.shape().dim(a);
    OpOperator op = build_op(psi_ab, {a}, {b});
    op.matrix *= cplx(std::sqrt(static_cast<double>(da)));
    const PureState phi = maximally_entangled(da, a, ap);
    const auto lhs = apply_op(op, phi, {a});
    const auto l = permute_subsystems(lhs.amplitudes, lhs.shape, {ap, b});
    const auto r = psi_ab.relabeled({a}, {ap}).permuted({ap, b});
    return detail::max_abs_diff(l, r.amplitudes());
}

// ---------------------------------------------------------------------------

struct TChannel {
    KrausChannel channel;  // A -> K
    double tp_residual = 0;
    bool warning() const { return tp_residual > 1e-6; }
};

// T(rho_A) = |A| Tr_B[op_{A->BK}(omega) rho op^dagger]
inline TChannel t_channel(const PureState& omega, const std::string& a = lbl::A, const std::string& b = lbl::B,
                          const std::string& k = lbl::K) {
    const OpOperator op = build_op(omega, {a}, {b, k});
    const std::size_t da = omega.shape().dim(a), db = omega.shape().dim(b), dk = omega.shape().dim(k);
    const double scale = std::sqrt(static_cast<double>(da));
    std::vector<ComplexMatrix> ops;
    for (std::size_t j = 0; j < db; ++j) {
        ComplexMatrix m(dk, da);
        for (std::size_t r = 0; r < dk; ++r)
            for (std::size_t c = 0; c < da; ++c) m(r, c) = scale * op.matrix(j * dk + r, c);
        ops.push_back(std::move(m));
    }
    TChannel t;
    t.channel = KrausChannel::unchecked(std::move(ops), SubsystemShape({a}, {da}), SubsystemShape({k}, {dk}));
    t.tp_residual = t.channel.completeness_residual();
    return t;
}

// omega_{ABK} = (I_A (x) U_{A'->BK}) |Phi_{AA'}> for a dilation with input A'
// and outputs B (main) and K (environment).
inline PureState omega_from_dilation(const IsometricDilation& dil) {
    const auto& in = dil.in_shape();
    if (in.size() != 1) throw ShapeError("omega_from_dilation needs a single input factor");
    const PureState phi = maximally_entangled(in.total(), lbl::A, in.labels[0]);
    return dil.apply(phi);
}

// Omega on A = a1 a2 (dim 4), B = b1 b2 (dim 4), K (dim 2):
// |Phi>_{a1 b1} (x) (|000> + |111>)/sqrt2 on (a2, b2, K).
// T discards a1 and dephases a2; H(A|K) = H_min(A|K) = 1.
inline PureState flat_omega() {
    std::vector<cplx> amps(4 * 4 * 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const std::size_t a = i * 2 + j, b = i * 2 + j;
            amps[(a * 4 + b) * 2 + j] = 0.5;
        }
    return {std::move(amps), SubsystemShape({lbl::A, lbl::B, lbl::K}, {4, 4, 2})};
}

// ---------------------------------------------------------------------------

struct DecouplingConfig {
    PureState omega;  // over (A, B, K)
    std::size_t dim_s = 1;
    std::size_t dim_g = 1;
    std::vector<std::size_t> blocklengths{1};
    std::size_t samples = 200;
    double epsilon = 0.0;  // surrogate for the AEP correction
    std::uint64_t seed = 0;
};

struct DecouplingRow {
    std::size_t n = 0;
    std::size_t samples = 0;
    double mean = 0;     // E ||T(U s U^+)_{K^n R} - w_K^n (x) s_R||_1
    double stderr_ = 0;
    double mean_g = 0;   // same with G2 kept
    double stderr_g = 0;
    double bound = 0;
    double bound_g = 0;
    double bound_eps_slope = 0;  // d bound / d epsilon
    bool vacuous = false;
    bool vacuous_g = false;
    bool pass = false;
    bool pass_g = false;
};

struct DecouplingReport {
    double h_a_given_k = 0;
    double epsilon = 0;
    double t_tp_residual = 0;  // > 1e-6: omega does not induce a channel
    std::size_t dim_s = 1;
    std::size_t dim_g = 1;
    std::vector<DecouplingRow> rows;
};

constexpr std::size_t kMaxDecouplingDim = std::size_t{1} << 12;

inline DecouplingRow decoupling_bounds(double h_a_given_k, std::size_t n, std::size_t ds, std::size_t dg,
                                       double epsilon) {
    DecouplingRow row;
    row.n = n;
    const double expo = std::exp2(-static_cast<double>(n) * h_a_given_k + static_cast<double>(n) * epsilon);
    row.bound = std::sqrt(static_cast<double>(ds) / static_cast<double>(dg) * expo);
    row.bound_g = std::sqrt(static_cast<double>(ds) * static_cast<double>(dg) * expo);
    row.bound_eps_slope = row.bound * static_cast<double>(n) * std::log(2.0) / 2.0;
    row.vacuous = row.bound > 2.0;
    row.vacuous_g = row.bound_g > 2.0;
    return row;
}

inline DecouplingReport run_iid_decoupling(const DecouplingConfig& cfg) {
    if (cfg.samples < 1) throw ConfigError("samples must be at least 1");
    if (cfg.dim_s < 1 || cfg.dim_g < 1) throw ConfigError("dim_s and dim_g must be positive");
    if (cfg.epsilon < 0) throw ConfigError("epsilon surrogate must be nonnegative");
    const auto& om = cfg.omega.shape();
    for (const auto& l : {lbl::A, lbl::B, lbl::K}) om.index_of(l);
    if (om.size() != 3) throw LabelError("omega must live on exactly A, B, K");

    const TChannel t = t_channel(cfg.omega);
    const std::size_t da = om.dim(lbl::A), db = om.dim(lbl::B), dk = om.dim(lbl::K);
    const std::size_t ds = cfg.dim_s, dg = cfg.dim_g;
    OpOperator op = build_op(cfg.omega, {lbl::A}, {lbl::B, lbl::K});
    op.matrix *= cplx(std::sqrt(static_cast<double>(da)));
    const DensityOperator w_k = cfg.omega.reduce({lbl::K});

    DecouplingReport report;
    report.h_a_given_k = conditional_entropy(cfg.omega.density(), {lbl::A}, {lbl::K});
    report.epsilon = cfg.epsilon;
    report.dim_s = ds;
    report.dim_g = dg;
    report.t_tp_residual = t.tp_residual;

    for (std::size_t n : cfg.blocklengths) {
        if (n < 1) throw ConfigError("blocklengths must be positive");
        std::size_t dan = 1;
        for (std::size_t i = 0; i < n; ++i) {
            dan *= da;
            if (dan > kMaxDecouplingDim) throw DimensionLimitError("|A|^n exceeds 2^12");
        }
        check_dim(dan, "run_iid_decoupling");
        if (ds * dg > dan) throw EmbeddingError("|S||G| exceeds |A|^n; no full-rank embedding W");

        // sigma_{A^n R G2} = W (Phi_SR (x) Phi_G1G2), W embedding (s, g) -> basis index s*dg + g.
        SubsystemShape shape;
        const Labels a_labels = lbl::indexed(lbl::A, 1, n);
        for (const auto& l : a_labels) {
            shape.labels.push_back(l);
            shape.dims.push_back(da);
        }
        shape = shape.concat(SubsystemShape({lbl::R, "G2"}, {ds, dg}));
        std::vector<cplx> sigma(shape.total());
        const double amp = 1.0 / std::sqrt(static_cast<double>(ds * dg));
        for (std::size_t s = 0; s < ds; ++s)
            for (std::size_t g = 0; g < dg; ++g) sigma[((s * dg + g) * ds + s) * dg + g] = amp;

        // Reference states.
        ComplexMatrix ref_r = ComplexMatrix::identity(1);
        for (std::size_t i = 0; i < n; ++i) ref_r = tensor_product(ref_r, w_k.matrix());
        ComplexMatrix ref_rg = ref_r;
        ref_r = tensor_product(ref_r, ComplexMatrix::identity(ds) * cplx(1.0 / static_cast<double>(ds)));
        ref_rg = tensor_product(ref_rg, ComplexMatrix::identity(ds * dg) * cplx(1.0 / static_cast<double>(ds * dg)));

        Labels keep_r = lbl::indexed(lbl::K, 1, n);
        keep_r.push_back(lbl::R);
        Labels keep_rg = keep_r;
        keep_rg.push_back("G2");

        DecouplingRow row = decoupling_bounds(report.h_a_given_k, n, ds, dg, cfg.epsilon);
        row.samples = cfg.samples;
        std::vector<double> v_r(cfg.samples), v_rg(cfg.samples);
        for (std::size_t smp = 0; smp < cfg.samples; ++smp) {
            const ComplexMatrix u = haar_unitary(dan, mix_seed(mix_seed(cfg.seed, n), smp));
            LabeledVector cur = apply_to_subsystems(sigma, shape, u, a_labels, shape.select(a_labels));
            for (std::size_t i = 1; i <= n; ++i) {
                const SubsystemShape out({lbl::indexed(lbl::B, i), lbl::indexed(lbl::K, i)}, {db, dk});
                cur = apply_to_subsystems(cur.amplitudes, cur.shape, op.matrix, {lbl::indexed(lbl::A, i)}, out);
            }
            v_r[smp] = trace_norm(partial_trace_pure(cur.amplitudes, cur.shape, keep_r) - ref_r);
            v_rg[smp] = trace_norm(partial_trace_pure(cur.amplitudes, cur.shape, keep_rg) - ref_rg);
        }
        auto stats = [](const std::vector<double>& v, double& mean, double& se) {
            mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double ss = 0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
            se = std::sqrt(var / static_cast<double>(v.size()));
        };
        stats(v_r, row.mean, row.stderr_);
        stats(v_rg, row.mean_g, row.stderr_g);
        row.pass = !row.vacuous && row.mean + 2 * row.stderr_ <= row.bound;
        row.pass_g = !row.vacuous_g && row.mean_g + 2 * row.stderr_g <= row.bound_g;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------

struct OneShotResult {
    double rhs = 0;
    double hmin_zeta = 0;  // lower bound on H_min(A'|K)_zeta
    double hmin_rho = 0;   // lower bound on H_min(A|R)_rho
    std::string flag = "unsmoothed surrogate";
};

// 2^{-H_min(A'|K)/2 - H_min(A|R)/2} with unsmoothed min-entropies. Using lower
// bounds on H_min keeps the value an upper bound on the true unsmoothed RHS.
inline OneShotResult one_shot_rhs(const DensityOperator& zeta, const Labels& zeta_cond, const DensityOperator& rho,
                                  const Labels& rho_cond, const MinEntropyOptions& opt = {}) {
    OneShotResult r;
    r.hmin_zeta = min_entropy(zeta, zeta_cond, opt).value;
    r.hmin_rho = min_entropy(rho, rho_cond, opt).value;
    r.rhs = std::exp2(-0.5 * r.hmin_zeta - 0.5 * r.hmin_rho);
    return r;
}

// ---------------------------------------------------------------------------

struct UhlmannResult {
    ComplexMatrix isometry;         // F: B -> C
    double achieved_distance = 0;   // ||(I (x) F) psi - theta||_1
    double marginal_distance = 0;   // ||psi_A - theta_A||_1
    double bound = 0;               // 2 sqrt(marginal_distance)
};

namespace detail {

// Extend orthonormal columns `basis` (n x k) with vectors orthogonal to them,
// up to `target` columns total.
inline ComplexMatrix complete_basis(const ComplexMatrix& basis, std::size_t target) {
    const std::size_t n = basis.rows();
    std::vector<std::vector<cplx>> cols;
    for (std::size_t j = 0; j < basis.cols(); ++j) cols.push_back(basis.column_vector(j));
    for (std::size_t e = 0; e < n && cols.size() < target; ++e) {
        std::vector<cplx> v(n);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& c : cols) {
                const cplx p = inner(c, v);
                for (std::size_t i = 0; i < n; ++i) v[i] -= p * c[i];
            }
        const double nv = vector_norm(v);
        if (nv < 1e-8) continue;
        for (auto& x : v) x /= nv;
        cols.push_back(std::move(v));
    }
    ComplexMatrix out(n, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < n; ++i) out(i, j) = cols[j][i];
    return out;
}

}  // namespace detail

// Isometry F_{B->C} maximizing |<theta|(I (x) F)|psi>|, from the singular
// vectors of the cross matrix Y = M^T conj(N) where psi = sum M_ab |a>|b>,
// theta = sum N_ac |a>|c>.
inline UhlmannResult uhlmann_isometry(const PureState& psi, const PureState& theta, const Labels& a_group) {
    const Labels b_group = psi.shape().complement(a_group);
    const Labels c_group = theta.shape().complement(a_group);
    if (psi.shape().select(a_group) != theta.shape().select(a_group))
        throw ShapeError("psi and theta disagree on the shared A subsystems");
    Labels ab = a_group, ac = a_group;
    ab.insert(ab.end(), b_group.begin(), b_group.end());
    ac.insert(ac.end(), c_group.begin(), c_group.end());
    const auto p = psi.permuted(ab);
    const auto t = theta.permuted(ac);
    const std::size_t da = psi.shape().dim_of(a_group);
    const std::size_t db = psi.shape().dim_of(b_group);
    const std::size_t dc = theta.shape().dim_of(c_group);

    UhlmannResult res;
    const DensityOperator psi_a = psi.reduce(a_group).permuted(a_group);
    const DensityOperator theta_a = theta.reduce(a_group).permuted(a_group);
    res.marginal_distance = trace_norm(psi_a.matrix() - theta_a.matrix());
    if (res.marginal_distance > 2.0 + 1e-9) throw ValidationError("marginal distance exceeds 2");
    res.bound = 2.0 * std::sqrt(res.marginal_distance);

    // Support of psi_B.
    const ComplexMatrix psi_b = partial_trace_pure(p.amplitudes(), p.shape(), b_group);
    const auto eb = hermitian_eig(psi_b);
    std::size_t rank = 0;
    for (double v : eb.values)
        if (v > 1e-12) ++rank;
    if (dc < rank) throw EmbeddingError("dim C is smaller than the Schmidt rank of psi");

    // Work on B' = supp(psi_B) when C cannot host all of B.
    const std::size_t dbp = dc >= db ? db : rank;
    ComplexMatrix q(db, dbp);  // B' -> B isometry
    if (dbp == db) {
        q = ComplexMatrix::identity(db);
    } else {
        for (std::size_t j = 0; j < dbp; ++j)
            for (std::size_t i = 0; i < db; ++i) q(i, j) = eb.vectors(i, j);
    }

    ComplexMatrix m(da, db), n(da, dc);
    for (std::size_t i = 0; i < da; ++i) {
        for (std::size_t j = 0; j < db; ++j) m(i, j) = p.amplitudes()[i * db + j];
        for (std::size_t j = 0; j < dc; ++j) n(i, j) = t.amplitudes()[i * dc + j];
    }
    const ComplexMatrix mq = m * q.conj();              // coefficients on B', da x dbp
    const ComplexMatrix y = mq.transpose() * n.conj();  // dbp x dc
    const auto ey = hermitian_eig(y * y.adjoint());
    ComplexMatrix us(dbp, 0), vs(dc, 0);
    std::vector<std::vector<cplx>> ucols, vcols;
    for (std::size_t k = 0; k < dbp; ++k) {
        const double s2 = ey.values[k];
        if (s2 <= 1e-20) break;
        const double s = std::sqrt(s2);
        auto u = ey.vectors.column_vector(k);
        auto v = y.adjoint() * std::span<const cplx>(u);
        for (auto& x : v) x /= s;
        ucols.push_back(std::move(u));
        vcols.push_back(std::move(v));
    }
    auto to_matrix = [](const std::vector<std::vector<cplx>>& cols, std::size_t rows) {
        ComplexMatrix out(rows, cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j)
            for (std::size_t i = 0; i < rows; ++i) out(i, j) = cols[j][i];
        return out;
    };
    const ComplexMatrix uf = detail::complete_basis(orthonormalize_columns(to_matrix(ucols, dbp)), dbp);
    const ComplexMatrix vf = detail::complete_basis(orthonormalize_columns(to_matrix(vcols, dc)), dbp);
    // F' = sum_k v_k u_k^dagger on B'; F = F' Q^dagger.
    const ComplexMatrix fprime = vf * uf.adjoint();
    res.isometry = fprime * q.adjoint();

    const auto mapped = apply_to_subsystems(p.amplitudes(), p.shape(), res.isometry, b_group,
                                            theta.shape().select(c_group));
    const auto mv = permute_subsystems(mapped.amplitudes, mapped.shape, ac);
    res.achieved_distance =
        trace_norm(ComplexMatrix::projector(mv) - ComplexMatrix::projector(t.amplitudes()));
    return res;
}

}  // namespace qmask
