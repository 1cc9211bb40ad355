#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "optimize.hpp"
#include "quantum.hpp"

namespace qmask {

// Entropy of a spectrum in bits. Eigenvalues in [-1e-9, 1e-12) count as 0.
inline double entropy_of_spectrum(std::span<const double> values) {
    double h = 0;
    for (double v : values) {
        if (v < -kPositivityTol) throw PositivityError("negative eigenvalue in entropy evaluation");
        if (v < 1e-12) continue;
        h -= v * std::log2(v);
    }
    return std::max(0.0, h);
}

inline double von_neumann(const DensityOperator& rho) {
    const auto ev = hermitian_eigenvalues(rho.matrix());
    return entropy_of_spectrum(ev);
}

namespace detail {
inline void require_disjoint(const DensityOperator& rho, std::initializer_list<const Labels*> groups) {
    Labels all;
    for (const Labels* g : groups)
        for (const auto& l : *g) {
            rho.shape().index_of(l);
            if (std::find(all.begin(), all.end(), l) != all.end())
                throw LabelError("entropy groups overlap on '" + l + "'");
            all.push_back(l);
        }
}
inline Labels join(const Labels& a, const Labels& b) {
    Labels out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}
}  // namespace detail

// H(group); the empty group has entropy 0.
inline double entropy(const DensityOperator& rho, const Labels& group) {
    if (group.empty()) return 0.0;
    if (group.size() == rho.shape().size()) {
        Labels a = group, b = rho.labels();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a == b) return von_neumann(rho);
    }
    return von_neumann(rho.reduce(group));
}

// H(A|B) = H(AB) - H(B)
inline double conditional_entropy(const DensityOperator& rho, const Labels& a, const Labels& b) {
    detail::require_disjoint(rho, {&a, &b});
    return entropy(rho, detail::join(a, b)) - entropy(rho, b);
}

struct EntropyQuery {
    const DensityOperator& state;
    Labels a;
    Labels b;
    Labels c;
};

// I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C); with C empty this is I(A;B).
inline double mutual_information(const DensityOperator& rho, const Labels& a, const Labels& b,
                                 const Labels& c = {}) {
    if (a.empty() || b.empty()) throw ValidationError("mutual information needs nonempty groups");
    detail::require_disjoint(rho, {&a, &b, &c});
    const Labels ac = detail::join(a, c);
    const Labels bc = detail::join(b, c);
    const Labels abc = detail::join(ac, b);
    return entropy(rho, ac) + entropy(rho, bc) - entropy(rho, abc) - entropy(rho, c);
}

inline double mutual_information(const EntropyQuery& q) { return mutual_information(q.state, q.a, q.b, q.c); }

// I(A>B) = H(B) - H(AB); the C-group, if given, is appended to B.
inline double coherent_information(const DensityOperator& rho, const Labels& a, const Labels& b) {
    if (a.empty() || b.empty()) throw ValidationError("coherent information needs nonempty groups");
    detail::require_disjoint(rho, {&a, &b});
    return entropy(rho, b) - entropy(rho, detail::join(a, b));
}

inline double coherent_information(const EntropyQuery& q) {
    return coherent_information(q.state, q.a, detail::join(q.b, q.c));
}

// ---------------------------------------------------------------------------

inline double h2(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("binary entropy argument outside [0,1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

// a*b = (1-a) b + a (1-b)
inline double star(double a, double b) {
    if (!(a >= 0.0 && a <= 1.0) || !(b >= 0.0 && b <= 1.0)) throw DomainError("star argument outside [0,1]");
    return (1.0 - a) * b + a * (1.0 - b);
}

struct BinaryEntropyStar {
    double h2;
    double star;
};

inline BinaryEntropyStar binary_entropy_star(double x, double a, double b) { return {h2(x), star(a, b)}; }

// ---------------------------------------------------------------------------
// Conditional min-entropy

// -log2 lambda_max((I (x) sigma^{-1/2}) rho (I (x) sigma^{-1/2})). The B-group
// is sigma's label set; every other label of rho is the A-group.
inline double min_entropy_fixed(const DensityOperator& rho_ab, const DensityOperator& sigma_b) {
    const Labels& b = sigma_b.labels();
    for (const auto& l : b) {
        if (!rho_ab.shape().contains(l)) throw LabelError("sigma label '" + l + "' missing from rho");
        if (rho_ab.shape().dim(l) != sigma_b.shape().dim(l)) throw ShapeError("sigma dimension mismatch on '" + l + "'");
    }
    const Labels a = rho_ab.shape().complement(b);
    const auto eig = hermitian_eig(sigma_b.matrix());
    if (eig.values.back() <= 1e-9) throw ConditioningError("sigma_B is not full rank");
    const ComplexMatrix inv_sqrt =
        hermitian_function(sigma_b.matrix(), [](double x) { return cplx(1.0 / std::sqrt(x)); });
    const std::size_t da = rho_ab.shape().dim_of(a);
    const ComplexMatrix s = tensor_product(ComplexMatrix::identity(da), inv_sqrt);
    Labels order = a;
    order.insert(order.end(), b.begin(), b.end());
    const ComplexMatrix r = rho_ab.permuted(order).matrix();
    const ComplexMatrix m = s * r * s;
    const double lmax = hermitian_eigenvalues(m).front();
    return -std::log2(lmax);
}

struct MinEntropyResult {
    double value = 0;  // certified lower bound on H_min(A|B)
    double lower_bracket = 0;  // -log2 |B|
    double upper_bracket = 0;  // log2 |A|
    DensityOperator sigma;     // best candidate found
    std::string label = "lower bound";
};

struct MinEntropyOptions {
    std::size_t restarts = 8;
    std::uint64_t seed = 0;
    std::size_t max_evals_per_restart = 4000;
};

namespace detail {
inline DensityOperator sigma_from_params(const std::vector<double>& x, const SubsystemShape& shape) {
    const std::size_t d = shape.total();
    ComplexMatrix g(d, d);
    for (std::size_t i = 0; i < d * d; ++i) g.data()[i] = cplx(x[2 * i], x[2 * i + 1]);
    ComplexMatrix s = g * g.adjoint();
    const double tr = s.trace().real();
    if (!(tr > 0)) throw ConditioningError("degenerate parameterization");
    s *= cplx(1.0 / tr);
    return {std::move(s), shape};
}
}  // namespace detail

// sup over sigma_B of min_entropy_fixed, approximated from below.
inline MinEntropyResult min_entropy(const DensityOperator& rho_ab, const Labels& b_group,
                                    const MinEntropyOptions& opt = {}) {
    if (opt.restarts < 1) throw ConfigError("min_entropy needs at least one restart");
    const Labels a_group = rho_ab.shape().complement(b_group);
    const SubsystemShape b_shape = rho_ab.shape().restrict_to(b_group);
    const std::size_t db = b_shape.total();
    const std::size_t da = rho_ab.shape().dim_of(a_group);

    MinEntropyResult res;
    res.lower_bracket = -std::log2(static_cast<double>(db));
    res.upper_bracket = std::log2(static_cast<double>(da));

    bool have = false;
    auto try_candidate = [&](const DensityOperator& sigma) {
        try {
            const double v = min_entropy_fixed(rho_ab, sigma);
            if (!have || v > res.value) {
                have = true;
                res.value = v;
                res.sigma = sigma;
            }
            return v;
        } catch (const ConditioningError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    const DensityOperator rho_b = rho_ab.reduce(b_group);
    try_candidate(DensityOperator::maximally_mixed(b_shape));
    try_candidate(rho_b);

    const Objective objective = [&](const std::vector<double>& x) {
        try {
            return min_entropy_fixed(rho_ab, detail::sigma_from_params(x, b_shape));
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    for (std::size_t r = 0; r < opt.restarts; ++r) {
        std::vector<double> x0(2 * db * db);
        if (r == 0) {
            // Start from the better of the two closed-form candidates.
            const ComplexMatrix g = sqrt_psd(res.sigma.matrix());
            for (std::size_t i = 0; i < db * db; ++i) {
                x0[2 * i] = g.data()[i].real();
                x0[2 * i + 1] = g.data()[i].imag();
            }
        } else {
            Rng rng(mix_seed(opt.seed, r));
            std::normal_distribution<double> normal(0.0, 1.0);
            for (auto& x : x0) x = normal(rng) / std::sqrt(static_cast<double>(db));
        }
        PatternSearchOptions ps;
        ps.max_evals = opt.max_evals_per_restart;
        ps.rotate_directions = true;
        ps.seed = mix_seed(opt.seed ^ 0xA5A5A5A5ULL, r);
        const auto best = pattern_search(objective, x0, ps);
        if (std::isfinite(best.value)) try_candidate(detail::sigma_from_params(best.x, b_shape));
    }
    res.value = std::clamp(res.value, res.lower_bracket, res.upper_bracket);
    return res;
}

// ---------------------------------------------------------------------------

struct CsiszarResult {
    double lhs = 0;  // sum_i I(A_{i+1}^n ; B_i | B^{i-1})
    double rhs = 0;  // sum_i I(B^{i-1} ; A_i | A_{i+1}^n)
    double residual = 0;
};

// a[i] and b[i] name the i-th letters A_{i+1}, B_{i+1}.
inline CsiszarResult csiszar_sum_check(const DensityOperator& rho, const Labels& a, const Labels& b) {
    const std::size_t n = a.size();
    if (n < 1 || b.size() != n) throw ValidationError("Csiszar check needs n >= 1 letters on both sides");
    CsiszarResult res;
    for (std::size_t i = 0; i < n; ++i) {
        const Labels a_future(a.begin() + static_cast<std::ptrdiff_t>(i + 1), a.end());
        const Labels b_past(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(i));
        if (!a_future.empty()) res.lhs += mutual_information(rho, a_future, {b[i]}, b_past);
        if (!b_past.empty()) res.rhs += mutual_information(rho, b_past, {a[i]}, a_future);
    }
    res.residual = std::abs(res.lhs - res.rhs);
    return res;
}

// ---------------------------------------------------------------------------

struct AfwResult {
    double lhs = 0;
    double rhs = 0;
    double trace_distance = 0;  // ||rho - sigma||_1
};

// lhs = |I(X;Y)_rho - I(X;Y)_sigma|; rhs = 2 t log2|Y| + 2 + t with t = ||rho - sigma||_1,
// i.e. 4 log|Y| sqrt(D) + 2 (1 + sqrt(D)) at sqrt(D) = t / 2.
inline AfwResult afw_bound(const DensityOperator& rho, const DensityOperator& sigma, const Labels& x,
                           const Labels& y) {
    if (rho.shape().select(rho.labels()) != sigma.permuted(rho.labels()).shape())
        throw ShapeError("AFW comparison needs identical shapes");
    AfwResult res;
    res.trace_distance = trace_distance_aligned(rho, sigma);
    if (res.trace_distance > 2.0 + 1e-9) throw ValidationError("trace distance exceeds 2");
    res.lhs = std::abs(mutual_information(rho, x, y) - mutual_information(sigma, x, y));
    const double log_dim = std::log2(static_cast<double>(rho.shape().dim_of(y)));
    res.rhs = 2.0 * res.trace_distance * log_dim + 2.0 + res.trace_distance;
    return res;
}

}  // namespace qmask
