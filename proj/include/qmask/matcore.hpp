#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace qmask {

using cplx = std::complex<double>;
using Labels = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Dimension cap

namespace detail {
inline std::atomic<std::size_t>& dim_cap_storage() {
    static std::atomic<std::size_t> cap = [] {
        std::size_t value = std::size_t{1} << 14;
        if (const char* env = std::getenv("QMASK_DIM_CAP")) {
            char* end = nullptr;
            unsigned long long parsed = std::strtoull(env, &end, 10);
            if (end != env && parsed > 0) value = static_cast<std::size_t>(parsed);
        }
        return value;
    }();
    return cap;
}
}  // namespace detail

// Largest total Hilbert-space dimension any operation may create.
inline std::size_t dim_cap() { return detail::dim_cap_storage().load(); }
inline void set_dim_cap(std::size_t cap) { detail::dim_cap_storage().store(cap); }

inline void check_dim(std::size_t dim, const std::string& what) {
    if (dim > dim_cap()) {
        throw DimensionLimitError(what + ": dimension " + std::to_string(dim) +
                                  " exceeds cap " + std::to_string(dim_cap()));
    }
}

// ---------------------------------------------------------------------------
// Seeds

// splitmix64 finalizer; used to derive independent per-sample seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// ComplexMatrix: dense, row-major.

class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows * cols) throw ShapeError("matrix entry count does not match shape");
    }
    ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static ComplexMatrix diagonal(std::span<const double> d) {
        ComplexMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }
    // |v><v|
    static ComplexMatrix projector(std::span<const cplx> v) { return outer(v, v); }
    // |a><b|
    static ComplexMatrix outer(std::span<const cplx> a, std::span<const cplx> b) {
        ComplexMatrix m(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * std::conj(b[j]);
        return m;
    }
    static ComplexMatrix column(std::span<const cplx> v) {
        return ComplexMatrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }
    bool empty() const { return data_.empty(); }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix m(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }
    ComplexMatrix transpose() const {
        ComplexMatrix m(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) m(j, i) = (*this)(i, j);
        return m;
    }
    ComplexMatrix conj() const {
        ComplexMatrix m = *this;
        for (auto& x : m.data_) x = std::conj(x);
        return m;
    }
    cplx trace() const {
        cplx t = 0;
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }
    std::vector<cplx> column_vector(std::size_t c) const {
        std::vector<cplx> v(rows_);
        for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
        return v;
    }
    double max_abs() const {
        double m = 0;
        for (const auto& x : data_) m = std::max(m, std::abs(x));
        return m;
    }
    double frobenius_norm() const {
        double s = 0;
        for (const auto& x : data_) s += std::norm(x);
        return std::sqrt(s);
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    ComplexMatrix& operator*=(cplx s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        if (a.cols_ != b.rows_) throw ShapeError("matrix product with mismatched inner dimension");
        ComplexMatrix m(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            cplx* out = &m.data_[i * b.cols_];
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                const cplx* brow = &b.data_[k * b.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) out[j] += aik * brow[j];
            }
        }
        return m;
    }
    friend std::vector<cplx> operator*(const ComplexMatrix& a, std::span<const cplx> v) {
        if (a.cols_ != v.size()) throw ShapeError("matrix-vector product with mismatched dimension");
        std::vector<cplx> out(a.rows_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            cplx s = 0;
            for (std::size_t k = 0; k < a.cols_; ++k) s += a(i, k) * v[k];
            out[i] = s;
        }
        return out;
    }

    bool operator==(const ComplexMatrix&) const = default;

private:
    void require_same_shape(const ComplexMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeError("matrix shapes differ");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix shapes differ");
    double m = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline double hermiticity_residual(const ComplexMatrix& m) {
    if (!m.square()) throw ShapeError("hermiticity requires a square matrix");
    double r = 0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j) r = std::max(r, std::abs(m(i, j) - std::conj(m(j, i))));
    return r;
}

inline double vector_norm(std::span<const cplx> v) {
    double s = 0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

inline cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw ShapeError("inner product of vectors with different lengths");
    cplx s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

// ---------------------------------------------------------------------------
// SubsystemShape: ordered, label-addressed tensor factors.

struct SubsystemShape {
    Labels labels;
    std::vector<std::size_t> dims;

    SubsystemShape() = default;
    SubsystemShape(Labels l, std::vector<std::size_t> d) : labels(std::move(l)), dims(std::move(d)) { validate(); }

    void validate() const {
        if (labels.size() != dims.size()) throw ShapeError("label and dimension lists differ in length");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i].empty()) throw LabelError("empty subsystem label");
            if (dims[i] == 0) throw ShapeError("subsystem '" + labels[i] + "' has dimension 0");
            for (std::size_t j = 0; j < i; ++j)
                if (labels[j] == labels[i]) throw LabelError("duplicate subsystem label '" + labels[i] + "'");
        }
    }

    std::size_t size() const { return labels.size(); }
    std::size_t total() const {
        std::size_t t = 1;
        for (auto d : dims) t *= d;
        return t;
    }
    bool contains(const std::string& label) const {
        return std::find(labels.begin(), labels.end(), label) != labels.end();
    }
    std::size_t index_of(const std::string& label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) throw LabelError("unknown subsystem label '" + label + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }
    std::size_t dim(const std::string& label) const { return dims[index_of(label)]; }
    std::size_t dim_of(const Labels& group) const {
        std::size_t t = 1;
        for (const auto& l : group) t *= dim(l);
        return t;
    }
    // Row-major strides: first label is the most significant digit.
    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(dims.size(), 1);
        for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
        return s;
    }
    // Sub-shape in the given label order.
    SubsystemShape select(const Labels& order) const {
        SubsystemShape out;
        for (const auto& l : order) {
            out.labels.push_back(l);
            out.dims.push_back(dim(l));
        }
        out.validate();
        return out;
    }
    // Sub-shape keeping the original relative order.
    SubsystemShape restrict_to(const Labels& keep) const {
        for (const auto& l : keep) index_of(l);
        SubsystemShape out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (std::find(keep.begin(), keep.end(), labels[i]) != keep.end()) {
                out.labels.push_back(labels[i]);
                out.dims.push_back(dims[i]);
            }
        }
        out.validate();
        return out;
    }
    Labels complement(const Labels& group) const {
        for (const auto& l : group) index_of(l);
        Labels rest;
        for (const auto& l : labels)
            if (std::find(group.begin(), group.end(), l) == group.end()) rest.push_back(l);
        return rest;
    }
    SubsystemShape concat(const SubsystemShape& other) const {
        SubsystemShape out = *this;
        out.labels.insert(out.labels.end(), other.labels.begin(), other.labels.end());
        out.dims.insert(out.dims.end(), other.dims.begin(), other.dims.end());
        out.validate();
        return out;
    }
    SubsystemShape relabeled(const Labels& from, const Labels& to) const {
        if (from.size() != to.size()) throw LabelError("relabel lists differ in length");
        SubsystemShape out = *this;
        for (std::size_t i = 0; i < from.size(); ++i) out.labels[index_of(from[i])] = to[i];
        out.validate();
        return out;
    }
    bool operator==(const SubsystemShape&) const = default;
};

namespace detail {

// For each flat index of `group` (in the given order), the contribution to the
// flat index of `shape`.
inline std::vector<std::size_t> offsets(const SubsystemShape& shape, const Labels& group) {
    const auto strides = shape.strides();
    std::vector<std::size_t> gdims, gstrides;
    for (const auto& l : group) {
        auto i = shape.index_of(l);
        gdims.push_back(shape.dims[i]);
        gstrides.push_back(strides[i]);
    }
    std::size_t n = 1;
    for (auto d : gdims) n *= d;
    std::vector<std::size_t> out(n, 0);
    std::vector<std::size_t> digit(gdims.size(), 0);
    for (std::size_t f = 0; f < n; ++f) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < gdims.size(); ++k) off += digit[k] * gstrides[k];
        out[f] = off;
        for (std::size_t k = gdims.size(); k-- > 0;) {
            if (++digit[k] < gdims[k]) break;
            digit[k] = 0;
        }
    }
    return out;
}

inline void require_disjoint_cover(const SubsystemShape& shape, const Labels& order) {
    if (order.size() != shape.size()) throw LabelError("permutation must list every subsystem exactly once");
    for (std::size_t i = 0; i < order.size(); ++i) {
        shape.index_of(order[i]);
        for (std::size_t j = 0; j < i; ++j)
            if (order[i] == order[j]) throw LabelError("duplicate label '" + order[i] + "' in permutation");
    }
}

inline void require_unique(const Labels& group) {
    for (std::size_t i = 0; i < group.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (group[i] == group[j]) throw LabelError("duplicate label '" + group[i] + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor structure

inline ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
    const std::size_t rows = a.rows() * b.rows();
    const std::size_t cols = a.cols() * b.cols();
    check_dim(std::max(rows, cols), "tensor_product");
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const cplx aij = a(i, j);
            if (aij == cplx{}) continue;
            for (std::size_t k = 0; k < b.rows(); ++k)
                for (std::size_t l = 0; l < b.cols(); ++l)
                    m(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
        }
    return m;
}

inline std::vector<cplx> tensor_product(std::span<const cplx> a, std::span<const cplx> b) {
    check_dim(a.size() * b.size(), "tensor_product");
    std::vector<cplx> v(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) v[i * b.size() + j] = a[i] * b[j];
    return v;
}

// Reorder the tensor factors of a square operator.
inline ComplexMatrix permute_subsystems(const ComplexMatrix& m, const SubsystemShape& shape, const Labels& order) {
    detail::require_disjoint_cover(shape, order);
    if (m.rows() != shape.total() || m.cols() != shape.total())
        throw ShapeError("operator dimension does not match subsystem shape");
    const auto map = detail::offsets(shape, order);
    const std::size_t n = map.size();
    ComplexMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = m(map[i], map[j]);
    return out;
}

inline std::vector<cplx> permute_subsystems(std::span<const cplx> v, const SubsystemShape& shape, const Labels& order) {
    detail::require_disjoint_cover(shape, order);
    if (v.size() != shape.total()) throw ShapeError("vector length does not match subsystem shape");
    const auto map = detail::offsets(shape, order);
    std::vector<cplx> out(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = v[map[i]];
    return out;
}

// Trace out everything not in `keep`; the result keeps the original relative order.
inline ComplexMatrix partial_trace(const ComplexMatrix& m, const SubsystemShape& shape, const Labels& keep) {
    detail::require_unique(keep);
    if (m.rows() != shape.total() || m.cols() != shape.total())
        throw ShapeError("operator dimension does not match subsystem shape");
    const auto kept = shape.restrict_to(keep);
    const auto traced = shape.complement(keep);
    const auto ko = detail::offsets(shape, kept.labels);
    const auto to = detail::offsets(shape, traced);
    const std::size_t n = ko.size();
    ComplexMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cplx s = 0;
            for (auto t : to) s += m(ko[i] + t, ko[j] + t);
            out(i, j) = s;
        }
    return out;
}

// Reduced density matrix of the pure state |v> on `keep` (original order).
inline ComplexMatrix partial_trace_pure(std::span<const cplx> v, const SubsystemShape& shape, const Labels& keep) {
    detail::require_unique(keep);
    if (v.size() != shape.total()) throw ShapeError("vector length does not match subsystem shape");
    const auto kept = shape.restrict_to(keep);
    const auto traced = shape.complement(keep);
    const auto ko = detail::offsets(shape, kept.labels);
    const auto to = detail::offsets(shape, traced);
    const std::size_t n = ko.size();
    ComplexMatrix out(n, n);
    for (auto t : to)
        for (std::size_t i = 0; i < n; ++i) {
            const cplx vi = v[ko[i] + t];
            if (vi == cplx{}) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * std::conj(v[ko[j] + t]);
        }
    return out;
}

// Apply `op` (out_shape.total() x dim(acting)) to the `acting` factors of |v>.
// The output factors replace the acting ones at the position of the first
// acting label.
struct LabeledVector {
    std::vector<cplx> amplitudes;
    SubsystemShape shape;
};

namespace detail {
inline SubsystemShape splice_shape(const SubsystemShape& shape, const Labels& acting, const SubsystemShape& out) {
    std::size_t first = shape.size();
    for (const auto& l : acting) first = std::min(first, shape.index_of(l));
    SubsystemShape result;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i == first) {
            result.labels.insert(result.labels.end(), out.labels.begin(), out.labels.end());
            result.dims.insert(result.dims.end(), out.dims.begin(), out.dims.end());
        }
        if (std::find(acting.begin(), acting.end(), shape.labels[i]) == acting.end()) {
            result.labels.push_back(shape.labels[i]);
            result.dims.push_back(shape.dims[i]);
        }
    }
    if (first == shape.size()) {
        result.labels.insert(result.labels.end(), out.labels.begin(), out.labels.end());
        result.dims.insert(result.dims.end(), out.dims.begin(), out.dims.end());
    }
    result.validate();
    return result;
}
}  // namespace detail

inline LabeledVector apply_to_subsystems(std::span<const cplx> v, const SubsystemShape& shape,
                                         const ComplexMatrix& op, const Labels& acting,
                                         const SubsystemShape& out_shape) {
    detail::require_unique(acting);
    if (v.size() != shape.total()) throw ShapeError("vector length does not match subsystem shape");
    const std::size_t din = shape.dim_of(acting);
    if (op.cols() != din || op.rows() != out_shape.total())
        throw ShapeError("operator shape does not match acting subsystems");
    const auto rest = shape.complement(acting);
    const auto ro = detail::offsets(shape, rest);
    const auto ao = detail::offsets(shape, acting);
    const std::size_t dout = op.rows();
    // Intermediate order: rest..., out...
    SubsystemShape mid = shape.select(rest);
    for (const auto& l : out_shape.labels)
        if (mid.contains(l)) throw LabelError("output label '" + l + "' collides with an untouched subsystem");
    mid = mid.concat(out_shape);
    check_dim(mid.total(), "apply_to_subsystems");
    std::vector<cplx> w(ro.size() * dout);
    std::vector<cplx> block(din);
    for (std::size_t r = 0; r < ro.size(); ++r) {
        for (std::size_t a = 0; a < din; ++a) block[a] = v[ro[r] + ao[a]];
        for (std::size_t o = 0; o < dout; ++o) {
            cplx s = 0;
            for (std::size_t a = 0; a < din; ++a) s += op(o, a) * block[a];
            w[r * dout + o] = s;
        }
    }
    SubsystemShape target = detail::splice_shape(shape, acting, out_shape);
    if (target.labels == mid.labels) return {std::move(w), std::move(mid)};
    return {permute_subsystems(w, mid, target.labels), std::move(target)};
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver (cyclic complex Jacobi).

constexpr double kHermitianTol = 1e-10;

struct EigenDecomposition {
    std::vector<double> values;  // descending
    ComplexMatrix vectors;       // columns, matching `values`
};

namespace detail {

inline void require_hermitian(const ComplexMatrix& m) {
    if (!m.square()) throw ShapeError("eigensolver requires a square matrix");
    const double scale = std::max(1.0, m.max_abs());
    if (hermiticity_residual(m) > kHermitianTol * scale)
        throw SymmetryError("matrix is not Hermitian within tolerance");
}

inline EigenDecomposition jacobi(const ComplexMatrix& input, bool want_vectors) {
    const std::size_t n = input.rows();
    ComplexMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + std::conj(input(j, i)));
    for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();
    ComplexMatrix v = want_vectors ? ComplexMatrix::identity(n) : ComplexMatrix();

    double total = 0;
    for (const auto& x : a.data()) total += std::norm(x);
    const double threshold = 1e-32 * std::max(total, 1e-300);

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    for (;; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (off <= threshold) break;
        if (sweep >= kMaxSweeps) throw ConvergenceError("Jacobi eigensolver did not converge");
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cplx apq = a(p, q);
                const double mag = std::abs(apq);
                if (mag == 0.0) continue;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                // Skip negligible entries once they cannot change the diagonal.
                if (sweep > 3 && std::abs(app) + 1e3 * mag == std::abs(app) &&
                    std::abs(aqq) + 1e3 * mag == std::abs(aqq)) {
                    a(p, q) = a(q, p) = 0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * mag);
                double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const cplx e = apq / mag;
                const cplx dq = std::conj(e);
                const cplx uqp = -s * dq;
                const cplx uqq = c * dq;
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * c + akq * uqp;
                    a(k, q) = akp * s + akq * uqq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * e * aqk;
                    a(q, k) = s * apk + c * e * aqk;
                }
                a(p, p) = app - t * mag;
                a(q, q) = aqq + t * mag;
                a(p, q) = a(q, p) = 0;
                if (want_vectors) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const cplx vkp = v(k, p), vkq = v(k, q);
                        v(k, p) = vkp * c + vkq * uqp;
                        v(k, q) = vkp * s + vkq * uqq;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x).real() > a(y, y).real(); });
    EigenDecomposition out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(order[i], order[i]).real();
    if (want_vectors) {
        out.vectors = ComplexMatrix(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
    }
    return out;
}

}  // namespace detail

inline EigenDecomposition hermitian_eig(const ComplexMatrix& m) {
    detail::require_hermitian(m);
    return detail::jacobi(m, true);
}

inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& m) {
    detail::require_hermitian(m);
    return detail::jacobi(m, false).values;
}

// V f(L) V^dagger for Hermitian m.
inline ComplexMatrix hermitian_function(const ComplexMatrix& m, const std::function<cplx(double)>& f) {
    const auto eig = hermitian_eig(m);
    const std::size_t n = m.rows();
    ComplexMatrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const cplx fk = f(eig.values[k]);
        if (fk == cplx{}) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const cplx vik = eig.vectors(i, k) * fk;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(eig.vectors(j, k));
        }
    }
    return out;
}

// Square root of a positive semidefinite matrix; small negative eigenvalues are clipped.
inline ComplexMatrix sqrt_psd(const ComplexMatrix& m) {
    return hermitian_function(m, [](double x) { return cplx(x > 0 ? std::sqrt(x) : 0.0); });
}

inline std::vector<double> singular_values(const ComplexMatrix& m) {
    const ComplexMatrix g = m.rows() >= m.cols() ? m.adjoint() * m : m * m.adjoint();
    auto ev = hermitian_eigenvalues(g);
    for (auto& x : ev) x = x > 0 ? std::sqrt(x) : 0.0;
    return ev;
}

inline double trace_norm(const ComplexMatrix& m) {
    if (m.square() && hermiticity_residual(m) <= 1e-12 * std::max(1.0, m.max_abs())) {
        double s = 0;
        for (double x : hermitian_eigenvalues(m)) s += std::abs(x);
        return s;
    }
    double s = 0;
    for (double x : singular_values(m)) s += x;
    return s;
}

// Root fidelity ||sqrt(rho) sqrt(sigma)||_1.
inline double fidelity(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    const ComplexMatrix sr = sqrt_psd(rho);
    const ComplexMatrix inner_m = sr * sigma * sr;
    double s = 0;
    for (double x : hermitian_eigenvalues(inner_m)) s += x > 0 ? std::sqrt(x) : 0.0;
    return s;
}

inline double fidelity_distance(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    const double f = std::min(1.0, fidelity(rho, sigma));
    return std::sqrt(std::max(0.0, 1.0 - f * f));
}

// ---------------------------------------------------------------------------
// Random matrices

inline ComplexMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    ComplexMatrix g(rows, cols);
    const double scale = 1.0 / std::sqrt(2.0);
    for (auto& x : g.data()) {
        const double re = normal(rng);
        const double im = normal(rng);
        x = cplx(re, im) * scale;
    }
    return g;
}

// Orthonormalize the columns of m in place (modified Gram-Schmidt, two passes).
// R's diagonal is real positive, which fixes the phase convention.
inline ComplexMatrix orthonormalize_columns(ComplexMatrix m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    if (cols > rows) throw ShapeError("cannot orthonormalize more columns than rows");
    for (std::size_t j = 0; j < cols; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                cplx proj = 0;
                for (std::size_t i = 0; i < rows; ++i) proj += std::conj(m(i, k)) * m(i, j);
                for (std::size_t i = 0; i < rows; ++i) m(i, j) -= proj * m(i, k);
            }
        }
        double norm = 0;
        for (std::size_t i = 0; i < rows; ++i) norm += std::norm(m(i, j));
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw ConditioningError("columns are linearly dependent");
        for (std::size_t i = 0; i < rows; ++i) m(i, j) /= norm;
    }
    return m;
}

inline ComplexMatrix haar_unitary(std::size_t dim, Rng& rng) {
    if (dim == 0) throw ShapeError("unitary dimension must be positive");
    check_dim(dim, "haar_unitary");
    return orthonormalize_columns(gaussian_matrix(dim, dim, rng));
}

inline ComplexMatrix haar_unitary(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    return haar_unitary(dim, rng);
}

// First `cols` columns of a Haar unitary: a Haar-random isometry.
inline ComplexMatrix haar_isometry(std::size_t rows, std::size_t cols, Rng& rng) {
    if (cols > rows) throw ShapeError("isometry needs rows >= cols");
    return orthonormalize_columns(gaussian_matrix(rows, cols, rng));
}

inline std::vector<cplx> haar_state(std::size_t dim, Rng& rng) {
    return haar_isometry(dim, 1, rng).column_vector(0);
}

}  // namespace qmask
