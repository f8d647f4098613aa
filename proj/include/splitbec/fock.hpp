#pragma once

#include <cmath>
#include <compare>
#include <string>
#include <vector>

#include "common.hpp"

namespace splitbec {

enum class Mode { a, b };

/// Occupation of the two condensate modes, |k, l>.
struct FockIndex {
    int k = 0;
    int l = 0;
    friend auto operator<=>(const FockIndex&, const FockIndex&) = default;
};

/// Per-mode occupation cutoff of the truncated two-mode Fock space.
///
/// Basis states are laid out row-major, k outer and l inner:
/// flat index i = k * (n_max + 1) + l.
class ModeCutoff {
public:
    explicit ModeCutoff(int n_max) : n_max_(n_max) {
        require(n_max >= 1, "n_max must be >= 1 (got " + std::to_string(n_max) + ")");
    }

    int n_max() const noexcept { return n_max_; }
    int levels() const noexcept { return n_max_ + 1; }
    int dim() const noexcept { return levels() * levels(); }

    bool contains(FockIndex s) const noexcept { return s.k >= 0 && s.l >= 0 && s.k <= n_max_ && s.l <= n_max_; }

    int flatten(FockIndex s) const {
        require(contains(s), "Fock state outside truncated basis");
        return s.k * levels() + s.l;
    }

    FockIndex unflatten(int i) const {
        require(i >= 0 && i < dim(), "flat index outside truncated basis");
        return {i / levels(), i % levels()};
    }

    friend bool operator==(const ModeCutoff&, const ModeCutoff&) = default;

private:
    int n_max_;
};

/// Sparse complex operator on a finite basis. Immutable once built.
class Operator {
public:
    Operator() = default;
    explicit Operator(SparseMatrix m) : m_(std::move(m)) {
        require(m_.rows() == m_.cols(), "operator must be square");
        m_.makeCompressed();
    }

    static Operator identity(int dim) {
        SparseMatrix id(dim, dim);
        id.setIdentity();
        return Operator(std::move(id));
    }

    static Operator zero(int dim) { return Operator(SparseMatrix(dim, dim)); }

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const SparseMatrix& sparse() const noexcept { return m_; }
    Matrix dense() const { return Matrix(m_); }
    cplx coeff(int row, int col) const { return m_.coeff(row, col); }

    Operator adjoint() const { return Operator(SparseMatrix(m_.adjoint())); }

    friend Operator operator+(const Operator& x, const Operator& y) {
        check_dims(x, y);
        return Operator(SparseMatrix(x.m_ + y.m_));
    }
    friend Operator operator-(const Operator& x, const Operator& y) {
        check_dims(x, y);
        return Operator(SparseMatrix(x.m_ - y.m_));
    }
    friend Operator operator*(const Operator& x, const Operator& y) {
        check_dims(x, y);
        return Operator(SparseMatrix(x.m_ * y.m_));
    }
    friend Operator operator*(cplx s, const Operator& x) { return Operator(SparseMatrix(s * x.m_)); }

    static void check_dims(const Operator& x, const Operator& y) {
        if (x.dim() != y.dim())
            fail(ErrorKind::validation, "operator dimension mismatch: " + std::to_string(x.dim()) + " vs " +
                                            std::to_string(y.dim()));
    }

private:
    SparseMatrix m_;
};

inline Operator op_mul(const Operator& x, const Operator& y) { return x * y; }
inline Operator op_adjoint(const Operator& x) { return x.adjoint(); }
inline Operator commutator(const Operator& x, const Operator& y) { return x * y - y * x; }

/// Ladder operator a (or b). Amplitude pushed above n_max by the adjoint is dropped.
inline Operator annihilation(Mode mode, ModeCutoff cutoff) {
    const int dim = cutoff.dim();
    std::vector<Eigen::Triplet<cplx>> entries;
    entries.reserve(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const FockIndex s = cutoff.unflatten(i);
        const int occ = mode == Mode::a ? s.k : s.l;
        if (occ == 0) continue;
        const FockIndex lowered = mode == Mode::a ? FockIndex{s.k - 1, s.l} : FockIndex{s.k, s.l - 1};
        entries.emplace_back(cutoff.flatten(lowered), i, std::sqrt(static_cast<double>(occ)));
    }
    SparseMatrix m(dim, dim);
    m.setFromTriplets(entries.begin(), entries.end());
    return Operator(std::move(m));
}

inline Operator creation(Mode mode, ModeCutoff cutoff) { return annihilation(mode, cutoff).adjoint(); }

inline Operator number_op(Mode mode, ModeCutoff cutoff) {
    const int dim = cutoff.dim();
    SparseMatrix m(dim, dim);
    m.reserve(Eigen::VectorXi::Constant(dim, 1));
    for (int i = 0; i < dim; ++i) {
        const FockIndex s = cutoff.unflatten(i);
        m.insert(i, i) = static_cast<double>(mode == Mode::a ? s.k : s.l);
    }
    return Operator(std::move(m));
}

// Schwinger spin operators of the unsplit condensate: S^x = a'b + b'a,
// S^y = i(b'a - a'b), S^z = a'a - b'b. [S^x, S^y] = 2i S^z.
inline Operator spin_x(ModeCutoff c) {
    const Operator ab = creation(Mode::a, c) * annihilation(Mode::b, c);
    return ab + ab.adjoint();
}

inline Operator spin_y(ModeCutoff c) {
    const Operator ab = creation(Mode::a, c) * annihilation(Mode::b, c);
    return cplx(0, 1) * (ab.adjoint() - ab);
}

inline Operator spin_z(ModeCutoff c) { return number_op(Mode::a, c) - number_op(Mode::b, c); }

/// Projector |k,l><k,l| as a dense matrix.
inline Matrix fock_projector(ModeCutoff c, FockIndex s) {
    Matrix p = Matrix::Zero(c.dim(), c.dim());
    const int i = c.flatten(s);
    p(i, i) = 1.0;
    return p;
}

} // namespace splitbec
