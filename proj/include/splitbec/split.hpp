#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <string>
#include <utility>
#include <vector>

#include "combinatorics.hpp"
#include "common.hpp"
#include "fock.hpp"
#include "liouville.hpp"
#include "sector.hpp"

namespace splitbec {

/// Occupations of a1, b1, a2, b2 after the split.
struct SplitFockIndex {
    int k1 = 0;
    int l1 = 0;
    int k2 = 0;
    int l2 = 0;

    int n1() const noexcept { return k1 + l1; }
    int n2() const noexcept { return k2 + l2; }
    int total() const noexcept { return n1() + n2(); }

    friend auto operator<=>(const SplitFockIndex&, const SplitFockIndex&) = default;
};

/// All four-mode states with k1 + l1 + k2 + l2 = N, ordered by (N1, k1, k2).
/// States sharing N1 are contiguous; within a block the index is k1 * (N2 + 1) + k2.
class SectorBasis {
public:
    explicit SectorBasis(int n_total) : n_(n_total) {
        require(n_total >= 0, "sector N must be >= 0");
        offsets_.reserve(static_cast<std::size_t>(n_total) + 2);
        for (int n1 = 0; n1 <= n_total; ++n1) {
            offsets_.push_back(static_cast<int>(states_.size()));
            const int n2 = n_total - n1;
            for (int k1 = 0; k1 <= n1; ++k1)
                for (int k2 = 0; k2 <= n2; ++k2) states_.push_back({k1, n1 - k1, k2, n2 - k2});
        }
        offsets_.push_back(static_cast<int>(states_.size()));
    }

    int n_total() const noexcept { return n_; }
    int size() const noexcept { return static_cast<int>(states_.size()); }
    const std::vector<SplitFockIndex>& states() const noexcept { return states_; }
    const SplitFockIndex& operator[](int i) const { return states_.at(static_cast<std::size_t>(i)); }

    int block_begin(int n1) const { return offsets_.at(static_cast<std::size_t>(n1)); }
    int block_size(int n1) const { return (n1 + 1) * (n_ - n1 + 1); }

    /// Position of s in the basis, or -1 when s is not in this sector.
    int index_of(const SplitFockIndex& s) const {
        if (s.k1 < 0 || s.l1 < 0 || s.k2 < 0 || s.l2 < 0 || s.total() != n_) return -1;
        return block_begin(s.n1()) + s.k1 * (s.n2() + 1) + s.k2;
    }

private:
    int n_;
    std::vector<SplitFockIndex> states_;
    std::vector<int> offsets_;
};

inline std::vector<SplitFockIndex> sector_basis(int n_total) { return SectorBasis(n_total).states(); }

/// Normalized fixed-N density matrix of the split condensate.
struct SplitSectorState {
    SectorBasis basis{0};
    Matrix rho_sp;
    double prob = 0.0; // p_N

    int n_total() const noexcept { return basis.n_total(); }
    int dim() const noexcept { return basis.size(); }

    /// Subsystem 1 holds (a1, b1), subsystem 2 holds (a2, b2).
    std::pair<FockIndex, FockIndex> bipartition(int i) const {
        const SplitFockIndex& s = basis[i];
        return {FockIndex{s.k1, s.l1}, FockIndex{s.k2, s.l2}};
    }
};

namespace detail {

// Amplitude of |k1,l1,k2,l2> in the split image of |k1+k2, l1+l2>.
inline double split_weight(const SplitFockIndex& s) {
    return std::sqrt(binomial(s.k1 + s.k2, s.k1) * binomial(s.l1 + s.l2, s.l1)) *
           std::pow(2.0, -0.5 * s.total());
}

} // namespace detail

/// Expansion of |k, l> into the four split modes.
inline std::vector<std::pair<SplitFockIndex, double>> split_fock_amplitudes(int k, int l) {
    require(k >= 0 && l >= 0, "occupations must be non-negative");
    std::vector<std::pair<SplitFockIndex, double>> out;
    for (int n = k; n >= 0; --n)
        for (int m = l; m >= 0; --m) {
            const SplitFockIndex s{n, m, k - n, l - m};
            out.emplace_back(s, detail::split_weight(s));
        }
    return out;
}

/// Split sector density built from original-space matrix elements:
/// <k1 l1 k2 l2| rho_sp |k1' l1' k2' l2'> = w w' rho_{(k1+k2)(l1+l2),(k1'+k2')(l1'+l2')}.
inline SplitSectorState split_sector_density(const TwoModeState& state, int n_total,
                                             double floor = kEmptySectorFloor) {
    const ModeCutoff c = state.cutoff;
    check_sector_range(c, n_total);
    const double p = sector_weight(state, n_total);
    if (p < floor) fail(ErrorKind::empty_sector, "empty sector N = " + std::to_string(n_total));

    SplitSectorState out;
    out.basis = SectorBasis(n_total);
    out.prob = p;
    const int dim = out.basis.size();
    std::vector<int> parent(static_cast<std::size_t>(dim));
    std::vector<double> weight(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const SplitFockIndex& s = out.basis[i];
        const FockIndex f{s.k1 + s.k2, s.l1 + s.l2};
        parent[static_cast<std::size_t>(i)] = c.contains(f) ? c.flatten(f) : -1;
        weight[static_cast<std::size_t>(i)] = detail::split_weight(s);
    }
    out.rho_sp = Matrix::Zero(dim, dim);
    for (int col = 0; col < dim; ++col) {
        const int pc = parent[static_cast<std::size_t>(col)];
        if (pc < 0) continue;
        for (int row = 0; row < dim; ++row) {
            const int pr = parent[static_cast<std::size_t>(row)];
            if (pr < 0) continue;
            out.rho_sp(row, col) =
                state.rho(pr, pc) * (weight[static_cast<std::size_t>(row)] * weight[static_cast<std::size_t>(col)] / p);
        }
    }
    return out;
}

inline constexpr int kSplitDirectMaxCutoff = 4;

/// Brute-force split: builds every |k,l> image by repeated application of
/// (a1^dag + a2^dag)/sqrt2 and (b1^dag + b2^dag)/sqrt2 on the four-mode vacuum, forms the
/// full split density matrix and projects onto sector N.
inline SplitSectorState split_direct(const TwoModeState& state, int n_total, double floor = kEmptySectorFloor) {
    const ModeCutoff c = state.cutoff;
    require(c.n_max() <= kSplitDirectMaxCutoff,
            "split_direct requires n_max <= " + std::to_string(kSplitDirectMaxCutoff));
    check_sector_range(c, n_total);
    const int lv = c.levels();
    const int dim4 = lv * lv * lv * lv;
    auto idx4 = [lv](int k1, int l1, int k2, int l2) { return ((k1 * lv + l1) * lv + k2) * lv + l2; };

    // mode: 0 = a1, 1 = b1, 2 = a2, 3 = b2
    auto raise = [&](const Vector& v, int mode) {
        Vector out = Vector::Zero(dim4);
        for (int k1 = 0; k1 < lv; ++k1)
            for (int l1 = 0; l1 < lv; ++l1)
                for (int k2 = 0; k2 < lv; ++k2)
                    for (int l2 = 0; l2 < lv; ++l2) {
                        const cplx amp = v(idx4(k1, l1, k2, l2));
                        if (amp == 0.0) continue;
                        int occ[4] = {k1, l1, k2, l2};
                        if (occ[mode] + 1 >= lv) continue;
                        const double f = std::sqrt(occ[mode] + 1.0);
                        ++occ[mode];
                        out(idx4(occ[0], occ[1], occ[2], occ[3])) += f * amp;
                    }
        return out;
    };
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    auto raise_a = [&](const Vector& v) { return Vector(inv_sqrt2 * (raise(v, 0) + raise(v, 2))); };
    auto raise_b = [&](const Vector& v) { return Vector(inv_sqrt2 * (raise(v, 1) + raise(v, 3))); };

    Matrix images = Matrix::Zero(dim4, c.dim());
    for (int i = 0; i < c.dim(); ++i) {
        const FockIndex f = c.unflatten(i);
        Vector v = Vector::Zero(dim4);
        v(0) = 1.0;
        for (int n = 0; n < f.k; ++n) v = raise_a(v);
        for (int n = 0; n < f.l; ++n) v = raise_b(v);
        double fact = 1.0;
        for (int n = 2; n <= f.k; ++n) fact *= n;
        for (int n = 2; n <= f.l; ++n) fact *= n;
        images.col(i) = v / std::sqrt(fact);
    }
    const Matrix full = images * state.rho * images.adjoint();

    SplitSectorState out;
    out.basis = SectorBasis(n_total);
    const int dim = out.basis.size();
    std::vector<int> pos(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const SplitFockIndex& s = out.basis[i];
        const bool inside = s.k1 < lv && s.l1 < lv && s.k2 < lv && s.l2 < lv;
        pos[static_cast<std::size_t>(i)] = inside ? idx4(s.k1, s.l1, s.k2, s.l2) : -1;
    }
    out.rho_sp = Matrix::Zero(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int q = 0; q < dim; ++q) {
            const int pr = pos[static_cast<std::size_t>(r)], pq = pos[static_cast<std::size_t>(q)];
            if (pr >= 0 && pq >= 0) out.rho_sp(r, q) = full(pr, pq);
        }
    const double p = out.rho_sp.trace().real();
    if (p < floor) fail(ErrorKind::empty_sector, "empty sector N = " + std::to_string(n_total));
    out.rho_sp /= p;
    out.prob = p;
    return out;
}

// ---------------------------------------------------------------------------
// Split spin observables

enum class Axis { x = 0, y = 1, z = 2 };

/// <S_j^alpha>, <S_i^alpha S_j^beta> and <N_j> in one number sector.
/// Half index 0 is subsystem 1, index 1 is subsystem 2.
struct SpinMoments {
    int n_total = 0;
    std::array<std::array<double, 3>, 2> mean{};
    std::array<std::array<std::array<std::array<cplx, 3>, 3>, 2>, 2> corr{};
    std::array<double, 2> number{};

    double first(int half, Axis a) const { return mean[static_cast<std::size_t>(half)][static_cast<std::size_t>(a)]; }
    cplx second(int hi, Axis a, int hj, Axis b) const {
        return corr[static_cast<std::size_t>(hi)][static_cast<std::size_t>(hj)][static_cast<std::size_t>(a)]
                   [static_cast<std::size_t>(b)];
    }

    /// Var(c1 S_1^a + c2 S_2^a). S_1 and S_2 commute.
    double variance(Axis a, double c1, double c2) const {
        const double second_moment = c1 * c1 * second(0, a, 0, a).real() + c2 * c2 * second(1, a, 1, a).real() +
                                     2.0 * c1 * c2 * second(0, a, 1, a).real();
        const double m = c1 * first(0, a) + c2 * first(1, a);
        return second_moment - m * m;
    }
};

namespace detail {

// Spin matrices on the n-particle two-mode space, basis |k, n-k>, k = 0..n.
struct SectorSpin {
    std::array<Matrix, 3> s;
};

inline SectorSpin sector_spin(int n) {
    const cplx i(0.0, 1.0);
    Matrix raise = Matrix::Zero(n + 1, n + 1); // a^dag b
    for (int k = 0; k < n; ++k) raise(k + 1, k) = std::sqrt(static_cast<double>((k + 1) * (n - k)));
    Matrix sz = Matrix::Zero(n + 1, n + 1);
    for (int k = 0; k <= n; ++k) sz(k, k) = 2.0 * k - n;
    return {{raise + raise.adjoint(), i * (raise.adjoint() - raise), sz}};
}

inline const Eigen::Matrix2cd& pauli(int m) {
    static const std::array<Eigen::Matrix2cd, 4> p = [] {
        std::array<Eigen::Matrix2cd, 4> out;
        const cplx i(0.0, 1.0);
        out[0] << 1.0, 0.0, 0.0, 1.0;
        out[1] << 0.0, 1.0, 1.0, 0.0;
        out[2] << 0.0, -i, i, 0.0;
        out[3] << 1.0, 0.0, 0.0, -1.0;
        return out;
    }();
    return p[static_cast<std::size_t>(m)];
}

} // namespace detail

/// Moments of the split spins evaluated in the unsplit two-mode sector.
///
/// With a_j = (a + s_j a~)/sqrt2, s_1 = +1, s_2 = -1, and the a~, b~ modes empty,
/// <S_j^a> = <S^a>/2 and <S_i^a S_j^b> = (<S^a S^b> + s_i s_j <B(sigma_a sigma_b)>)/4,
/// where B(M) = sum_pq M_pq c_p^dag c_q. The second term is the single contraction
/// of a~ with a~^dag between the two factors.
inline SpinMoments moments_reduced(const SectorState& sector) {
    const int n = sector.n_total;
    const auto spin = detail::sector_spin(n);
    const Matrix& rho = sector.rho_n;
    auto expect = [&](const Matrix& op) { return (rho * op).trace(); };

    // <B(M)> for M = t0 I + t.sigma; B(I) = N, B(sigma_m) = S^m.
    std::array<cplx, 4> bil{};
    bil[0] = static_cast<double>(n);
    for (int m = 0; m < 3; ++m) bil[static_cast<std::size_t>(m) + 1] = expect(spin.s[static_cast<std::size_t>(m)]);
    auto bilinear = [&](const Eigen::Matrix2cd& mat) {
        cplx total = 0.0;
        for (int m = 0; m < 4; ++m) total += 0.5 * (mat * detail::pauli(m)).trace() * bil[static_cast<std::size_t>(m)];
        return total;
    };

    SpinMoments out;
    out.n_total = n;
    out.number = {0.5 * n, 0.5 * n};
    for (int a = 0; a < 3; ++a) {
        const double m = 0.5 * bil[static_cast<std::size_t>(a) + 1].real();
        out.mean[0][static_cast<std::size_t>(a)] = m;
        out.mean[1][static_cast<std::size_t>(a)] = m;
    }
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            const cplx full = expect(spin.s[static_cast<std::size_t>(a)] * spin.s[static_cast<std::size_t>(b)]);
            const cplx contraction = bilinear(detail::pauli(a + 1) * detail::pauli(b + 1));
            for (int hi = 0; hi < 2; ++hi)
                for (int hj = 0; hj < 2; ++hj) {
                    const double sign = (hi == hj) ? 1.0 : -1.0;
                    out.corr[static_cast<std::size_t>(hi)][static_cast<std::size_t>(hj)][static_cast<std::size_t>(a)]
                            [static_cast<std::size_t>(b)] = 0.25 * (full + sign * contraction);
                }
        }
    return out;
}

/// Local spin operator S_half^axis (or N_half when number is set) on a sector basis.
inline SparseMatrix split_spin_operator(const SectorBasis& basis, int half, Axis axis, bool number = false) {
    const cplx i(0.0, 1.0);
    std::vector<Eigen::Triplet<cplx>> entries;
    for (int col = 0; col < basis.size(); ++col) {
        const SplitFockIndex& s = basis[col];
        const int k = half == 0 ? s.k1 : s.k2;
        const int l = half == 0 ? s.l1 : s.l2;
        if (number) {
            entries.emplace_back(col, col, static_cast<double>(k + l));
            continue;
        }
        if (axis == Axis::z) {
            entries.emplace_back(col, col, static_cast<double>(k - l));
            continue;
        }
        auto moved = [&](int dk) {
            SplitFockIndex t = s;
            if (half == 0) {
                t.k1 += dk;
                t.l1 -= dk;
            } else {
                t.k2 += dk;
                t.l2 -= dk;
            }
            return basis.index_of(t);
        };
        // a^dag b: (k, l) -> (k+1, l-1); b^dag a: (k, l) -> (k-1, l+1)
        if (l > 0) {
            const double amp = std::sqrt(static_cast<double>((k + 1) * l));
            entries.emplace_back(moved(+1), col, axis == Axis::x ? cplx(amp) : -i * amp);
        }
        if (k > 0) {
            const double amp = std::sqrt(static_cast<double>(k * (l + 1)));
            entries.emplace_back(moved(-1), col, axis == Axis::x ? cplx(amp) : i * amp);
        }
    }
    SparseMatrix m(basis.size(), basis.size());
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

/// Moments by direct traces against four-mode operators on the split state.
inline SpinMoments moments_direct(const SplitSectorState& st) {
    SpinMoments out;
    out.n_total = st.n_total();
    std::array<std::array<SparseMatrix, 3>, 2> ops;
    for (int h = 0; h < 2; ++h)
        for (int a = 0; a < 3; ++a)
            ops[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)] =
                split_spin_operator(st.basis, h, static_cast<Axis>(a));
    auto expect = [&](const SparseMatrix& op) { return (op * st.rho_sp).trace(); };
    for (int h = 0; h < 2; ++h) {
        out.number[static_cast<std::size_t>(h)] = expect(split_spin_operator(st.basis, h, Axis::z, true)).real();
        for (int a = 0; a < 3; ++a)
            out.mean[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)] =
                expect(ops[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)]).real();
    }
    for (int hi = 0; hi < 2; ++hi)
        for (int hj = 0; hj < 2; ++hj)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    const SparseMatrix prod = ops[static_cast<std::size_t>(hi)][static_cast<std::size_t>(a)] *
                                              ops[static_cast<std::size_t>(hj)][static_cast<std::size_t>(b)];
                    out.corr[static_cast<std::size_t>(hi)][static_cast<std::size_t>(hj)][static_cast<std::size_t>(a)]
                            [static_cast<std::size_t>(b)] = expect(prod);
                }
    return out;
}

/// A named split observable: a first moment, a number operator, or a product of two
/// split spin components.
struct SplitObservable {
    enum class Kind { spin, number, product };
    Kind kind = Kind::spin;
    int half = 0;
    Axis axis = Axis::x;
    int half2 = 0;
    Axis axis2 = Axis::x;

    std::string name() const {
        static const char* ax = "xyz";
        auto spin = [](int h, Axis a) {
            return std::string("S") + static_cast<char>('1' + h) + ax[static_cast<int>(a)];
        };
        switch (kind) {
        case Kind::spin: return spin(half, axis);
        case Kind::number: return std::string("N") + static_cast<char>('1' + half);
        case Kind::product:
            if (half == half2 && axis == axis2) return spin(half, axis) + "^2";
            return spin(half, axis) + "*" + spin(half2, axis2);
        }
        return {};
    }
};

/// Names accepted by parse_split_observable: S1x..S2z, N1, N2, all products
/// S1a*S2b and S2a*S1b, and the squares S1a^2, S2a^2.
inline std::vector<SplitObservable> named_split_observables() {
    std::vector<SplitObservable> out;
    using K = SplitObservable::Kind;
    for (int h = 0; h < 2; ++h)
        for (int a = 0; a < 3; ++a) out.push_back({K::spin, h, static_cast<Axis>(a), 0, Axis::x});
    out.push_back({K::number, 0, Axis::x, 0, Axis::x});
    out.push_back({K::number, 1, Axis::x, 0, Axis::x});
    for (int h = 0; h < 2; ++h)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) out.push_back({K::product, h, static_cast<Axis>(a), 1 - h, static_cast<Axis>(b)});
    for (int h = 0; h < 2; ++h)
        for (int a = 0; a < 3; ++a) out.push_back({K::product, h, static_cast<Axis>(a), h, static_cast<Axis>(a)});
    return out;
}

inline SplitObservable parse_split_observable(const std::string& name) {
    for (const auto& o : named_split_observables())
        if (o.name() == name) return o;
    fail(ErrorKind::validation, "unknown split observable '" + name + "'");
}

inline cplx observable_value(const SpinMoments& m, const SplitObservable& o) {
    switch (o.kind) {
    case SplitObservable::Kind::spin: return m.first(o.half, o.axis);
    case SplitObservable::Kind::number: return m.number[static_cast<std::size_t>(o.half)];
    case SplitObservable::Kind::product: return m.second(o.half, o.axis, o.half2, o.axis2);
    }
    return 0.0;
}

/// Sector-N expectation of a split observable, evaluated in the original two-mode space.
inline cplx split_observable_expectation(const TwoModeState& state, int n_total, const SplitObservable& obs) {
    return observable_value(moments_reduced(project_two_mode(state, n_total)), obs);
}

inline cplx split_observable_expectation(const TwoModeState& state, int n_total, const std::string& name) {
    return split_observable_expectation(state, n_total, parse_split_observable(name));
}

// ---------------------------------------------------------------------------
// Local-number blocks

/// Fixed (N1, N2) block of a split sector state. rho is normalized on the basis
/// (k1, k2) -> k1 * (N2 + 1) + k2 with l1 = N1 - k1, l2 = N2 - k2; cond_prob is
/// p_{N1,N2|N}. Blocks with zero weight carry a zero matrix.
struct NumberBlock {
    int n1 = 0;
    int n2 = 0;
    double cond_prob = 0.0;
    Matrix rho;
};

/// Sector state after a local number measurement on each half:
/// sum_{N1} Pi_{N1,N2} rho_sp Pi_{N1,N2}.
struct NumberResolvedSplit {
    int n_total = 0;
    double prob = 0.0; // p_N
    std::vector<NumberBlock> blocks;
};

inline NumberResolvedSplit number_blocks(const SplitSectorState& st) {
    NumberResolvedSplit out;
    out.n_total = st.n_total();
    out.prob = st.prob;
    for (int n1 = 0; n1 <= out.n_total; ++n1) {
        const int begin = st.basis.block_begin(n1), size = st.basis.block_size(n1);
        NumberBlock b;
        b.n1 = n1;
        b.n2 = out.n_total - n1;
        b.rho = st.rho_sp.block(begin, begin, size, size);
        b.cond_prob = b.rho.trace().real();
        if (b.cond_prob > 0.0) b.rho /= b.cond_prob;
        else b.rho.setZero();
        out.blocks.push_back(std::move(b));
    }
    return out;
}

/// Diagonal local-number blocks straight from the two-mode state, without forming the
/// full sector matrix.
inline NumberResolvedSplit split_number_blocks(const TwoModeState& state, int n_total,
                                               double floor = kEmptySectorFloor) {
    const ModeCutoff c = state.cutoff;
    check_sector_range(c, n_total);
    const double p = sector_weight(state, n_total);
    if (p < floor) fail(ErrorKind::empty_sector, "empty sector N = " + std::to_string(n_total));
    NumberResolvedSplit out;
    out.n_total = n_total;
    out.prob = p;
    for (int n1 = 0; n1 <= n_total; ++n1) {
        const int n2 = n_total - n1;
        const int size = (n1 + 1) * (n2 + 1);
        std::vector<int> parent(static_cast<std::size_t>(size));
        std::vector<double> weight(static_cast<std::size_t>(size));
        for (int k1 = 0; k1 <= n1; ++k1)
            for (int k2 = 0; k2 <= n2; ++k2) {
                const SplitFockIndex s{k1, n1 - k1, k2, n2 - k2};
                const FockIndex f{s.k1 + s.k2, s.l1 + s.l2};
                const auto i = static_cast<std::size_t>(k1 * (n2 + 1) + k2);
                parent[i] = c.contains(f) ? c.flatten(f) : -1;
                weight[i] = detail::split_weight(s);
            }
        NumberBlock b;
        b.n1 = n1;
        b.n2 = n2;
        b.rho = Matrix::Zero(size, size);
        for (int q = 0; q < size; ++q) {
            const int pq = parent[static_cast<std::size_t>(q)];
            if (pq < 0) continue;
            for (int r = 0; r < size; ++r) {
                const int pr = parent[static_cast<std::size_t>(r)];
                if (pr < 0) continue;
                b.rho(r, q) = state.rho(pr, pq) * (weight[static_cast<std::size_t>(r)] * weight[static_cast<std::size_t>(q)] / p);
            }
        }
        b.cond_prob = b.rho.trace().real();
        if (b.cond_prob > 0.0) b.rho /= b.cond_prob;
        else b.rho.setZero();
        out.blocks.push_back(std::move(b));
    }
    return out;
}

} // namespace splitbec
