#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "common.hpp"
#include "sector.hpp"
#include "split.hpp"

namespace splitbec {

/// p_{N1,N2|N} for every local split N1 + N2 = N.
struct ConditionalSplit {
    int n_total = 0;
    std::map<int, double> cond_probs; // N1 -> p_{N1,N2|N}

    double total() const {
        double s = 0.0;
        for (const auto& [n1, p] : cond_probs) s += p;
        return s;
    }
};

inline ConditionalSplit conditional_split_probs(const SplitSectorState& st) {
    ConditionalSplit out;
    out.n_total = st.n_total();
    for (int n1 = 0; n1 <= out.n_total; ++n1) {
        const int begin = st.basis.block_begin(n1), size = st.basis.block_size(n1);
        out.cond_probs[n1] = st.rho_sp.diagonal().segment(begin, size).real().sum();
    }
    return out;
}

inline ConditionalSplit conditional_split_probs(const NumberResolvedSplit& r) {
    ConditionalSplit out;
    out.n_total = r.n_total;
    for (const auto& b : r.blocks) out.cond_probs[b.n1] = b.cond_prob;
    return out;
}

/// Split spin operators of one (N1, N2) block, on the block basis k1 * (N2 + 1) + k2.
struct BlockOperators {
    std::array<std::array<Matrix, 3>, 2> spin;
};

inline BlockOperators block_operators(int n1, int n2) {
    const SectorBasis basis(n1 + n2);
    const int begin = basis.block_begin(n1), size = basis.block_size(n1);
    BlockOperators out;
    for (int h = 0; h < 2; ++h)
        for (int a = 0; a < 3; ++a) {
            const Matrix full = Matrix(split_spin_operator(basis, h, static_cast<Axis>(a)));
            out.spin[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)] = full.block(begin, begin, size, size);
        }
    return out;
}

/// Moments inside a fixed (N1, N2) block. A block with zero weight yields zero moments.
inline SpinMoments block_moments(const NumberBlock& b, const BlockOperators& ops) {
    SpinMoments out;
    out.n_total = b.n1 + b.n2;
    out.number = {static_cast<double>(b.n1), static_cast<double>(b.n2)};
    if (b.cond_prob <= 0.0) return out;
    auto expect = [&](const Matrix& op) { return (b.rho * op).trace(); };
    for (int h = 0; h < 2; ++h)
        for (int a = 0; a < 3; ++a)
            out.mean[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)] =
                expect(ops.spin[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)]).real();
    for (int hi = 0; hi < 2; ++hi)
        for (int hj = 0; hj < 2; ++hj)
            for (int a = 0; a < 3; ++a)
                for (int c = 0; c < 3; ++c)
                    out.corr[static_cast<std::size_t>(hi)][static_cast<std::size_t>(hj)][static_cast<std::size_t>(a)]
                            [static_cast<std::size_t>(c)] =
                        expect(ops.spin[static_cast<std::size_t>(hi)][static_cast<std::size_t>(a)] *
                               ops.spin[static_cast<std::size_t>(hj)][static_cast<std::size_t>(c)]);
    return out;
}

inline SpinMoments block_moments(const NumberBlock& b) { return block_moments(b, block_operators(b.n1, b.n2)); }

/// Locally number-conserving observables used by the averaging relations.
enum class LocalObservable { s1x, s2x, n1, n2 };

/// Combinations c1 S_1^a + c2 S_2^a whose variances enter the criteria.
struct SpinCombination {
    Axis axis;
    double c1;
    double c2;
};

inline constexpr std::array<SpinCombination, 3> kCriterionCombinations{{
    {Axis::x, 1.0, 1.0},
    {Axis::y, 1.0, -1.0},
    {Axis::z, 1.0, 1.0},
}};

inline double local_value(const SpinMoments& m, LocalObservable o) {
    switch (o) {
    case LocalObservable::s1x: return m.first(0, Axis::x);
    case LocalObservable::s2x: return m.first(1, Axis::x);
    case LocalObservable::n1: return m.number[0];
    case LocalObservable::n2: return m.number[1];
    }
    return 0.0;
}

/// Residuals of the two averaging relations over local number blocks of one sector.
struct AveragingCheck {
    int n_total = 0;
    double cond_prob_error = 0.0;        // |sum_{N1} p_{N1,N2|N} - 1|
    double expectation_error = 0.0;      // max |sum p <O>_{N1,N2} - <O>_N|
    double variance_excess = 0.0;        // max (sum p Var_{N1,N2} - Var_N), <= 0 when the inequality holds
    std::array<double, 3> mean_variance{}; // sum p Var_{N1,N2}(O) per combination
    std::array<double, 3> sector_variance{};
};

inline AveragingCheck averaging_check(const TwoModeState& state, int n_total) {
    const SpinMoments sector = moments_reduced(project_two_mode(state, n_total));
    const NumberResolvedSplit blocks = split_number_blocks(state, n_total);
    AveragingCheck out;
    out.n_total = n_total;
    std::array<double, 4> averaged{};
    double total = 0.0;
    for (const auto& b : blocks.blocks) {
        total += b.cond_prob;
        if (b.cond_prob <= 0.0) continue;
        const SpinMoments m = block_moments(b);
        for (int o = 0; o < 4; ++o)
            averaged[static_cast<std::size_t>(o)] += b.cond_prob * local_value(m, static_cast<LocalObservable>(o));
        for (std::size_t c = 0; c < kCriterionCombinations.size(); ++c) {
            const auto& comb = kCriterionCombinations[c];
            out.mean_variance[c] += b.cond_prob * m.variance(comb.axis, comb.c1, comb.c2);
        }
    }
    out.cond_prob_error = std::abs(total - 1.0);
    for (int o = 0; o < 4; ++o)
        out.expectation_error =
            std::max(out.expectation_error, std::abs(averaged[static_cast<std::size_t>(o)] -
                                                     local_value(sector, static_cast<LocalObservable>(o))));
    out.variance_excess = -INFINITY;
    for (std::size_t c = 0; c < kCriterionCombinations.size(); ++c) {
        const auto& comb = kCriterionCombinations[c];
        out.sector_variance[c] = sector.variance(comb.axis, comb.c1, comb.c2);
        out.variance_excess = std::max(out.variance_excess, out.mean_variance[c] - out.sector_variance[c]);
    }
    return out;
}

namespace detail {

// Four-mode truncated space with per-mode cutoff m; modes 0..3 are a1, b1, a2, b2.
struct FourModeSpace {
    int m;
    int levels() const { return m + 1; }
    int dim() const { return levels() * levels() * levels() * levels(); }
    int index(const std::array<int, 4>& occ) const {
        return ((occ[0] * levels() + occ[1]) * levels() + occ[2]) * levels() + occ[3];
    }
    std::array<int, 4> occupations(int i) const {
        std::array<int, 4> occ{};
        for (int j = 3; j >= 0; --j) {
            occ[static_cast<std::size_t>(j)] = i % levels();
            i /= levels();
        }
        return occ;
    }
    SparseMatrix lower(int mode) const {
        std::vector<Eigen::Triplet<cplx>> entries;
        for (int i = 0; i < dim(); ++i) {
            auto occ = occupations(i);
            const int n = occ[static_cast<std::size_t>(mode)];
            if (n == 0) continue;
            --occ[static_cast<std::size_t>(mode)];
            entries.emplace_back(index(occ), i, std::sqrt(static_cast<double>(n)));
        }
        SparseMatrix out(dim(), dim());
        out.setFromTriplets(entries.begin(), entries.end());
        return out;
    }
    std::vector<int> block_indices(int n1, int n2) const {
        std::vector<int> out;
        for (int i = 0; i < dim(); ++i) {
            const auto occ = occupations(i);
            if (occ[0] + occ[1] == n1 && occ[2] + occ[3] == n2) out.push_back(i);
        }
        return out;
    }
};

inline double projected_deviation(const SparseMatrix& x, const SparseMatrix& y, const std::vector<int>& idx) {
    double dev = 0.0;
    for (int r : idx)
        for (int c : idx) dev = std::max(dev, std::abs(x.coeff(r, c) - y.coeff(r, c)));
    return dev;
}

struct SplitSzPair {
    SparseMatrix split_sz; // image of a^dag a - b^dag b under the full mode map
    SparseMatrix s1z;
    SparseMatrix s2z;
    std::vector<int> block;
};

inline SplitSzPair split_sz_pair(int n1, int n2) {
    require(n1 >= 0 && n2 >= 0 && n1 + n2 >= 1, "block must hold at least one particle");
    const FourModeSpace space{n1 + n2};
    const double r = 1.0 / std::sqrt(2.0);
    const SparseMatrix a1 = space.lower(0), b1 = space.lower(1), a2 = space.lower(2), b2 = space.lower(3);
    const SparseMatrix a = r * (a1 + a2), at = r * (a1 - a2);
    const SparseMatrix b = r * (b1 + b2), bt = r * (b1 - b2);
    auto num = [](const SparseMatrix& c) { return SparseMatrix(SparseMatrix(c.adjoint()) * c); };
    SplitSzPair out;
    out.split_sz = num(a) + num(at) - num(b) - num(bt);
    out.s1z = num(a1) - num(b1);
    out.s2z = num(a2) - num(b2);
    out.block = space.block_indices(n1, n2);
    return out;
}

} // namespace detail

inline constexpr int kEffectiveHamiltonianMaxN = 6;

/// Max entrywise deviation between Pi (S^z)^2 Pi, with S^z carried through the
/// split mode map, and Pi ((S1^z)^2 + 2 S1^z S2^z + (S2^z)^2) Pi on the (N1, N2) block.
inline double effective_hamiltonian_check(int n1, int n2) {
    require(n1 + n2 <= kEffectiveHamiltonianMaxN,
            "effective_hamiltonian_check requires N1 + N2 <= " + std::to_string(kEffectiveHamiltonianMaxN));
    const auto p = detail::split_sz_pair(n1, n2);
    const SparseMatrix lhs = p.split_sz * p.split_sz;
    const SparseMatrix cross = p.s1z * p.s2z;
    const SparseMatrix rhs = SparseMatrix(p.s1z * p.s1z) + 2.0 * cross + SparseMatrix(p.s2z * p.s2z);
    return detail::projected_deviation(lhs, rhs, p.block);
}

/// First-order counterpart: Pi S^z Pi against Pi (S1^z + S2^z) Pi.
inline double effective_hamiltonian_check_first_order(int n1, int n2) {
    require(n1 + n2 <= kEffectiveHamiltonianMaxN,
            "effective_hamiltonian_check requires N1 + N2 <= " + std::to_string(kEffectiveHamiltonianMaxN));
    const auto p = detail::split_sz_pair(n1, n2);
    return detail::projected_deviation(p.split_sz, SparseMatrix(p.s1z + p.s2z), p.block);
}

} // namespace splitbec
