#pragma once

#include <random>

#include "common.hpp"
#include "fock.hpp"
#include "liouville.hpp"
#include "split.hpp"

namespace splitbec {

/// Random density matrix of dimension d: G G^dag / tr, G with Gaussian entries.
/// `rank` limits the number of columns of G (0 means full rank).
template <class Rng>
Matrix random_density(int d, Rng& rng, int rank = 0) {
    std::normal_distribution<double> nd;
    const int r = rank > 0 ? rank : d;
    Matrix g(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) g(i, j) = cplx(nd(rng), nd(rng));
    Matrix rho = g * g.adjoint();
    return rho / rho.trace().real();
}

template <class Rng>
TwoModeState random_two_mode_state(ModeCutoff c, Rng& rng, int rank = 0) {
    return TwoModeState(c, random_density(c.dim(), rng, rank));
}

/// Random separable sector state: a mixture of `terms` products rho_1 (x) rho_2, each with
/// fixed local numbers N1 + N2 = N. Half-local states live on the basis |k, Ni - k>.
template <class Rng>
SplitSectorState random_separable_sector(int n_total, Rng& rng, int terms = 3) {
    require(n_total >= 0 && terms >= 1, "invalid separable state request");
    SplitSectorState st;
    st.basis = SectorBasis(n_total);
    st.prob = 1.0;
    st.rho_sp = Matrix::Zero(st.basis.size(), st.basis.size());
    std::uniform_int_distribution<int> pick_n1(0, n_total);
    std::uniform_real_distribution<double> weight(0.1, 1.0);
    std::uniform_int_distribution<int> pick_rank(1, 2);
    double total = 0.0;
    for (int t = 0; t < terms; ++t) {
        const int n1 = pick_n1(rng), n2 = n_total - n1;
        const Matrix r1 = random_density(n1 + 1, rng, pick_rank(rng));
        const Matrix r2 = random_density(n2 + 1, rng, pick_rank(rng));
        const double w = weight(rng);
        total += w;
        const int begin = st.basis.block_begin(n1);
        for (int k1 = 0; k1 <= n1; ++k1)
            for (int k2 = 0; k2 <= n2; ++k2)
                for (int q1 = 0; q1 <= n1; ++q1)
                    for (int q2 = 0; q2 <= n2; ++q2)
                        st.rho_sp(begin + k1 * (n2 + 1) + k2, begin + q1 * (n2 + 1) + q2) += w * r1(k1, q1) * r2(k2, q2);
    }
    st.rho_sp /= total;
    return st;
}

} // namespace splitbec
