#pragma once

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "conditional.hpp"
#include "entangle.hpp"
#include "fock.hpp"
#include "liouville.hpp"
#include "random_states.hpp"
#include "sector.hpp"
#include "split.hpp"

namespace splitbec {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double bound = 0.0;
};

/// Fast invariant suite for the `check` command. Every check compares a measured
/// deviation `value` against `bound`; seeds are fixed so runs are repeatable.
inline std::vector<CheckResult> run_invariant_checks() {
    std::vector<CheckResult> out;
    auto record = [&](std::string name, double value, double bound) {
        out.push_back({std::move(name), value <= bound, value, bound});
    };
    std::mt19937 rng(20240611);

    {
        const ModeCutoff c(4);
        const Operator a = annihilation(Mode::a, c), b = annihilation(Mode::b, c);
        const Matrix comm = commutator(a, a.adjoint()).dense();
        double dev = 0.0;
        for (int i = 0; i < c.dim(); ++i)
            if (c.unflatten(i).k < c.n_max()) dev = std::max(dev, std::abs(comm(i, i) - 1.0));
        record("fock: [a, a^dag] = 1 below the cutoff", dev, 1e-14);
        record("fock: [a, b] = 0", commutator(a, b).dense().cwiseAbs().maxCoeff(), 0.0);
        const Matrix lhs = commutator(spin_x(c), spin_y(c)).dense();
        const Matrix rhs = (cplx(0, 2) * spin_z(c)).dense();
        double alg = 0.0;
        for (int i = 0; i < c.dim(); ++i)
            for (int j = 0; j < c.dim(); ++j) {
                const FockIndex fi = c.unflatten(i), fj = c.unflatten(j);
                if (fi.k + fi.l < c.n_max() && fj.k + fj.l < c.n_max()) alg = std::max(alg, std::abs(lhs(i, j) - rhs(i, j)));
            }
        record("fock: [Sx, Sy] = 2i Sz below the cutoff", alg, 1e-12);
    }
    {
        SimParams p;
        p.amp = 0.6;
        p.u = 0.4;
        p.delta = 0.1;
        p.n_max = 3;
        const TwoModeState r = random_two_mode_state(p.cutoff(), rng);
        record("liouville: trace of d rho/dt", std::abs(master_rhs(r, p).trace()), 1e-12);
        const SteadyState ev = evolve_to_steady(p);
        const TwoModeState direct = steady_state_direct(p);
        record("liouville: evolved vs null-space steady state (trace distance)",
               trace_distance(ev.state.rho, direct.rho), 1e-6);
    }
    {
        const ModeCutoff c(3);
        double split_dev = 0.0, obs_dev = 0.0, swap_dev = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            const TwoModeState s = random_two_mode_state(c, rng);
            for (int n = 1; n <= 2 * c.n_max(); ++n) {
                const SplitSectorState x = split_sector_density(s, n), y = split_direct(s, n);
                split_dev = std::max(split_dev, (x.rho_sp - y.rho_sp).cwiseAbs().maxCoeff());
                const SpinMoments mr = moments_reduced(project_two_mode(s, n)), md = moments_direct(y);
                for (const auto& o : named_split_observables())
                    obs_dev = std::max(obs_dev, std::abs(observable_value(mr, o) - observable_value(md, o)));
                for (int i = 0; i < x.dim(); ++i)
                    for (int j = 0; j < x.dim(); ++j) {
                        const auto& si = x.basis[i];
                        const auto& sj = x.basis[j];
                        const int ii = x.basis.index_of({si.k2, si.l2, si.k1, si.l1});
                        const int jj = x.basis.index_of({sj.k2, sj.l2, sj.k1, sj.l1});
                        swap_dev = std::max(swap_dev, std::abs(x.rho_sp(i, j) - x.rho_sp(ii, jj)));
                    }
            }
        }
        record("split: original-space vs direct split density", split_dev, 1e-12);
        record("split: reduced vs direct observables", obs_dev, 1e-10);
        record("split: exchange symmetry of the halves", swap_dev, 1e-14);
    }
    {
        double dev = 0.0;
        for (int n1 = 0; n1 <= kEffectiveHamiltonianMaxN; ++n1)
            for (int n2 = 0; n1 + n2 <= kEffectiveHamiltonianMaxN; ++n2)
                if (n1 + n2 >= 1)
                    dev = std::max({dev, effective_hamiltonian_check(n1, n2), effective_hamiltonian_check_first_order(n1, n2)});
        record("sector: split (S^z)^2 identity on every (N1, N2) block", dev, 1e-12);

        SimParams p;
        p.amp = 1.0;
        p.u = 0.3;
        p.n_max = 5;
        const SteadyState ss = evolve_to_steady(p);
        const SectorDistribution dist = sector_distribution(ss.state);
        double eq = 0.0, ineq = -INFINITY;
        for (const auto& [n, prob] : dist.probs) {
            if (n == 0 || prob < kEmptySectorFloor) continue;
            const AveragingCheck a = averaging_check(ss.state, n);
            eq = std::max({eq, a.expectation_error, a.cond_prob_error});
            ineq = std::max(ineq, a.variance_excess);
        }
        record("sector: probabilities sum to 1", std::abs(dist.truncation_loss), 1e-10);
        record("sector: block-averaged expectations equal sector expectations", eq, 1e-10);
        record("sector: block-averaged variances do not exceed sector variances", ineq, 1e-10);
    }
    {
        const ModeCutoff c(3);
        const SplitSectorState s = split_sector_density(random_two_mode_state(c, rng), 3);
        const Matrix pt = partial_transpose(s);
        const int d = local_dim(3);
        record("entangle: partial transpose is an involution",
               (partial_transpose(pt, d, d) - embed_product_basis(s)).cwiseAbs().maxCoeff(), 0.0);
        const SplitSectorState bell = split_sector_density(TwoModeState::fock(c, {1, 0}), 1);
        record("entangle: coherent negativity of one split particle",
               std::abs(logarithmic_negativity(bell, NegativityMode::coherent) - 1.0), 1e-12);
        double worst_crit = 0.0, worst_e = 0.0;
        for (int trial = 0; trial < 40; ++trial) {
            const SplitSectorState sep = random_separable_sector(1 + trial % 6, rng);
            const SpinMoments m = moments_direct(sep);
            for (const CriterionValue& v : {gmvt(m), dgcz(m), ht(m)})
                if (!v.degenerate) worst_crit = std::max(worst_crit, 1.0 - v.value);
            worst_e = std::max(worst_e, logarithmic_negativity(sep));
        }
        record("entangle: criteria >= 1 on separable states (max shortfall)", worst_crit, 1e-9);
        record("entangle: E = 0 on separable states", worst_e, 1e-9);
    }
    return out;
}

} // namespace splitbec
