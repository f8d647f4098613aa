#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <splitbec/entangle.hpp>
#include <splitbec/random_states.hpp>

using namespace splitbec;

namespace {

SplitSectorState pure_sector(int n, const std::vector<std::pair<SplitFockIndex, cplx>>& amps) {
    SplitSectorState s;
    s.basis = SectorBasis(n);
    s.prob = 1.0;
    Vector psi = Vector::Zero(s.basis.size());
    for (const auto& [idx, a] : amps) psi(s.basis.index_of(idx)) = a;
    psi.normalize();
    s.rho_sp = psi * psi.adjoint();
    return s;
}

TwoModeState spin_coherent(ModeCutoff c, int n) {
    Vector psi = Vector::Zero(c.dim());
    for (int k = 0; k <= n; ++k) psi(c.flatten({k, n - k})) = std::sqrt(binomial(n, k) / std::pow(2.0, n));
    return TwoModeState(c, psi * psi.adjoint());
}

SteadyState steady(double amp, double u, double delta = 0.0, int n_max = 10) {
    SimParams p;
    p.amp = amp;
    p.u = u;
    p.delta = delta;
    p.n_max = n_max;
    return evolve_to_steady(p);
}

} // namespace

TEST(PartialTranspose, ProductStates) {
    std::mt19937 rng(1);
    const Matrix r1 = random_density(3, rng), r2 = random_density(4, rng);
    Matrix prod(12, 12), expect(12, 12);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            prod.block(i * 4, j * 4, 4, 4) = r1(i, j) * r2;
            expect.block(i * 4, j * 4, 4, 4) = r1(i, j) * r2.transpose();
        }
    const Matrix pt = partial_transpose(prod, 3, 4);
    EXPECT_NEAR((pt - expect).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    const Eigen::VectorXd a = hermitian_eigenvalues(prod), b = hermitian_eigenvalues(pt);
    EXPECT_NEAR((a - b).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_THROW(partial_transpose(prod, 3, 3), Error);
}

TEST(PartialTranspose, InvolutionTraceAndHermiticity) {
    std::mt19937 rng(2);
    const TwoModeState s = random_two_mode_state(ModeCutoff(3), rng);
    for (int n = 1; n <= 5; ++n) {
        const SplitSectorState st = split_sector_density(s, n);
        const Matrix emb = embed_product_basis(st);
        const Matrix pt = partial_transpose(st);
        const int d = local_dim(n);
        EXPECT_EQ((partial_transpose(pt, d, d) - emb).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_NEAR(std::abs(pt.trace() - 1.0), 0.0, 1e-13);
        EXPECT_LT(hermiticity_error(pt), 1e-14);
    }
    SplitSectorState big;
    big.basis = SectorBasis(kDensePartialTransposeMaxN + 1);
    big.rho_sp = Matrix::Identity(big.basis.size(), big.basis.size());
    EXPECT_THROW(partial_transpose(big), Error);
}

TEST(PartialTranspose, OneSplitParticle) {
    // (|1,0,0,0> + |0,0,1,0>)/sqrt2
    const SplitSectorState bell = split_sector_density(TwoModeState::fock(ModeCutoff(2), {1, 0}), 1);
    Eigen::VectorXd ev = hermitian_eigenvalues(partial_transpose(bell));
    std::vector<double> nonzero;
    for (double x : ev)
        if (std::abs(x) > 1e-12) nonzero.push_back(x);
    std::sort(nonzero.begin(), nonzero.end());
    ASSERT_EQ(nonzero.size(), 4u);
    EXPECT_NEAR(nonzero[0], -0.5, 1e-14);
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(nonzero[static_cast<std::size_t>(i)], 0.5, 1e-14);
    EXPECT_NEAR(logarithmic_negativity(bell, NegativityMode::coherent), 1.0, 1e-12);
    // after reading out the local numbers the particle is on one side or the other
    EXPECT_NEAR(logarithmic_negativity(bell), 0.0, 1e-15);
}

TEST(PartialTranspose, BlockTraceNormMatchesDenseEigenvalues) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        const TwoModeState s = random_two_mode_state(ModeCutoff(3), rng, 1 + trial);
        for (int n = 1; n <= 6; ++n) {
            const SplitSectorState st = split_sector_density(s, n);
            const double dense = hermitian_eigenvalues(partial_transpose(st)).cwiseAbs().sum();
            EXPECT_NEAR(coherent_pt_trace_norm(st), dense, 1e-11);
            // the resolved state keeps only the diagonal local-number blocks
            SplitSectorState resolved = st;
            resolved.rho_sp.setZero();
            for (int n1 = 0; n1 <= n; ++n1) {
                const int b = st.basis.block_begin(n1), sz = st.basis.block_size(n1);
                resolved.rho_sp.block(b, b, sz, sz) = st.rho_sp.block(b, b, sz, sz);
            }
            const double dense_resolved = hermitian_eigenvalues(partial_transpose(resolved)).cwiseAbs().sum();
            EXPECT_NEAR(resolved_pt_trace_norm(number_blocks(st)), dense_resolved, 1e-11);
            EXPECT_LE(dense_resolved, dense + 1e-11);
        }
    }
}

TEST(LogarithmicNegativity, SpinCoherentSectorsAreUnentangled) {
    const ModeCutoff c(10);
    for (int n = 1; n <= 10; ++n) {
        const TwoModeState s = spin_coherent(c, n);
        EXPECT_NEAR(logarithmic_negativity(s, n), 0.0, 1e-10) << n;
        EXPECT_GE(logarithmic_negativity(s, n), 0.0);
    }
}

TEST(LogarithmicNegativity, BoundedByHalfFilling) {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 6; ++trial) {
        const TwoModeState s = random_two_mode_state(ModeCutoff(4), rng, 1);
        for (int n = 2; n <= 8; n += 2) EXPECT_LE(logarithmic_negativity(s, n), max_log_negativity(n) + 1e-9);
    }
    // maximally entangled N1 = N2 = 1 state reaches the bound
    const double r = 1.0;
    const SplitSectorState m = pure_sector(2, {{{1, 0, 0, 1}, r}, {{0, 1, 1, 0}, r}});
    EXPECT_NEAR(logarithmic_negativity(m), max_log_negativity(2), 1e-12);
}

TEST(LogarithmicNegativity, ModesAgreeWhenLocalNumbersAreFixed) {
    const SplitSectorState m = pure_sector(4, {{{2, 0, 0, 2}, 1.0}, {{1, 1, 1, 1}, 0.5}, {{0, 2, 2, 0}, cplx(0, 0.3)}});
    EXPECT_NEAR(logarithmic_negativity(m), logarithmic_negativity(m, NegativityMode::coherent), 1e-12);
    EXPECT_GT(logarithmic_negativity(m), 0.5);
}

TEST(LogarithmicNegativity, ModeParsing) {
    EXPECT_EQ(parse_negativity_mode("coherent"), NegativityMode::coherent);
    EXPECT_EQ(parse_negativity_mode("local-number-resolved"), NegativityMode::local_number_resolved);
    EXPECT_THROW(parse_negativity_mode("full"), Error);
}

TEST(Criteria, ProductStateOfTwoUpParticles) {
    const SplitSectorState s = pure_sector(2, {{{1, 0, 1, 0}, 1.0}});
    const SpinMoments m = moments_direct(s);
    const CriterionValue h = ht(m);
    EXPECT_NEAR(h.value, 1.0, 1e-14);
    EXPECT_GE(h.value, 1.0 - 1e-14);
    EXPECT_NEAR(h.denominator, 4.0, 1e-14);
    const CriterionValue g = gmvt(m);
    EXPECT_TRUE(g.degenerate);
    EXPECT_TRUE(std::isinf(g.value));
    EXPECT_FALSE(g.detects());
    EXPECT_TRUE(dgcz(m).degenerate);
}

TEST(Criteria, PreconditionErrors) {
    const TwoModeState s = spin_coherent(ModeCutoff(4), 3);
    EXPECT_THROW(gmvt(s, 3, 0.0, 1.0), Error);
    EXPECT_THROW(gmvt(s, 3, 1.0, 0.0), Error);
    EXPECT_THROW(ht(TwoModeState::vacuum(ModeCutoff(2)), 0), Error);
    EXPECT_THROW(evaluate_sector(s, 0), Error);
    EXPECT_THROW(dgcz(s, 2), Error); // empty sector
}

TEST(Criteria, SpinCoherentSectorsSitOnTheBoundary) {
    const ModeCutoff c(10);
    for (int n = 1; n <= 10; ++n) {
        const TwoModeState s = spin_coherent(c, n);
        EXPECT_NEAR(gmvt(s, n), 1.0, 1e-12);
        EXPECT_NEAR(dgcz(s, n), 1.0, 1e-12);
        EXPECT_NEAR(ht(s, n), 1.0, 1e-12);
        // Var(S1y - S2y) = Var(S1z + S2z) = N
        const CriterionReport r = evaluate_sector(s, n);
        EXPECT_NEAR(r.components.var_y_diff, n, 1e-12);
        EXPECT_NEAR(r.components.var_z_sum, n, 1e-12);
        EXPECT_NEAR(r.components.var_x_sum, 0.0, 1e-12);
    }
}

TEST(Criteria, SoundOnSeparableStates) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 8;
        const SplitSectorState s = random_separable_sector(n, rng, 1 + trial % 4);
        const SpinMoments m = moments_direct(s);
        for (const CriterionValue& v : {gmvt(m), dgcz(m), ht(m)})
            if (!v.degenerate) EXPECT_GE(v.value, 1.0 - 1e-9) << trial;
        EXPECT_LE(logarithmic_negativity(s), 1e-9);
        if (n <= 5)
            EXPECT_GE(hermitian_eigenvalues(partial_transpose(s)).minCoeff(), -1e-12);
    }
}

TEST(Criteria, GeometricMeanNeverExceedsArithmeticMean) {
    std::mt19937 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const TwoModeState s = random_two_mode_state(ModeCutoff(3), rng);
        for (int n = 1; n <= 6; ++n) {
            const SpinMoments m = moments_reduced(project_two_mode(s, n));
            const CriterionValue g = gmvt(m), d = dgcz(m);
            if (!g.degenerate) EXPECT_LE(g.value, d.value + 1e-12);
        }
    }
}

TEST(Criteria, GainGridAndOptimization) {
    const auto grid = gain_grid();
    ASSERT_EQ(grid.size(), 25u);
    EXPECT_DOUBLE_EQ(grid.front(), 0.2);
    EXPECT_DOUBLE_EQ(grid.back(), 5.0);
    EXPECT_EQ(grid[12], 1.0);
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GT(grid[i], grid[i - 1]);

    std::mt19937 rng(7);
    const TwoModeState s = random_two_mode_state(ModeCutoff(3), rng);
    const SpinMoments m = moments_reduced(project_two_mode(s, 3));
    const GainChoice best = optimize_gains(m);
    EXPECT_LE(best.value.value, gmvt(m).value);
    for (double gy : grid)
        for (double gz : grid) EXPECT_LE(best.value.value, gmvt(m, gy, gz).value);
}

TEST(Criteria, NonInteractingSteadyStateSectors) {
    const SteadyState ss = steady(0.5, 0.0);
    ASSERT_TRUE(ss.converged);
    const SectorDistribution d = sector_distribution(ss.state);
    for (int n = 1; n <= 20; ++n) {
        if (d.prob(n) <= 1e-2) continue;
        EXPECT_NEAR(gmvt(ss.state, n), 1.0, 1e-3) << n;
        EXPECT_NEAR(dgcz(ss.state, n), 1.0, 1e-3) << n;
        EXPECT_NEAR(ht(ss.state, n), 1.0, 1e-3) << n;
        EXPECT_LT(logarithmic_negativity(ss.state, n), 1e-4) << n;
    }
}

TEST(Criteria, NonInteractingNegativityIsATruncationArtifact) {
    const SteadyState coarse = steady(0.5, 0.0, 0.0, 8), fine = steady(0.5, 0.0, 0.0, 12);
    for (int n = 3; n <= 6; ++n) {
        const double ec = logarithmic_negativity(coarse.state, n), ef = logarithmic_negativity(fine.state, n);
        EXPECT_LT(ef, 1e-2 * ec) << n;
    }
}

TEST(Criteria, SqueezedSteadyStateIsDetected) {
    const SteadyState ss = steady(1.5, 0.3);
    ASSERT_TRUE(ss.converged);
    const int n = max_prob_sector(sector_distribution(ss.state));
    const CriterionReport r = evaluate_sector(ss.state, n);
    EXPECT_LT(r.gmvt.value, 1.0);
    EXPECT_TRUE(r.gmvt.detects());
    EXPECT_GT(r.log_neg, 0.0);
    EXPECT_LE(r.gmvt.value, r.dgcz.value);
    EXPECT_NEAR(r.e_max, std::log2(n / 2.0 + 1.0), 1e-15);
    EXPECT_NEAR(r.components.mean_s1x, r.components.mean_s2x, 1e-12);
    EXPECT_NEAR(r.components.mean_n1 + r.components.mean_n2, n, 1e-12);
    const CriterionReport opt = evaluate_sector(ss.state, n, {1.0, 1.0, true});
    EXPECT_LE(opt.gmvt.value, r.gmvt.value);
}
