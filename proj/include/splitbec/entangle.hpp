#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "liouville.hpp"
#include "sector.hpp"
#include "split.hpp"

namespace splitbec {

// ---------------------------------------------------------------------------
// Partial transpose

/// Local basis of one half holding at most n_total particles: (k, l) with k + l <= N,
/// ordered by n = k + l and then k. Index n (n + 1) / 2 + k.
inline int local_dim(int n_total) { return (n_total + 1) * (n_total + 2) / 2; }
inline int local_index(int k, int l) {
    const int n = k + l;
    return n * (n + 1) / 2 + k;
}

inline constexpr int kDensePartialTransposeMaxN = 8;

/// Sector state embedded in the product basis (half 1) x (half 2), index i1 * d + i2.
inline Matrix embed_product_basis(const SplitSectorState& st) {
    const int n = st.n_total();
    require(n <= kDensePartialTransposeMaxN,
            "dense partial transpose requires N <= " + std::to_string(kDensePartialTransposeMaxN));
    const int d = local_dim(n);
    std::vector<int> pos(static_cast<std::size_t>(st.dim()));
    for (int i = 0; i < st.dim(); ++i) {
        const SplitFockIndex& s = st.basis[i];
        pos[static_cast<std::size_t>(i)] = local_index(s.k1, s.l1) * d + local_index(s.k2, s.l2);
    }
    Matrix out = Matrix::Zero(d * d, d * d);
    for (int c = 0; c < st.dim(); ++c)
        for (int r = 0; r < st.dim(); ++r)
            out(pos[static_cast<std::size_t>(r)], pos[static_cast<std::size_t>(c)]) = st.rho_sp(r, c);
    return out;
}

/// Transpose of the second factor of a (d1 d2) x (d1 d2) matrix.
inline Matrix partial_transpose(const Matrix& m, int d1, int d2) {
    require(m.rows() == d1 * d2 && m.cols() == d1 * d2, "partial transpose dimension mismatch");
    Matrix out(m.rows(), m.cols());
    for (int i1 = 0; i1 < d1; ++i1)
        for (int j1 = 0; j1 < d1; ++j1)
            out.block(i1 * d2, j1 * d2, d2, d2) = m.block(i1 * d2, j1 * d2, d2, d2).transpose();
    return out;
}

/// Partial transpose of half 2 on the embedded product basis.
inline Matrix partial_transpose(const SplitSectorState& st) {
    const int d = local_dim(st.n_total());
    return partial_transpose(embed_product_basis(st), d, d);
}

/// Sum of |eigenvalues| of a matrix that should be Hermitian.
inline double hermitian_trace_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (hermiticity_error(m) > 1e-9)
        fail(ErrorKind::numerical, "partial transpose lost Hermiticity (" + std::to_string(hermiticity_error(m)) + ")");
    return hermitian_eigenvalues(hermitian_part(m)).cwiseAbs().sum();
}

/// Trace norm of the partial transpose of one normalized (N1, N2) block.
inline double block_pt_trace_norm(const NumberBlock& b) {
    if (b.cond_prob <= 0.0) return 0.0;
    return hermitian_trace_norm(partial_transpose(b.rho, b.n1 + 1, b.n2 + 1));
}

/// Which state the negativity is evaluated on.
///  - local_number_resolved: sum_{N1} Pi_{N1,N2} rho Pi_{N1,N2}, the state after each half's
///    particle number has been read out. Coherences between different local numbers are dropped.
///  - coherent: the full sector state, including those coherences.
enum class NegativityMode { local_number_resolved, coherent };

inline const char* to_string(NegativityMode m) {
    return m == NegativityMode::coherent ? "coherent" : "local-number-resolved";
}

inline NegativityMode parse_negativity_mode(const std::string& s) {
    if (s == "local-number-resolved" || s == "resolved") return NegativityMode::local_number_resolved;
    if (s == "coherent") return NegativityMode::coherent;
    fail(ErrorKind::validation, "unknown negativity mode '" + s + "'");
}

inline double clamp_log_negativity(double trace_norm) {
    double e = std::log2(trace_norm);
    if (e < 0.0 && e > -1e-10) e = 0.0;
    return e;
}

/// Trace norm of the full partial transpose, using its block structure.
///
/// Row block (p, q) (local numbers of the half-1 row index and the half-2 column index)
/// only couples to column block (N - q, N - p). Blocks with p + q = N are Hermitian;
/// any other pair forms [[0, X], [X^dag, 0]] whose eigenvalues are +-singular values of X.
inline double coherent_pt_trace_norm(const SplitSectorState& st) {
    const int n = st.n_total();
    const SectorBasis& basis = st.basis;
    auto rho_at = [&](int k1, int l1, int k2, int l2, int kp1, int lp1, int kp2, int lp2) {
        return st.rho_sp(basis.index_of({k1, l1, k2, l2}), basis.index_of({kp1, lp1, kp2, lp2}));
    };
    double total = 0.0;
    for (int p = 0; p <= n; ++p)
        for (int q = 0; q <= n; ++q) {
            const int cp = n - q, cq = n - p;
            if (p + q != n && std::make_pair(p, q) > std::make_pair(cp, cq)) continue;
            // rows (s1 in p, u in q), cols (t1 in cp, v in cq); PT[(s1,u),(t1,v)] = rho[(s1,v),(t1,u)]
            Matrix x((p + 1) * (q + 1), (cp + 1) * (cq + 1));
            for (int s = 0; s <= p; ++s)
                for (int u = 0; u <= q; ++u)
                    for (int t = 0; t <= cp; ++t)
                        for (int v = 0; v <= cq; ++v)
                            x(s * (q + 1) + u, t * (cq + 1) + v) = rho_at(s, p - s, v, cq - v, t, cp - t, u, q - u);
            if (p + q == n) total += hermitian_trace_norm(x);
            else total += 2.0 * Eigen::JacobiSVD<Matrix>(x).singularValues().sum();
        }
    return total;
}

inline double resolved_pt_trace_norm(const NumberResolvedSplit& r) {
    double total = 0.0;
    for (const auto& b : r.blocks) total += b.cond_prob * block_pt_trace_norm(b);
    return total;
}

inline double logarithmic_negativity(const NumberResolvedSplit& r) { return clamp_log_negativity(resolved_pt_trace_norm(r)); }

inline double logarithmic_negativity(const SplitSectorState& st,
                                     NegativityMode mode = NegativityMode::local_number_resolved) {
    if (mode == NegativityMode::coherent) return clamp_log_negativity(coherent_pt_trace_norm(st));
    return logarithmic_negativity(number_blocks(st));
}

inline double logarithmic_negativity(const TwoModeState& state, int n_total,
                                     NegativityMode mode = NegativityMode::local_number_resolved) {
    if (mode == NegativityMode::coherent)
        return clamp_log_negativity(coherent_pt_trace_norm(split_sector_density(state, n_total)));
    return logarithmic_negativity(split_number_blocks(state, n_total));
}

/// Largest negativity of an N-particle sector, reached with N1 = N2 = N/2.
inline double max_log_negativity(int n_total) { return std::log2(n_total / 2.0 + 1.0); }

// ---------------------------------------------------------------------------
// Variance criteria

inline constexpr double kDegenerateDenominator = 1e-10;

struct CriterionValue {
    double value = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    bool degenerate = false;

    bool detects() const { return !degenerate && value < 1.0; }
};

namespace detail {

inline CriterionValue ratio(double num, double den) {
    CriterionValue c;
    c.numerator = num;
    c.denominator = den;
    c.degenerate = std::abs(den) < kDegenerateDenominator;
    c.value = c.degenerate ? std::numeric_limits<double>::infinity() : num / den;
    return c;
}

inline double clamp_variance(double v) { return std::max(v, 0.0); }

inline void check_gains(double gy, double gz) {
    if (gy == 0.0 || gz == 0.0 || !std::isfinite(gy) || !std::isfinite(gz))
        fail(ErrorKind::validation, "gy and gz must be finite and nonzero");
}

} // namespace detail

/// sqrt(Var(gy S1y - S2y) Var(gz S1z + S2z)) / (|gy gz| (|<S1x>| + |<S2x>|))
inline CriterionValue gmvt(const SpinMoments& m, double gy = 1.0, double gz = 1.0) {
    detail::check_gains(gy, gz);
    const double vy = detail::clamp_variance(m.variance(Axis::y, gy, -1.0));
    const double vz = detail::clamp_variance(m.variance(Axis::z, gz, 1.0));
    const double mx = std::abs(m.first(0, Axis::x)) + std::abs(m.first(1, Axis::x));
    return detail::ratio(std::sqrt(vy * vz), std::abs(gy * gz) * mx);
}

/// (Var(S1y - S2y) + Var(S1z + S2z)) / (2 (|<S1x>| + |<S2x>|))
inline CriterionValue dgcz(const SpinMoments& m) {
    const double vy = detail::clamp_variance(m.variance(Axis::y, 1.0, -1.0));
    const double vz = detail::clamp_variance(m.variance(Axis::z, 1.0, 1.0));
    const double mx = std::abs(m.first(0, Axis::x)) + std::abs(m.first(1, Axis::x));
    return detail::ratio(vy + vz, 2.0 * mx);
}

/// (Var(S1x + S2x) + Var(S1y - S2y) + Var(S1z + S2z)) / (2 (<N1> + <N2>))
inline CriterionValue ht(const SpinMoments& m) {
    if (m.n_total < 1) fail(ErrorKind::validation, "HT criterion requires N >= 1");
    const double vx = detail::clamp_variance(m.variance(Axis::x, 1.0, 1.0));
    const double vy = detail::clamp_variance(m.variance(Axis::y, 1.0, -1.0));
    const double vz = detail::clamp_variance(m.variance(Axis::z, 1.0, 1.0));
    return detail::ratio(vx + vy + vz, 2.0 * (m.number[0] + m.number[1]));
}

inline SpinMoments sector_moments(const TwoModeState& state, int n_total) {
    return moments_reduced(project_two_mode(state, n_total));
}

inline double gmvt(const TwoModeState& state, int n_total, double gy = 1.0, double gz = 1.0) {
    detail::check_gains(gy, gz);
    return gmvt(sector_moments(state, n_total), gy, gz).value;
}
inline double dgcz(const TwoModeState& state, int n_total) { return dgcz(sector_moments(state, n_total)).value; }
inline double ht(const TwoModeState& state, int n_total) {
    if (n_total < 1) fail(ErrorKind::validation, "HT criterion requires N >= 1");
    return ht(sector_moments(state, n_total)).value;
}

/// Gain grid: log-spaced points in [lo, hi]; the middle point of the default grid is exactly 1.
inline std::vector<double> gain_grid(int count = 25, double lo = 0.2, double hi = 5.0) {
    require(count >= 1 && lo > 0.0 && hi >= lo, "invalid gain grid");
    std::vector<double> g;
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
        g.push_back(lo * std::pow(hi / lo, t));
    }
    if (count % 2 == 1 && std::abs(lo * hi - 1.0) < 1e-12) g[static_cast<std::size_t>(count / 2)] = 1.0;
    return g;
}

struct GainChoice {
    double gy = 1.0;
    double gz = 1.0;
    CriterionValue value;
};

/// Grid minimum of GMVT over (gy, gz). Ties keep the earlier grid point.
inline GainChoice optimize_gains(const SpinMoments& m, const std::vector<double>& grid = gain_grid()) {
    GainChoice best;
    best.value = gmvt(m, 1.0, 1.0);
    bool first = true;
    for (double gy : grid)
        for (double gz : grid) {
            const CriterionValue v = gmvt(m, gy, gz);
            if (first || v.value < best.value.value) {
                best = {gy, gz, v};
                first = false;
            }
        }
    return best;
}

// ---------------------------------------------------------------------------
// Report

struct CriterionOptions {
    double gy = 1.0;
    double gz = 1.0;
    bool optimize_g = false;
    NegativityMode negativity = NegativityMode::local_number_resolved;
};

struct CriterionComponents {
    double mean_s1x = 0.0;
    double mean_s2x = 0.0;
    double mean_n1 = 0.0;
    double mean_n2 = 0.0;
    double var_x_sum = 0.0;  // Var(S1x + S2x)
    double var_y_diff = 0.0; // Var(S1y - S2y)
    double var_z_sum = 0.0;  // Var(S1z + S2z)
    double var_y_gain = 0.0; // Var(gy S1y - S2y)
    double var_z_gain = 0.0; // Var(gz S1z + S2z)
};

struct CriterionReport {
    int n_sector = 0;
    double p_n = 0.0;
    double log_neg = 0.0;
    double e_max = 0.0;
    double gy = 1.0;
    double gz = 1.0;
    CriterionValue gmvt;
    CriterionValue dgcz;
    CriterionValue ht;
    CriterionComponents components;
    NegativityMode negativity = NegativityMode::local_number_resolved;

    bool any_detection() const { return gmvt.detects() || dgcz.detects() || ht.detects(); }
};

inline CriterionReport evaluate_sector(const TwoModeState& state, int n_total, const CriterionOptions& opt = {}) {
    require(n_total >= 1, "criteria require a sector with N >= 1");
    const SectorState sector = project_two_mode(state, n_total);
    const SpinMoments m = moments_reduced(sector);
    CriterionReport r;
    r.n_sector = n_total;
    r.p_n = sector.prob;
    r.e_max = max_log_negativity(n_total);
    r.negativity = opt.negativity;
    r.log_neg = logarithmic_negativity(state, n_total, opt.negativity);
    if (opt.optimize_g) {
        const GainChoice g = optimize_gains(m);
        r.gy = g.gy;
        r.gz = g.gz;
        r.gmvt = g.value;
    } else {
        r.gy = opt.gy;
        r.gz = opt.gz;
        r.gmvt = gmvt(m, opt.gy, opt.gz);
    }
    r.dgcz = dgcz(m);
    r.ht = ht(m);
    auto& c = r.components;
    c.mean_s1x = m.first(0, Axis::x);
    c.mean_s2x = m.first(1, Axis::x);
    c.mean_n1 = m.number[0];
    c.mean_n2 = m.number[1];
    c.var_x_sum = m.variance(Axis::x, 1.0, 1.0);
    c.var_y_diff = m.variance(Axis::y, 1.0, -1.0);
    c.var_z_sum = m.variance(Axis::z, 1.0, 1.0);
    c.var_y_gain = m.variance(Axis::y, r.gy, -1.0);
    c.var_z_gain = m.variance(Axis::z, r.gz, 1.0);
    return r;
}

} // namespace splitbec
