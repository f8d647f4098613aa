#pragma once

#include <map>
#include <string>

#include "common.hpp"
#include "liouville.hpp"

namespace splitbec {

/// Total-number sector of a two-mode state, normalized.
///
/// rho_n is (N+1) x (N+1) on the basis |k, N-k>, k = 0..N. Entries whose occupations
/// exceed the cutoff are zero. Keeping the full spin-N/2 basis makes products of
/// number-conserving operators exact inside the sector.
struct SectorState {
    int n_total = 0;
    Matrix rho_n;
    double prob = 0.0;
    ModeCutoff cutoff{1};

    /// The same sector as a D x D matrix on the truncated two-mode basis.
    Matrix embedded() const {
        Matrix out = Matrix::Zero(cutoff.dim(), cutoff.dim());
        for (int k = 0; k <= n_total; ++k)
            for (int kp = 0; kp <= n_total; ++kp) {
                const FockIndex r{k, n_total - k}, c{kp, n_total - kp};
                if (cutoff.contains(r) && cutoff.contains(c)) out(cutoff.flatten(r), cutoff.flatten(c)) = rho_n(k, kp);
            }
        return out;
    }
};

inline double sector_weight(const TwoModeState& s, int n_total) {
    double p = 0.0;
    for (int k = 0; k <= n_total; ++k) {
        const FockIndex f{k, n_total - k};
        if (s.cutoff.contains(f)) p += s.rho(s.cutoff.flatten(f), s.cutoff.flatten(f)).real();
    }
    return p;
}

inline void check_sector_range(ModeCutoff c, int n_total) {
    if (n_total < 0 || n_total > 2 * c.n_max())
        fail(ErrorKind::validation, "sector N = " + std::to_string(n_total) + " outside [0, 2 n_max = " +
                                        std::to_string(2 * c.n_max()) + "]");
}

inline SectorState project_two_mode(const TwoModeState& s, int n_total, double floor = kEmptySectorFloor) {
    check_sector_range(s.cutoff, n_total);
    const double p = sector_weight(s, n_total);
    if (p < floor) fail(ErrorKind::empty_sector, "empty sector N = " + std::to_string(n_total) + " (p_N = " +
                                                     std::to_string(p) + ")");
    SectorState out;
    out.n_total = n_total;
    out.prob = p;
    out.cutoff = s.cutoff;
    out.rho_n = Matrix::Zero(n_total + 1, n_total + 1);
    for (int k = 0; k <= n_total; ++k)
        for (int kp = 0; kp <= n_total; ++kp) {
            const FockIndex r{k, n_total - k}, c{kp, n_total - kp};
            if (s.cutoff.contains(r) && s.cutoff.contains(c))
                out.rho_n(k, kp) = s.rho(s.cutoff.flatten(r), s.cutoff.flatten(c)) / p;
        }
    return out;
}

struct SectorDistribution {
    std::map<int, double> probs;  // N -> p_N for N = 0 .. 2 n_max
    double truncation_loss = 0.0; // 1 - sum p_N

    double prob(int n_total) const {
        const auto it = probs.find(n_total);
        return it == probs.end() ? 0.0 : it->second;
    }
};

inline SectorDistribution sector_distribution(const TwoModeState& s) {
    SectorDistribution d;
    double total = 0.0;
    for (int n = 0; n <= 2 * s.cutoff.n_max(); ++n) {
        const double p = sector_weight(s, n);
        d.probs[n] = p;
        total += p;
    }
    d.truncation_loss = 1.0 - total;
    return d;
}

/// Most probable sector. Ties (to 1e-12 relative) go to the larger N. With
/// exclude_vacuum, N = 0 is only returned when no other sector reaches the floor.
inline int max_prob_sector(const SectorDistribution& dist, bool exclude_vacuum = true,
                           double floor = kEmptySectorFloor) {
    require(!dist.probs.empty(), "max_prob_sector on an empty distribution");
    int best = -1;
    double best_p = -1.0;
    for (const auto& [n, p] : dist.probs) {
        if (exclude_vacuum && n == 0) continue;
        if (exclude_vacuum && p < floor) continue;
        if (best < 0 || p > best_p * (1.0 + 1e-12) || (std::abs(p - best_p) <= 1e-12 * best_p && n > best)) {
            best = n;
            best_p = p;
        }
    }
    if (best < 0) return 0;
    return best;
}

} // namespace splitbec
