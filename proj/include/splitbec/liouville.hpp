#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "common.hpp"
#include "fock.hpp"

namespace splitbec {

/// Rates and phases of the pumped spinor condensate, all in units of the loss rate.
struct SimParams {
    double delta = 0.0;   // detuning
    double amp = 0.0;     // pump amplitude
    double theta_a = 0.0; // pump phases
    double theta_b = 0.0;
    double u = 0.0;       // same-spin interaction
    double v = 0.0;       // cross-spin interaction
    double gamma = 1.0;   // loss rate
    int n_max = 10;

    void validate() const {
        auto finite = [](double x, const char* name) {
            require(std::isfinite(x), std::string(name) + " must be finite");
        };
        finite(delta, "delta");
        finite(amp, "amp");
        finite(theta_a, "theta_a");
        finite(theta_b, "theta_b");
        finite(u, "u");
        finite(v, "v");
        finite(gamma, "gamma");
        require(gamma > 0.0, "gamma must be > 0");
        require(amp >= 0.0, "amp must be >= 0");
        require(n_max >= 1, "n_max must be >= 1 (got " + std::to_string(n_max) + ")");
    }

    ModeCutoff cutoff() const { return ModeCutoff(n_max); }

    friend bool operator==(const SimParams&, const SimParams&) = default;
};

inline Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double hermiticity_error(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline Eigen::VectorXd hermitian_eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "Hermitian eigensolver failed");
    return es.eigenvalues();
}

/// Trace distance 1/2 ||x - y||_1 between two Hermitian matrices.
inline double trace_distance(const Matrix& x, const Matrix& y) {
    return 0.5 * hermitian_eigenvalues(x - y).cwiseAbs().sum();
}

/// Density matrix on the truncated two-mode Fock basis.
struct TwoModeState {
    ModeCutoff cutoff;
    Matrix rho;
    double time = 0.0;

    TwoModeState(ModeCutoff c, Matrix r, double t = 0.0) : cutoff(c), rho(std::move(r)), time(t) {
        require(rho.rows() == cutoff.dim() && rho.cols() == cutoff.dim(),
                "density matrix dimension does not match cutoff");
    }

    static TwoModeState fock(ModeCutoff c, FockIndex s) { return TwoModeState(c, fock_projector(c, s)); }
    static TwoModeState vacuum(ModeCutoff c) { return fock(c, {0, 0}); }

    void validate(double herm_tol = 1e-10, double trace_tol = 1e-8, double psd_tol = 1e-8) const {
        require(hermiticity_error(rho) <= herm_tol, "density matrix is not Hermitian");
        require(std::abs(rho.trace() - 1.0) <= trace_tol, "density matrix trace differs from 1");
        require(hermitian_eigenvalues(rho).minCoeff() >= -psd_tol, "density matrix is not positive semidefinite");
    }
};

inline Operator build_hamiltonian(const SimParams& p) {
    p.validate();
    const ModeCutoff c = p.cutoff();
    const Operator a = annihilation(Mode::a, c);
    const Operator b = annihilation(Mode::b, c);
    const Operator na = number_op(Mode::a, c);
    const Operator nb = number_op(Mode::b, c);
    const Operator id = Operator::identity(c.dim());
    const cplx ea = std::polar(1.0, p.theta_a);
    const cplx eb = std::polar(1.0, p.theta_b);

    const Operator h0 = cplx(p.delta) * (na + nb);
    const Operator pump = cplx(p.amp) * (std::conj(ea) * a.adjoint() + ea * a + std::conj(eb) * b.adjoint() + eb * b);
    const Operator inter = cplx(0.5 * p.u) * (na * (na - id) + nb * (nb - id)) + cplx(p.v) * (na * nb);
    return h0 + pump + inter;
}

/// Right-hand side of the master equation with cached operators.
///
/// d rho/dt = -i(H_eff rho - rho H_eff^dag) + gamma (a rho a^dag + b rho b^dag),
/// H_eff = H - i gamma/2 (a^dag a + b^dag b).
class MasterEquation {
public:
    explicit MasterEquation(const SimParams& p) : params_(p), cutoff_(p.cutoff()) {
        h_ = build_hamiltonian(p).sparse();
        a_ = annihilation(Mode::a, cutoff_).sparse();
        b_ = annihilation(Mode::b, cutoff_).sparse();
        build_stencil();
    }

    const SimParams& params() const noexcept { return params_; }
    ModeCutoff cutoff() const noexcept { return cutoff_; }

    Matrix rhs(const Matrix& rho) const {
        Matrix out(rho.rows(), rho.cols());
        rhs_into(rho, out);
        return out;
    }

    /// Writes d rho/dt into out. Each basis state couples to at most four neighbours
    /// through the pump, so the commutator is evaluated as a stencil.
    void rhs_into(const Matrix& rho, Matrix& out) const { apply(rho, out, false); }

    /// As rhs_into for Hermitian rho: evaluates the upper triangle and mirrors it.
    void rhs_hermitian_into(const Matrix& rho, Matrix& out) const { apply(rho, out, true); }

    /// Dense Liouvillian on row-major vec(rho), vec(X rho Y) = (X kron Y^T) vec(rho).
    /// Assembled from the operators, independently of the stencil.
    Matrix superoperator() const {
        const int d = cutoff_.dim();
        const SparseMatrix id = Operator::identity(d).sparse();
        const SparseMatrix na = number_op(Mode::a, cutoff_).sparse();
        const SparseMatrix nb = number_op(Mode::b, cutoff_).sparse();
        const double g = params_.gamma;
        const cplx i(0.0, 1.0);
        Matrix l = Matrix::Zero(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d);
        add_kron(l, -i, h_, id);
        add_kron(l, i, id, SparseMatrix(h_.transpose()));
        for (const auto& [c, n] : {std::pair{&a_, &na}, std::pair{&b_, &nb}}) {
            add_kron(l, -0.5 * g, *n, id);
            add_kron(l, -0.5 * g, id, SparseMatrix(n->transpose()));
            add_kron(l, g, *c, SparseMatrix(c->conjugate()));
        }
        return l;
    }

private:
    // Row i of H_eff: diagonal plus pump neighbours. up_* index the state with one more
    // particle. Missing neighbours point at state 0 with zero amplitude.
    struct Stencil {
        cplx diag;
        int nbr[4] = {0, 0, 0, 0};
        cplx coeff[4] = {0.0, 0.0, 0.0, 0.0};
        int up_a = 0;
        int up_b = 0;
        double up_a_amp = 0.0;
        double up_b_amp = 0.0;
    };

    void build_stencil() {
        const int d = cutoff_.dim();
        const int n_max = cutoff_.n_max();
        const SimParams& p = params_;
        const cplx ea = std::polar(p.amp, p.theta_a);
        const cplx eb = std::polar(p.amp, p.theta_b);
        stencil_.assign(static_cast<std::size_t>(d), Stencil{});
        for (int i = 0; i < d; ++i) {
            const FockIndex s = cutoff_.unflatten(i);
            Stencil& st = stencil_[static_cast<std::size_t>(i)];
            const double k = s.k, l = s.l;
            st.diag = cplx(p.delta * (k + l) + 0.5 * p.u * (k * (k - 1) + l * (l - 1)) + p.v * k * l,
                           -0.5 * p.gamma * (k + l));
            // e^{i theta} a couples (k+1, l) into row i; e^{-i theta} a^dag couples (k-1, l).
            if (s.k < n_max) {
                st.nbr[0] = cutoff_.flatten({s.k + 1, s.l});
                st.coeff[0] = ea * std::sqrt(k + 1);
                st.up_a = st.nbr[0];
                st.up_a_amp = std::sqrt(k + 1);
            }
            if (s.k > 0) {
                st.nbr[1] = cutoff_.flatten({s.k - 1, s.l});
                st.coeff[1] = std::conj(ea) * std::sqrt(k);
            }
            if (s.l < n_max) {
                st.nbr[2] = cutoff_.flatten({s.k, s.l + 1});
                st.coeff[2] = eb * std::sqrt(l + 1);
                st.up_b = st.nbr[2];
                st.up_b_amp = std::sqrt(l + 1);
            }
            if (s.l > 0) {
                st.nbr[3] = cutoff_.flatten({s.k, s.l - 1});
                st.coeff[3] = std::conj(eb) * std::sqrt(l);
            }
        }
    }

    void apply(const Matrix& rho, Matrix& out, bool hermitian) const {
        const int d = cutoff_.dim();
        if (rho.rows() != d || rho.cols() != d)
            fail(ErrorKind::validation, "density matrix dimension does not match cutoff");
        if (out.rows() != d || out.cols() != d) out.resize(d, d);
        const cplx* x = rho.data();
        cplx* y = out.data();
        const cplx i_unit(0.0, 1.0);
        const double g = params_.gamma;
        auto at = [&](int r, int c) { return x[static_cast<std::ptrdiff_t>(c) * d + r]; };
        for (int j = 0; j < d; ++j) {
            const Stencil& sj = stencil_[static_cast<std::size_t>(j)];
            const int i_end = hermitian ? j + 1 : d;
            for (int i = 0; i < i_end; ++i) {
                const Stencil& si = stencil_[static_cast<std::size_t>(i)];
                cplx left = si.diag * at(i, j);
                cplx right = std::conj(sj.diag) * at(i, j);
                for (int r = 0; r < 4; ++r) {
                    left += si.coeff[r] * at(si.nbr[r], j);
                    right += std::conj(sj.coeff[r]) * at(i, sj.nbr[r]);
                }
                const cplx jump = si.up_a_amp * sj.up_a_amp * at(si.up_a, sj.up_a) +
                                  si.up_b_amp * sj.up_b_amp * at(si.up_b, sj.up_b);
                y[static_cast<std::ptrdiff_t>(j) * d + i] = -i_unit * (left - right) + g * jump;
            }
        }
        if (hermitian)
            for (int j = 0; j < d; ++j)
                for (int i = j + 1; i < d; ++i)
                    y[static_cast<std::ptrdiff_t>(j) * d + i] = std::conj(y[static_cast<std::ptrdiff_t>(i) * d + j]);
    }

    static void add_kron(Matrix& out, cplx s, const SparseMatrix& x, const SparseMatrix& y) {
        const Eigen::Index d = y.rows();
        for (int r = 0; r < x.outerSize(); ++r)
            for (SparseMatrix::InnerIterator ix(x, r); ix; ++ix)
                for (int q = 0; q < y.outerSize(); ++q)
                    for (SparseMatrix::InnerIterator iy(y, q); iy; ++iy)
                        out(ix.row() * d + iy.row(), ix.col() * d + iy.col()) += s * ix.value() * iy.value();
    }

    SimParams params_;
    ModeCutoff cutoff_;
    SparseMatrix h_;
    SparseMatrix a_;
    SparseMatrix b_;
    std::vector<Stencil> stencil_;
};

inline Matrix master_rhs(const TwoModeState& state, const SimParams& p) {
    if (!(state.cutoff == p.cutoff())) fail(ErrorKind::validation, "state cutoff does not match parameters");
    return MasterEquation(p).rhs(state.rho);
}

struct EvolveOptions {
    double tol = 1e-9;
    double t_max = 200.0;
    double dt = 0.01;
    double trace_drift = 1e-8;
    int max_halvings = 8;
    /// Called with every accepted state, including the initial one.
    std::function<void(const TwoModeState&)> observer;
};

struct SteadyState {
    TwoModeState state;
    bool converged = false;
    double residual = 0.0; // ||d rho/dt||_F / ||rho||_F at the returned state
    long steps = 0;
};

/// Fixed-step RK4 integration until ||d rho/dt||_F < tol ||rho||_F or t_max.
inline SteadyState evolve_to_steady(const SimParams& p, const TwoModeState& rho0, const EvolveOptions& opt) {
    p.validate();
    require(opt.tol > 0.0, "tol must be > 0");
    require(opt.dt > 0.0, "dt must be > 0");
    require(rho0.cutoff == p.cutoff(), "initial state cutoff does not match n_max");
    require(std::abs(rho0.rho.trace() - 1.0) <= 1e-8, "initial state must have unit trace");

    const MasterEquation eq(p);
    const int d = eq.cutoff().dim();
    Matrix rho = hermitian_part(rho0.rho);
    Matrix k1(d, d), k2(d, d), k3(d, d), k4(d, d), stage(d, d), next(d, d);
    double t = rho0.time;
    long steps = 0;
    if (opt.observer) opt.observer(TwoModeState(rho0.cutoff, rho, t));

    for (;;) {
        eq.rhs_hermitian_into(rho, k1);
        if (!k1.allFinite() || !rho.allFinite())
            fail(ErrorKind::numerical, "NaN or Inf encountered at t = " + std::to_string(t));
        const double residual = k1.norm() / rho.norm();
        if (residual < opt.tol) return {TwoModeState(rho0.cutoff, rho, t), true, residual, steps};
        if (t >= opt.t_max - 1e-12) return {TwoModeState(rho0.cutoff, rho, t), false, residual, steps};

        double h = std::min(opt.dt, opt.t_max - t);
        for (int halving = 0;; ++halving) {
            stage.noalias() = rho + (0.5 * h) * k1;
            eq.rhs_hermitian_into(stage, k2);
            stage.noalias() = rho + (0.5 * h) * k2;
            eq.rhs_hermitian_into(stage, k3);
            stage.noalias() = rho + h * k3;
            eq.rhs_hermitian_into(stage, k4);
            next.noalias() = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (std::abs(next.trace() - 1.0) <= opt.trace_drift || halving >= opt.max_halvings) break;
            h *= 0.5;
        }
        rho.noalias() = 0.5 * (next + next.adjoint());
        rho /= rho.trace().real();
        t += h;
        ++steps;
        if (opt.observer) opt.observer(TwoModeState(rho0.cutoff, rho, t));
    }
}

inline SteadyState evolve_to_steady(const SimParams& p, const TwoModeState& rho0, double tol = 1e-9,
                                    double t_max = 200.0) {
    EvolveOptions opt;
    opt.tol = tol;
    opt.t_max = t_max;
    return evolve_to_steady(p, rho0, opt);
}

inline SteadyState evolve_to_steady(const SimParams& p) {
    return evolve_to_steady(p, TwoModeState::vacuum(p.cutoff()));
}

inline constexpr int kDirectSolverMaxCutoff = 7;

/// Steady state as the null vector of the dense Liouvillian.
inline TwoModeState steady_state_direct(const SimParams& p) {
    p.validate();
    require(p.n_max <= kDirectSolverMaxCutoff,
            "steady_state_direct requires n_max <= " + std::to_string(kDirectSolverMaxCutoff));
    const MasterEquation eq(p);
    const Matrix l = eq.superoperator();
    const int d = eq.cutoff().dim();

    Eigen::ComplexEigenSolver<Matrix> es(l, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "Liouvillian eigensolver failed");
    std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), [](cplx x, cplx y) { return std::abs(x) < std::abs(y); });
    if (std::abs(ev[1]) < 10.0 * std::abs(ev[0])) {
        std::ostringstream msg;
        msg << "Liouvillian null space is degenerate or ill-conditioned: |lambda_0| = " << std::abs(ev[0])
            << ", |lambda_1| = " << std::abs(ev[1]);
        fail(ErrorKind::numerical, msg.str());
    }

    // Inverse iteration, shifted off the smallest eigenvalue so the factorization stays regular.
    const Eigen::Index n = l.rows();
    const cplx shift = ev[0] + 1e-8 * std::abs(ev[1]);
    const Eigen::PartialPivLU<Matrix> lu(l - shift * Matrix::Identity(n, n));
    Vector x = Vector::Zero(n);
    for (int i = 0; i < d; ++i) x(static_cast<Eigen::Index>(i) * d + i) = 1.0;
    for (int it = 0; it < 3; ++it) {
        x = lu.solve(x);
        x /= x.norm();
    }
    Matrix rho(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) rho(r, c) = x(static_cast<Eigen::Index>(r) * d + c);
    rho = hermitian_part(rho / rho.trace());
    rho /= rho.trace().real();
    return TwoModeState(eq.cutoff(), rho);
}

/// Probability on basis states at the occupation cutoff of either mode.
inline double boundary_population(const TwoModeState& s) {
    const int n = s.cutoff.n_max();
    double total = 0.0;
    for (int i = 0; i < s.cutoff.dim(); ++i) {
        const FockIndex f = s.cutoff.unflatten(i);
        if (f.k == n || f.l == n) total += s.rho(i, i).real();
    }
    return total;
}

} // namespace splitbec
