#pragma once

// Equality-constrained convex programs, their saddle-point (primal-dual)
// gradient flow, and a direct KKT solver for the quadratic case used as an
// oracle for the flow.

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"
#include "krasovskii/passivity.hpp"
#include "krasovskii/rng.hpp"

namespace krasovskii {

/// min F(x) subject to A x = b, with F strictly convex and C^2.
struct ConvexProgram {
    std::size_t n = 0;  // decision variables
    std::size_t m = 0;  // equality constraints

    std::function<double(const Vec&)> objective;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;

    Mat A;  // m x n
    Vec b;

    Mat tau_x;       // n x n symmetric positive definite time constants
    Mat tau_lambda;  // m x m
};

/// Quadratic objective F(x) = x^T P x / 2 + q^T x; admits a direct KKT solve.
struct QuadraticProgram {
    Mat P;
    Vec q;
    Mat A;
    Vec b;
    Mat tau_x;       // defaults to identity when empty
    Mat tau_lambda;

    std::size_t n() const { return P.rows(); }
    std::size_t m() const { return A.rows(); }

    ConvexProgram to_convex() const {
        ConvexProgram prog;
        prog.n = n();
        prog.m = m();
        const Mat P_ = P;
        const Vec q_ = q;
        prog.objective = [P_, q_](const Vec& x) { return 0.5 * dot(x, P_ * x) + dot(q_, x); };
        prog.gradient = [P_, q_](const Vec& x) { return P_ * x + q_; };
        prog.hessian = [P_](const Vec&) { return P_; };
        prog.A = A;
        prog.b = b;
        prog.tau_x = tau_x.empty() ? Mat::identity(n()) : tau_x;
        prog.tau_lambda = tau_lambda.empty() ? Mat::identity(m()) : tau_lambda;
        return prog;
    }
};

/// Check strict convexity at seeded probes (Hessian min eigenvalue >= 1e-9)
/// and full row rank of the constraint matrix (feasibility of A x = b).
inline void validate_program(const ConvexProgram& prog, double probe_halfwidth = 1.0,
                             std::size_t probes = 10, std::uint64_t seed = 20240903) {
    if (prog.A.rows() != prog.m || (prog.m > 0 && prog.A.cols() != prog.n))
        throw DimensionError("program: constraint matrix shape mismatch");
    if (prog.b.size() != prog.m) throw DimensionError("program: constraint vector length mismatch");
    if (prog.tau_x.rows() != prog.n || prog.tau_lambda.rows() != prog.m)
        throw DimensionError("program: time-constant matrix shape mismatch");
    std::mt19937_64 gen(seed);
    Vec x(prog.n);
    for (std::size_t k = 0; k < probes; ++k) {
        for (double& xi : x) xi = uniform(gen, -probe_halfwidth, probe_halfwidth);
        if (min_eigenvalue(prog.hessian(x)) < 1e-9)
            throw SolverError("objective is not strictly convex at a probe point");
    }
    if (prog.m > 0 && rank(prog.A) < prog.m)
        throw SolverError("constraint matrix is rank-deficient");
}

inline double lagrangian(const ConvexProgram& prog, const Vec& x, const Vec& lambda) {
    if (x.size() != prog.n || lambda.size() != prog.m)
        throw DimensionError("lagrangian: dimension mismatch");
    double value = prog.objective(x);
    if (prog.m > 0) value += dot(lambda, prog.A * x - prog.b);
    return value;
}

struct KktResidual {
    double stationarity = 0.0;  // |dF/dx + A^T lambda|
    double feasibility = 0.0;   // |A x - b|
};

inline KktResidual kkt_residual(const ConvexProgram& prog, const Vec& x, const Vec& lambda) {
    if (x.size() != prog.n || lambda.size() != prog.m)
        throw DimensionError("kkt_residual: dimension mismatch");
    Vec stat = prog.gradient(x);
    if (prog.m > 0) stat = stat + prog.A.transposed() * lambda;
    KktResidual r;
    r.stationarity = norm2(stat);
    r.feasibility = prog.m > 0 ? norm2(prog.A * x - prog.b) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Primal-dual gradient flow
// ---------------------------------------------------------------------------

/// Saddle-point flow over z = (x, lambda):
///     tau_x xdot      = -(dF/dx + A^T lambda + u)
///     tau_lambda ldot = A x - b
/// with external input u entering the primal equation only. The storage
/// metric is Q = blkdiag(tau_x, tau_lambda). The supply reported by the
/// generic machinery is h = g^T Q f = tau_x^{-1}(dL/dx + u), i.e. minus the
/// primal velocity; `velocity_supply` exposes the sign-flipped variant so
/// both conventions stay visible in reports.
struct PrimalDualSystem {
    InputAffineSystem system;  // state (x, lambda), input dimension n
    StorageMetric metric;      // blkdiag(tau_x, tau_lambda)
    std::size_t n = 0;         // primal dimension
    std::size_t m = 0;         // dual dimension

    std::pair<Vec, Vec> split(const Vec& z) const {
        if (z.size() != n + m) throw DimensionError("primal-dual state dimension mismatch");
        return {slice(z, 0, n), slice(z, n, m)};
    }

    /// -tau_x^{-1}(dL/dx + u): the primal velocity, equal to the negative of
    /// the metric-route supply g^T Q f.
    Vec velocity_supply(const Vec& z, const Vec& u) const {
        const Vec f = eval_vector_field(system, z, u);
        return slice(f, 0, n);
    }
};

inline PrimalDualSystem build_primal_dual(const ConvexProgram& prog) {
    validate_program(prog);
    PrimalDualSystem pd;
    pd.n = prog.n;
    pd.m = prog.m;

    Mat inv_tau_x, inv_tau_lambda;
    try {
        inv_tau_x = inverse(prog.tau_x);
        inv_tau_lambda = prog.m > 0 ? inverse(prog.tau_lambda) : Mat(0, 0);
    } catch (const SolverError&) {
        throw SolverError("primal-dual flow: time-constant matrix is singular");
    }

    const std::size_t n = prog.n, m = prog.m;
    const ConvexProgram p = prog;

    InputAffineSystem& sys = pd.system;
    sys.n = n + m;
    sys.m = n;
    sys.meta.name = "primal_dual";
    sys.meta.state_labels = default_labels("x", n);
    for (auto& l : default_labels("lam", m)) sys.meta.state_labels.push_back(l);
    sys.meta.input_labels = default_labels("u", n);

    sys.drift = [p, inv_tau_x, inv_tau_lambda, n, m](const Vec& z) {
        const Vec x = slice(z, 0, n), lambda = slice(z, n, m);
        Vec stat = p.gradient(x);
        if (m > 0) stat = stat + p.A.transposed() * lambda;
        Vec xdot = -(inv_tau_x * stat);
        Vec ldot = m > 0 ? inv_tau_lambda * (p.A * x - p.b) : Vec{};
        return concat(xdot, ldot);
    };
    // columns of the input map: -tau_x^{-1} stacked over zeros
    Mat g(n + m, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = -inv_tau_x(i, j);
    sys.input_maps = [g](const Vec&) { return g; };
    sys.jac_drift = [p, inv_tau_x, inv_tau_lambda, n, m](const Vec& z) {
        const Vec x = slice(z, 0, n);
        const Mat hess = p.hessian(x);
        Mat j(n + m, n + m);
        const Mat top_left = inv_tau_x * hess;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) j(i, k) = -top_left(i, k);
        if (m > 0) {
            const Mat top_right = inv_tau_x * p.A.transposed();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < m; ++k) j(i, n + k) = -top_right(i, k);
            const Mat bottom_left = inv_tau_lambda * p.A;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t k = 0; k < n; ++k) j(n + i, k) = bottom_left(i, k);
        }
        return j;
    };
    sys.jac_inputs = [n, m](const Vec&) { return std::vector<Mat>(n, Mat(n + m, n + m)); };

    pd.metric = StorageMetric(block_diag(prog.tau_x, prog.tau_lambda));
    return pd;
}

// ---------------------------------------------------------------------------
// Direct KKT solve (quadratic objective)
// ---------------------------------------------------------------------------

struct KktPoint {
    Vec x;
    Vec lambda;
    double stationarity_norm = 0.0;
    double feasibility_norm = 0.0;
};

/// Solve the saddle system [[P, A^T], [A, 0]] (x, lambda) = (-q, b) by LU
/// factorization. Throws SolverError when the KKT matrix is singular
/// (rank-deficient constraints or indefinite reduced Hessian).
inline KktPoint solve_kkt_direct(const QuadraticProgram& qp) {
    const std::size_t n = qp.n(), m = qp.m();
    if (qp.q.size() != n || qp.b.size() != m || (m > 0 && qp.A.cols() != n))
        throw DimensionError("solve_kkt_direct: dimension mismatch");
    if (m > 0 && rank(qp.A) < m)
        throw SolverError("solve_kkt_direct: constraint matrix is rank-deficient");

    Mat kkt(n + m, n + m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) kkt(i, j) = qp.P(i, j);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            kkt(n + i, j) = qp.A(i, j);
            kkt(j, n + i) = qp.A(i, j);
        }
    Vec rhs = concat(-qp.q, qp.b);
    Vec sol;
    try {
        sol = lu_solve(kkt, rhs);
    } catch (const SolverError&) {
        throw SolverError("solve_kkt_direct: KKT matrix is singular");
    }

    KktPoint point;
    point.x = slice(sol, 0, n);
    point.lambda = slice(sol, n, m);
    const auto res = kkt_residual(qp.to_convex(), point.x, point.lambda);
    point.stationarity_norm = res.stationarity;
    point.feasibility_norm = res.feasibility;
    if (point.stationarity_norm > 1e-10 || point.feasibility_norm > 1e-10)
        throw SolverError("solve_kkt_direct: residuals exceed 1e-10 after the direct solve");
    return point;
}

// ---------------------------------------------------------------------------
// Flow convergence detection
// ---------------------------------------------------------------------------

struct FlowConvergence {
    bool converged = false;
    std::size_t index = 0;  // first sample of the qualifying streak
    double time = 0.0;
    KktResidual final_residual;
};

/// Convergence rule for integrated flows: both KKT residuals at or below
/// `tol` for `consecutive` recorded samples in a row.
inline FlowConvergence detect_kkt_convergence(const std::vector<double>& times,
                                              const std::vector<Vec>& states,
                                              const ConvexProgram& prog, double tol = 1e-8,
                                              std::size_t consecutive = 10) {
    FlowConvergence out;
    std::size_t streak = 0;
    for (std::size_t k = 0; k < states.size(); ++k) {
        const Vec x = slice(states[k], 0, prog.n);
        const Vec lambda = slice(states[k], prog.n, prog.m);
        const auto r = kkt_residual(prog, x, lambda);
        if (r.stationarity <= tol && r.feasibility <= tol) {
            if (++streak >= consecutive && !out.converged) {
                out.converged = true;
                out.index = k + 1 - consecutive;
                out.time = times[out.index];
            }
        } else {
            streak = 0;
        }
        if (k + 1 == states.size()) out.final_residual = r;
    }
    return out;
}

}  // namespace krasovskii
