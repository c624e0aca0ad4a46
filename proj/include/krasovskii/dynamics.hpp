#pragma once

// Input-affine nonlinear systems
//
//     xdot = f(x, u) = g0(x) + sum_i g_i(x) u_i,
//
// their input-integrator extension (xdot, udot) = (f(x, u), u_d), Jacobian
// evaluation with a finite-difference fallback, and a damped-Newton solver
// for forced equilibria f(x*, u*) = 0.

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"

namespace krasovskii {

struct SystemMetadata {
    std::string name;
    std::vector<std::string> state_labels;  // used for CSV headers
    std::vector<std::string> input_labels;
    std::vector<std::string> state_units;   // SI unit per coordinate, "" when dimensionless
    std::vector<std::string> input_units;
};

inline std::vector<std::string> default_labels(const char* prefix, std::size_t count) {
    std::vector<std::string> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::string(prefix) + std::to_string(i + 1);
    return out;
}

struct InputAffineSystem {
    std::size_t n = 0;  // state dimension
    std::size_t m = 0;  // input dimension

    std::function<Vec(const Vec&)> drift;       // g0(x)
    std::function<Mat(const Vec&)> input_maps;  // n x m; column i is g_i(x)

    // Optional analytic Jacobians; finite differences are used when absent.
    std::function<Mat(const Vec&)> jac_drift;                // dg0/dx
    std::function<std::vector<Mat>(const Vec&)> jac_inputs;  // dg_i/dx

    // Optional domain membership test (e.g. V > 0 for circuits with a 1/V term).
    std::function<bool(const Vec&)> domain;

    SystemMetadata meta;

    bool in_domain(const Vec& x) const { return !domain || domain(x); }
    bool has_analytic_jacobians() const {
        return static_cast<bool>(jac_drift) && static_cast<bool>(jac_inputs);
    }

    Mat input_matrix(const Vec& x) const {
        if (x.size() != n) throw DimensionError("input_matrix: state dimension mismatch");
        Mat g = input_maps ? input_maps(x) : Mat(n, 0);
        if (g.rows() != n || g.cols() != m)
            throw DimensionError("input_maps returned a matrix of wrong shape for '" +
                                 meta.name + "'");
        return g;
    }
};

inline Vec eval_vector_field(const InputAffineSystem& sys, const Vec& x, const Vec& u) {
    if (x.size() != sys.n) throw DimensionError("eval_vector_field: state dimension mismatch");
    if (u.size() != sys.m) throw DimensionError("eval_vector_field: input dimension mismatch");
    Vec f = sys.drift(x);
    if (f.size() != sys.n) throw DimensionError("drift returned wrong dimension");
    if (sys.m == 0) return f;
    const Mat g = sys.input_matrix(x);
    for (std::size_t i = 0; i < sys.n; ++i) {
        double s = f[i];
        for (std::size_t j = 0; j < sys.m; ++j) s += g(i, j) * u[j];
        f[i] = s;
    }
    return f;
}

struct JacobianSet {
    Mat drift;               // dg0/dx, n x n
    std::vector<Mat> inputs; // dg_i/dx, one n x n matrix per input
    bool finite_difference = false;
};

namespace detail {

// Central differences with step 1e-6 * max(1, |x|): the usual balance of
// truncation against rounding for double precision.
inline double fd_step(const Vec& x) { return 1e-6 * std::max(1.0, norm2(x)); }

template <typename F>
Mat fd_jacobian(F&& eval, const Vec& x, std::size_t out_dim) {
    const double h = fd_step(x);
    Mat jac(out_dim, x.size());
    Vec xp = x, xm = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        Vec fp, fm;
        try {
            fp = eval(xp);
            fm = eval(xm);
        } catch (const std::exception& e) {
            throw DomainError("finite-difference probe failed near coordinate " +
                              std::to_string(j) + ": " + e.what());
        }
        for (std::size_t i = 0; i < out_dim; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return jac;
}

}  // namespace detail

/// Jacobians of the drift and of each input column at x. Falls back to
/// central finite differences when analytic Jacobians are not provided;
/// the fallback is flagged in the result.
inline JacobianSet eval_jacobians(const InputAffineSystem& sys, const Vec& x) {
    if (x.size() != sys.n) throw DimensionError("eval_jacobians: state dimension mismatch");
    JacobianSet out;
    if (sys.jac_drift) {
        out.drift = sys.jac_drift(x);
        if (out.drift.rows() != sys.n || out.drift.cols() != sys.n)
            throw DimensionError("jac_drift returned wrong shape");
    } else {
        out.drift = detail::fd_jacobian([&](const Vec& p) { return sys.drift(p); }, x, sys.n);
        out.finite_difference = true;
    }
    if (sys.m == 0) return out;
    if (sys.jac_inputs) {
        out.inputs = sys.jac_inputs(x);
        if (out.inputs.size() != sys.m)
            throw DimensionError("jac_inputs returned wrong number of matrices");
    } else {
        out.inputs.assign(sys.m, Mat(sys.n, sys.n));
        for (std::size_t i = 0; i < sys.m; ++i) {
            out.inputs[i] = detail::fd_jacobian(
                [&](const Vec& p) { return sys.input_matrix(p).col(i); }, x, sys.n);
        }
        out.finite_difference = true;
    }
    return out;
}

/// State Jacobian of the full field: df/dx = dg0/dx + sum_i u_i dg_i/dx.
inline Mat state_jacobian(const InputAffineSystem& sys, const Vec& x, const Vec& u) {
    JacobianSet jac = eval_jacobians(sys, x);
    Mat j = jac.drift;
    for (std::size_t i = 0; i < sys.m; ++i) j += u[i] * jac.inputs[i];
    return j;
}

// ---------------------------------------------------------------------------
// Input-integrator extension
// ---------------------------------------------------------------------------

/// The system augmented with an integrator on the input: state z = (x, u),
/// input u_d = udot.
struct ExtendedSystem {
    InputAffineSystem base;

    std::size_t state_dim() const { return base.n + base.m; }
    std::size_t input_dim() const { return base.m; }

    std::pair<Vec, Vec> split(const Vec& z) const {
        if (z.size() != state_dim()) throw DimensionError("extended state dimension mismatch");
        return {slice(z, 0, base.n), slice(z, base.n, base.m)};
    }

    Vec eval(const Vec& z, const Vec& u_d) const {
        auto [x, u] = split(z);
        if (u_d.size() != base.m) throw DimensionError("extended input dimension mismatch");
        return concat(eval_vector_field(base, x, u), u_d);
    }

    /// View as an input-affine system over z: drift (f(x,u), 0) and constant
    /// input columns (0, e_i).
    InputAffineSystem as_input_affine() const {
        InputAffineSystem ext;
        const InputAffineSystem plant = base;
        const std::size_t n = plant.n, m = plant.m;
        ext.n = n + m;
        ext.m = m;
        ext.drift = [plant, n, m](const Vec& z) {
            const Vec x = slice(z, 0, n), u = slice(z, n, m);
            return concat(eval_vector_field(plant, x, u), Vec(m, 0.0));
        };
        ext.input_maps = [n, m](const Vec&) {
            Mat g(n + m, m);
            for (std::size_t i = 0; i < m; ++i) g(n + i, i) = 1.0;
            return g;
        };
        ext.jac_drift = [plant, n, m](const Vec& z) {
            const Vec x = slice(z, 0, n), u = slice(z, n, m);
            const Mat jx = state_jacobian(plant, x, u);
            const Mat ju = plant.input_matrix(x);
            Mat j(n + m, n + m);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < n; ++k) j(i, k) = jx(i, k);
                for (std::size_t k = 0; k < m; ++k) j(i, n + k) = ju(i, k);
            }
            return j;
        };
        ext.jac_inputs = [n, m](const Vec&) { return std::vector<Mat>(m, Mat(n + m, n + m)); };
        if (plant.domain) {
            auto dom = plant.domain;
            ext.domain = [dom, n](const Vec& z) { return dom(slice(z, 0, n)); };
        }
        ext.meta.name = plant.meta.name + " extended";
        ext.meta.state_labels = plant.meta.state_labels;
        ext.meta.state_labels.insert(ext.meta.state_labels.end(),
                                     plant.meta.input_labels.begin(),
                                     plant.meta.input_labels.end());
        ext.meta.input_labels = plant.meta.input_labels;
        return ext;
    }
};

inline ExtendedSystem extend(InputAffineSystem sys) { return ExtendedSystem{std::move(sys)}; }

// ---------------------------------------------------------------------------
// Forced equilibria
// ---------------------------------------------------------------------------

struct Equilibrium {
    Vec x;
    Vec u;
    double residual_norm = 0.0;
};

enum class SolveStatus { converged, singular_jacobian, stalled, max_iterations };

struct EquilibriumResult {
    SolveStatus status = SolveStatus::max_iterations;
    Equilibrium value;
    int iterations = 0;
    std::string message;

    bool ok() const { return status == SolveStatus::converged; }
};

/// Damped Newton iteration on f(x, u) = 0 over the non-frozen coordinates of
/// the concatenated vector (x, u). `frozen` has length n + m; exactly n
/// coordinates must be free so the Newton system is square. An empty mask
/// freezes all inputs. Steps are halved (up to 30 times) until the residual
/// decreases.
inline EquilibriumResult find_equilibrium(const InputAffineSystem& sys, const Vec& x_guess,
                                          const Vec& u_guess, std::vector<bool> frozen = {},
                                          double tol = 1e-10, int max_iter = 100) {
    const std::size_t n = sys.n, m = sys.m;
    if (x_guess.size() != n || u_guess.size() != m)
        throw DimensionError("find_equilibrium: guess dimension mismatch");
    if (frozen.empty()) {
        frozen.assign(n + m, false);
        for (std::size_t i = 0; i < m; ++i) frozen[n + i] = true;
    }
    if (frozen.size() != n + m)
        throw DimensionError("find_equilibrium: frozen mask must have length n + m");
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < n + m; ++i)
        if (!frozen[i]) free_idx.push_back(i);
    if (free_idx.size() != n)
        throw DimensionError("find_equilibrium: number of free coordinates must equal n");
    if (!all_finite(x_guess) || !all_finite(u_guess))
        throw DomainError("find_equilibrium: guess is not finite");

    Vec z = concat(x_guess, u_guess);
    EquilibriumResult out;
    auto residual = [&](const Vec& zz) {
        return eval_vector_field(sys, slice(zz, 0, n), slice(zz, n, m));
    };

    Vec f = residual(z);
    double fnorm = norm2(f);
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it;
        if (fnorm <= tol) {
            out.status = SolveStatus::converged;
            out.value = {slice(z, 0, n), slice(z, n, m), fnorm};
            return out;
        }
        const Vec x = slice(z, 0, n), u = slice(z, n, m);
        const Mat jx = state_jacobian(sys, x, u);
        const Mat ju = sys.input_matrix(x);
        Mat jac(n, n);
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t idx = free_idx[c];
            for (std::size_t r = 0; r < n; ++r)
                jac(r, c) = idx < n ? jx(r, idx) : ju(r, idx - n);
        }
        auto lu = LuDecomposition::compute(jac);
        if (lu.singular) {
            out.status = SolveStatus::singular_jacobian;
            out.value = {x, u, fnorm};
            out.message = "singular Jacobian at iterate " + std::to_string(it);
            return out;
        }
        const Vec step = lu.solve(f);
        double alpha = 1.0;
        bool decreased = false;
        Vec z_new = z;
        for (int halving = 0; halving <= 30; ++halving) {
            z_new = z;
            for (std::size_t c = 0; c < n; ++c) z_new[free_idx[c]] -= alpha * step[c];
            Vec f_new;
            try {
                f_new = residual(z_new);
            } catch (const std::exception&) {
                alpha *= 0.5;
                continue;
            }
            const double fn = norm2(f_new);
            if (fn < fnorm) {
                z = z_new;
                f = std::move(f_new);
                fnorm = fn;
                decreased = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!decreased) {
            out.status = SolveStatus::stalled;
            out.value = {slice(z, 0, n), slice(z, n, m), fnorm};
            out.message = "line search stalled at iterate " + std::to_string(it);
            return out;
        }
    }
    if (fnorm <= tol) {
        out.status = SolveStatus::converged;
        out.value = {slice(z, 0, n), slice(z, n, m), fnorm};
        return out;
    }
    out.status = SolveStatus::max_iterations;
    out.value = {slice(z, 0, n), slice(z, n, m), fnorm};
    out.message = "no convergence within " + std::to_string(max_iter) + " iterations";
    return out;
}

}  // namespace krasovskii
