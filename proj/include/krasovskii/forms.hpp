#pragma once

// Structured system representations: port-Hamiltonian and gradient
// (Brayton-Moser-type) forms, each convertible to the generic input-affine
// representation.

#include <cstddef>
#include <functional>
#include <vector>

#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"
#include "krasovskii/rng.hpp"

namespace krasovskii {

/// Port-Hamiltonian system with input-dependent interconnection:
///
///     xdot = (J0 + sum_i J_i u_i - R) dH/dx + G u_s
///
/// J0, J_i skew-symmetric, R symmetric positive semidefinite, u_s constant.
struct PortHamiltonianForm {
    Mat J0;
    std::vector<Mat> J;  // one skew matrix per input
    Mat R;
    Mat G;     // n x q source map
    Vec u_s;   // constant source vector

    std::function<double(const Vec&)> hamiltonian;
    std::function<Vec(const Vec&)> grad_hamiltonian;
    std::function<Mat(const Vec&)> hess_hamiltonian;

    SystemMetadata meta;

    std::size_t n() const { return J0.rows(); }
    std::size_t m() const { return J.size(); }

    Vec eval(const Vec& x, const Vec& u) const {
        if (u.size() != m()) throw DimensionError("port-Hamiltonian eval: input dimension mismatch");
        Mat structure = J0 - R;
        for (std::size_t i = 0; i < J.size(); ++i) structure += u[i] * J[i];
        Vec f = structure * grad_hamiltonian(x);
        if (!u_s.empty()) f = f + G * u_s;
        return f;
    }

    /// Input-affine view: g0 = (J0 - R) dH/dx + G u_s, g_i = J_i dH/dx.
    InputAffineSystem as_input_affine() const {
        InputAffineSystem sys;
        const PortHamiltonianForm self = *this;
        sys.n = n();
        sys.m = m();
        sys.drift = [self](const Vec& x) {
            Vec f = (self.J0 - self.R) * self.grad_hamiltonian(x);
            if (!self.u_s.empty()) f = f + self.G * self.u_s;
            return f;
        };
        sys.input_maps = [self](const Vec& x) {
            const Vec gh = self.grad_hamiltonian(x);
            Mat g(self.n(), self.m());
            for (std::size_t i = 0; i < self.m(); ++i) g.set_col(i, self.J[i] * gh);
            return g;
        };
        sys.jac_drift = [self](const Vec& x) { return (self.J0 - self.R) * self.hess_hamiltonian(x); };
        sys.jac_inputs = [self](const Vec& x) {
            const Mat hess = self.hess_hamiltonian(x);
            std::vector<Mat> jacs;
            jacs.reserve(self.m());
            for (const Mat& Ji : self.J) jacs.push_back(Ji * hess);
            return jacs;
        };
        sys.meta = meta;
        return sys;
    }
};

/// Check skew-symmetry of the interconnection matrices (1e-12), positive
/// semidefiniteness of R (min eigenvalue >= -1e-10), and nonnegativity of H
/// at seeded probes in the given box.
inline void validate_port_hamiltonian(const PortHamiltonianForm& phs, double probe_halfwidth = 1.0,
                                      std::size_t probes = 10, std::uint64_t seed = 20240901) {
    auto check_skew = [](const Mat& j, const char* what) {
        for (std::size_t a = 0; a < j.rows(); ++a)
            for (std::size_t b = 0; b < j.cols(); ++b)
                if (std::abs(j(a, b) + j(b, a)) > 1e-12)
                    throw Error(std::string(what) + " is not skew-symmetric");
    };
    check_skew(phs.J0, "J0");
    for (const Mat& Ji : phs.J) check_skew(Ji, "J_i");
    if (!is_symmetric(phs.R, 1e-12)) throw Error("R is not symmetric");
    if (min_eigenvalue(phs.R) < -1e-10) throw Error("R is not positive semidefinite");
    std::mt19937_64 gen(seed);
    Vec x(phs.n());
    for (std::size_t k = 0; k < probes; ++k) {
        for (double& xi : x) xi = uniform(gen, -probe_halfwidth, probe_halfwidth);
        if (phs.hamiltonian(x) < 0.0) throw Error("Hamiltonian is negative at a probe state");
    }
}

/// Gradient system with a nonsingular symmetric pseudo metric:
///
///     D xdot = dP/dx + B u.
struct GradientForm {
    Mat D;  // nonsingular symmetric pseudo metric
    Mat B;  // n x m constant input map

    std::function<double(const Vec&)> potential;
    std::function<Vec(const Vec&)> grad_potential;
    std::function<Mat(const Vec&)> hess_potential;

    std::function<bool(const Vec&)> domain;
    SystemMetadata meta;

    std::size_t n() const { return D.rows(); }
    std::size_t m() const { return B.cols(); }

    /// Right-hand side of the defining relation: D xdot = tilde_f(x, u).
    Vec covector_field(const Vec& x, const Vec& u) const {
        if (u.size() != m()) throw DimensionError("gradient eval: input dimension mismatch");
        return grad_potential(x) + B * u;
    }

    Vec eval(const Vec& x, const Vec& u) const {
        return lu_solve(D, covector_field(x, u));
    }

    /// Input-affine view: g0 = D^{-1} dP/dx, input matrix D^{-1} B.
    InputAffineSystem as_input_affine() const {
        InputAffineSystem sys;
        const Mat d_inv = inverse(D);
        const GradientForm self = *this;
        sys.n = n();
        sys.m = m();
        sys.drift = [self, d_inv](const Vec& x) { return d_inv * self.grad_potential(x); };
        const Mat g_const = d_inv * B;
        sys.input_maps = [g_const](const Vec&) { return g_const; };
        sys.jac_drift = [self, d_inv](const Vec& x) { return d_inv * self.hess_potential(x); };
        const std::size_t nn = n(), mm = m();
        sys.jac_inputs = [nn, mm](const Vec&) { return std::vector<Mat>(mm, Mat(nn, nn)); };
        sys.domain = domain;
        sys.meta = meta;
        return sys;
    }
};

inline void validate_gradient_form(const GradientForm& g) {
    if (!is_symmetric(g.D, 1e-12)) throw Error("pseudo metric D is not symmetric");
    auto lu = LuDecomposition::compute(g.D);
    if (lu.singular) throw Error("pseudo metric D is singular");
    if (g.B.rows() != g.n()) throw DimensionError("input map B has wrong row count");
}

}  // namespace krasovskii
