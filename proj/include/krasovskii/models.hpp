#pragma once

// Worked circuit models in every representation the toolkit supports:
//  - averaged DC-DC boost converter (input-affine + port-Hamiltonian),
//  - parallel RLC circuit with a ZIP load (input-affine + gradient form).
//
// Shipped default parameters are desk-scale values chosen so that all
// checks and simulations run in milliseconds; every value can be overridden.

#include <cmath>
#include <string>

#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/forms.hpp"
#include "krasovskii/linalg.hpp"

namespace krasovskii {

// ---------------------------------------------------------------------------
// Boost converter (averaged model)
// ---------------------------------------------------------------------------

/// Averaged boost converter:
///     L Idot = -R I - (1 - u) V + Vs
///     C Vdot =  (1 - u) I - G V
/// with duty ratio u in [0, 1].
struct BoostParams {
    double L = 0.01;   // inductance [H]
    double C = 0.001;  // capacitance [F]
    double R = 0.5;    // series resistance [Ohm]
    double G = 0.04;   // load conductance [S]
    double Vs = 12.0;  // source voltage [V]

    void validate() const {
        if (L <= 0 || C <= 0 || R <= 0 || G <= 0 || Vs <= 0)
            throw DomainError("boost parameters must all be strictly positive");
    }
};

struct BoostModel {
    BoostParams params;
    InputAffineSystem system;
    PortHamiltonianForm ph;
};

/// Build both representations of the boost converter. They agree pointwise:
/// the port-Hamiltonian interconnection splits as J(u) = J0 + J1 u with
///     J0 = [[0, -1/(LC)], [1/(LC), 0]],   J1 = -J0,
///     R  = diag(R/L^2, G/C^2),  G u_s = (Vs/L, 0),  H = (L I^2 + C V^2)/2,
/// which reproduces the averaged equations exactly.
inline BoostModel boost_converter(const BoostParams& p = {}) {
    p.validate();
    BoostModel model;
    model.params = p;

    const double L = p.L, C = p.C, R = p.R, G = p.G, Vs = p.Vs;

    InputAffineSystem& sys = model.system;
    sys.n = 2;
    sys.m = 1;
    sys.meta.name = "boost";
    sys.meta.state_labels = {"I", "V"};
    sys.meta.input_labels = {"duty"};
    sys.meta.state_units = {"A", "V"};
    sys.meta.input_units = {""};
    sys.drift = [=](const Vec& x) {
        const double I = x[0], V = x[1];
        return Vec{(-R * I - V + Vs) / L, (I - G * V) / C};
    };
    sys.input_maps = [=](const Vec& x) {
        const double I = x[0], V = x[1];
        Mat g(2, 1);
        g(0, 0) = V / L;
        g(1, 0) = -I / C;
        return g;
    };
    sys.jac_drift = [=](const Vec&) {
        return Mat{{-R / L, -1.0 / L}, {1.0 / C, -G / C}};
    };
    sys.jac_inputs = [=](const Vec&) {
        return std::vector<Mat>{Mat{{0.0, 1.0 / L}, {-1.0 / C, 0.0}}};
    };

    PortHamiltonianForm& ph = model.ph;
    const double w = 1.0 / (L * C);
    ph.J0 = Mat{{0.0, -w}, {w, 0.0}};
    ph.J = {Mat{{0.0, w}, {-w, 0.0}}};
    ph.R = Mat::diag({R / (L * L), G / (C * C)});
    ph.G = Mat{{1.0 / L}, {0.0}};
    ph.u_s = {Vs};
    ph.hamiltonian = [=](const Vec& x) {
        return 0.5 * (L * x[0] * x[0] + C * x[1] * x[1]);
    };
    ph.grad_hamiltonian = [=](const Vec& x) { return Vec{L * x[0], C * x[1]}; };
    ph.hess_hamiltonian = [=](const Vec&) { return Mat::diag({L, C}); };
    ph.meta = sys.meta;
    return model;
}

/// Forced equilibrium of the boost converter at a desired output voltage.
/// Both roots of the duty-ratio quadratic are reported; the selected branch
/// is the one with the larger switch complement a = 1 - u (smaller duty
/// ratio, the efficient operating branch).
struct BoostEquilibrium {
    Equilibrium eq;            // (I*, V*), u*
    double duty;               // selected u*
    double duty_alternate;     // other root
    double complement;           // a = 1 - u* (selected)
    double complement_alternate; // other root's a
};

inline BoostEquilibrium boost_equilibrium(const BoostParams& p, double V_star) {
    p.validate();
    if (!(V_star > p.Vs))
        throw DomainError("boost setpoint must exceed the source voltage (boost regime)");
    // (1-u) I = G V*,  R I + (1-u) V* = Vs  =>  V* a^2 - Vs a + R G V* = 0
    const double a2 = V_star, a1 = -p.Vs, a0 = p.R * p.G * V_star;
    double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc < 0.0 && disc > -1e-12 * p.Vs * p.Vs) disc = 0.0;  // double-root boundary
    if (disc < 0.0)
        throw DomainError("boost setpoint infeasible: duty-ratio quadratic has no real root");
    const double sq = std::sqrt(disc);
    const double a_large = (p.Vs + sq) / (2.0 * V_star);
    const double a_small = (p.Vs - sq) / (2.0 * V_star);

    BoostEquilibrium out;
    out.complement = a_large;
    out.complement_alternate = a_small;
    out.duty = 1.0 - a_large;
    out.duty_alternate = 1.0 - a_small;
    if (out.duty < 0.0 || out.duty > 1.0)
        throw DomainError("boost setpoint outside operating regime: duty ratio not in [0, 1]");

    const double I_star = p.G * V_star / a_large;
    out.eq.x = {I_star, V_star};
    out.eq.u = {out.duty};
    const BoostModel model = boost_converter(p);
    out.eq.residual_norm = norm2(eval_vector_field(model.system, out.eq.x, out.eq.u));
    return out;
}

// ---------------------------------------------------------------------------
// Parallel RLC circuit with ZIP load
// ---------------------------------------------------------------------------

/// Parallel RLC circuit with constant-impedance (G), constant-power (P_load)
/// and constant-current (I_s) load:
///     -L Idot = R I + V - u
///      C Vdot = I - G V - P_load / V - I_s
/// valid for V > 0.
struct RlcZipParams {
    double L = 0.01;      // inductance [H]
    double C = 0.001;     // capacitance [F]
    double R = 0.5;       // series resistance [Ohm]
    double G = 0.04;      // load conductance [S]
    double P_load = 0.1;  // constant-power load [W]
    double I_s = 0.2;     // constant-current load [A]
    double V_min = 1e-9;  // domain floor keeping ln(V) and P/V regular

    void validate() const {
        if (L <= 0 || C <= 0 || R <= 0 || G <= 0 || P_load <= 0 || I_s <= 0)
            throw DomainError("RLC-ZIP parameters must all be strictly positive");
    }
};

struct RlcZipModel {
    RlcZipParams params;
    InputAffineSystem system;
    GradientForm gradient;
};

/// Build both representations of the RLC-ZIP circuit. Gradient form:
///     D = diag(-L, C),  B = (-1, 0)^T,
///     P(I, V) = R I^2 / 2 + I V - G V^2 / 2 - P_load ln V - I_s V,
/// so that D xdot = dP/dx + B u reproduces the circuit equations exactly.
inline RlcZipModel parallel_rlc_zip(const RlcZipParams& p = {}) {
    p.validate();
    RlcZipModel model;
    model.params = p;

    const double L = p.L, C = p.C, R = p.R, G = p.G, Pl = p.P_load, Is = p.I_s;
    const double V_min = p.V_min;
    auto check_domain = [V_min](const Vec& x) {
        if (!(x[1] >= V_min))
            throw DomainError("RLC-ZIP evaluated at V = " + std::to_string(x[1]) +
                              " outside the valid domain V > 0");
    };

    InputAffineSystem& sys = model.system;
    sys.n = 2;
    sys.m = 1;
    sys.meta.name = "rlc_zip";
    sys.meta.state_labels = {"I", "V"};
    sys.meta.input_labels = {"u"};
    sys.meta.state_units = {"A", "V"};
    sys.meta.input_units = {"V"};
    sys.domain = [V_min](const Vec& x) { return x[1] >= V_min; };
    sys.drift = [=](const Vec& x) {
        check_domain(x);
        const double I = x[0], V = x[1];
        return Vec{(-R * I - V) / L, (I - G * V - Pl / V - Is) / C};
    };
    sys.input_maps = [=](const Vec&) {
        Mat g(2, 1);
        g(0, 0) = 1.0 / L;
        return g;
    };
    sys.jac_drift = [=](const Vec& x) {
        check_domain(x);
        const double V = x[1];
        return Mat{{-R / L, -1.0 / L}, {1.0 / C, (-G + Pl / (V * V)) / C}};
    };
    sys.jac_inputs = [=](const Vec&) { return std::vector<Mat>{Mat(2, 2)}; };

    GradientForm& grad = model.gradient;
    grad.D = Mat::diag({-L, C});
    grad.B = Mat{{-1.0}, {0.0}};
    grad.potential = [=](const Vec& x) {
        check_domain(x);
        const double I = x[0], V = x[1];
        return 0.5 * R * I * I + I * V - 0.5 * G * V * V - Pl * std::log(V) - Is * V;
    };
    grad.grad_potential = [=](const Vec& x) {
        check_domain(x);
        const double I = x[0], V = x[1];
        return Vec{R * I + V, I - G * V - Pl / V - Is};
    };
    grad.hess_potential = [=](const Vec& x) {
        check_domain(x);
        const double V = x[1];
        return Mat{{R, 1.0}, {1.0, -G + Pl / (V * V)}};
    };
    grad.domain = sys.domain;
    grad.meta = sys.meta;
    return model;
}

/// Membership in the region where the RLC-ZIP circuit's drift condition
/// holds: G V^2 >= P_load (boundary included).
inline bool in_set_B(const RlcZipParams& p, const Vec& x) {
    const double V = x[1];
    return p.G * V * V >= p.P_load;
}

/// Voltage at which the drift-condition margin changes sign.
inline double set_B_boundary_voltage(const RlcZipParams& p) {
    return std::sqrt(p.P_load / p.G);
}

}  // namespace krasovskii
