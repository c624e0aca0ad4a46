#pragma once

// Passivity-based dynamic control on the extended system. The controller
//
//     -K1 etadot = K2 eta - u_c,      y_c = etadot,
//
// is passive with respect to etadot^T u_c with storage eta^T K2 eta / 2.
// Closing the loop identifies the controller state with the setpoint error
// eta = u* - u, feeds back u_c = h(x, u) - nu, and drives the input
// integrator with u_d = udot = -etadot. Along closed-loop trajectories
//
//     Sdot_d = (1/2) f^T Q_g0 f - |u_d|^2_K1 + u_d^T nu <= u_d^T nu,
//
// so the loop is dissipative with respect to u_d^T nu, and with nu = 0 the
// combined storage S_d decreases until the invariant set where both
// f^T Q_g0 f and K2 (u* - u) - h vanish.
//
// Also here: the skew interconnection of two certified systems through their
// input integrators, which preserves the dissipation inequality for the
// summed storage.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"
#include "krasovskii/passivity.hpp"
#include "krasovskii/signal.hpp"

namespace krasovskii {

struct KrasovskiiController {
    Mat K1;           // p x p symmetric positive definite
    Mat K2;           // p x p symmetric positive definite
    Vec u_star;       // input setpoint (p entries)
    InputSignal nu;   // external input (defaults to zero)

    std::size_t dim() const { return u_star.size(); }
};

/// Validating factory: both gain matrices must be symmetric positive definite.
inline KrasovskiiController make_controller(Mat K1, Mat K2, Vec u_star, InputSignal nu = {}) {
    const std::size_t p = u_star.size();
    if (K1.rows() != p || K1.cols() != p || K2.rows() != p || K2.cols() != p)
        throw DimensionError("controller gains must be p x p with p = setpoint dimension");
    if (!is_symmetric(K1, 1e-12) || !is_symmetric(K2, 1e-12))
        throw Error("controller gains must be symmetric");
    if (min_eigenvalue(K1) <= 0.0 || min_eigenvalue(K2) <= 0.0)
        throw Error("controller gains must be positive definite");
    if (nu.dim() == 0) nu = InputSignal::zero(p);
    if (nu.dim() != p) throw DimensionError("external input dimension mismatch");
    return KrasovskiiController{std::move(K1), std::move(K2), std::move(u_star), std::move(nu)};
}

/// Controller output y_c = etadot = -K1^{-1} (K2 eta - u_c).
inline Vec controller_output(const KrasovskiiController& ctrl, const Vec& eta, const Vec& u_c) {
    if (eta.size() != ctrl.dim() || u_c.size() != ctrl.dim())
        throw DimensionError("controller_output: dimension mismatch");
    return lu_solve(ctrl.K1, u_c - ctrl.K2 * eta);
}

/// Controller storage S_c = eta^T K2 eta / 2.
inline double controller_storage(const KrasovskiiController& ctrl, const Vec& eta) {
    if (eta.size() != ctrl.dim()) throw DimensionError("controller_storage: dimension mismatch");
    return 0.5 * dot(eta, ctrl.K2 * eta);
}

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

struct ClosedLoopSystem {
    ExtendedSystem plant;
    StorageMetric metric;  // positive definite
    KrasovskiiController controller;
    Equilibrium target;  // (x*, u*)
    Mat K1_inv;          // cached for the integration hot path

    std::size_t state_dim() const { return plant.state_dim(); }

    /// Input-integrator drive: u_d = -etadot with eta = u* - u and
    /// u_c = h(x, u) - nu(t).
    Vec input_rate(double t, const Vec& x, const Vec& u) const {
        const Vec eta = controller.u_star - u;
        const Vec u_c = supply_output(plant.base, metric, x, u) - controller.nu(t);
        return K1_inv * (controller.K2 * eta - u_c);
    }

    /// Closed-loop vector field over z = (x, u).
    Vec eval(double t, const Vec& z) const {
        auto [x, u] = plant.split(z);
        return concat(eval_vector_field(plant.base, x, u), input_rate(t, x, u));
    }

    double storage(const Vec& x, const Vec& u) const {
        return krasovskii::storage(plant.base, metric, x, u) +
               controller_storage(controller, controller.u_star - u);
    }
};

/// Wire the controller to the extended plant. The metric must be positive
/// definite (it doubles as the Lyapunov candidate) and (x*, u*) must be a
/// forced equilibrium to residual 1e-10.
inline ClosedLoopSystem close_loop(ExtendedSystem plant, StorageMetric metric,
                                   KrasovskiiController ctrl, Equilibrium target) {
    if (!metric.positive_definite)
        throw Error("close_loop: storage metric must be positive definite for Lyapunov use");
    if (ctrl.dim() != plant.input_dim())
        throw DimensionError("close_loop: controller dimension must match the plant input");
    if (target.x.size() != plant.base.n || target.u.size() != plant.base.m)
        throw DimensionError("close_loop: equilibrium dimension mismatch");
    const double resid = norm2(eval_vector_field(plant.base, target.x, target.u));
    if (resid > 1e-10)
        throw Error("close_loop: (x*, u*) is not an equilibrium (residual " +
                    format_g17(resid) + ")");
    Mat k1_inv = inverse(ctrl.K1);
    ClosedLoopSystem cl{std::move(plant), std::move(metric), std::move(ctrl), std::move(target),
                        std::move(k1_inv)};
    return cl;
}

inline double closed_loop_storage(const ClosedLoopSystem& cl, const Vec& x, const Vec& u) {
    return cl.storage(x, u);
}

struct InvariantSetResidual {
    double drift_quadratic = 0.0;  // f^T Q_g0 f
    Vec gain_gap;                  // K2 (u* - u) - h
};

/// Distance-to-invariant-set diagnostics: both components vanish exactly on
/// the set where the closed-loop storage derivative is zero.
inline InvariantSetResidual invariant_set_residual(const ClosedLoopSystem& cl, const Vec& x,
                                                   const Vec& u) {
    const Vec f = eval_vector_field(cl.plant.base, x, u);
    const Mat jac = eval_jacobians(cl.plant.base, x).drift;
    const Mat qg0 = cl.metric.Q * jac + jac.transposed() * cl.metric.Q;
    InvariantSetResidual r;
    r.drift_quadratic = dot(f, qg0 * f);
    r.gain_gap = cl.controller.K2 * (cl.controller.u_star - u) -
                 supply_output(cl.plant.base, cl.metric, x, u);
    return r;
}

// ---------------------------------------------------------------------------
// Interconnection of two certified systems
// ---------------------------------------------------------------------------

/// Two systems joined through their input integrators by the skew coupling
///     u_d1 = -h_2 + e_1,    u_d2 = +h_1 + e_2,
/// with external drives (e_1, e_2). The summed storage satisfies
/// Sdot <= e_1^T h_1 + e_2^T h_2 along trajectories.
struct JointSystem {
    InputAffineSystem system;  // state (x1, u1, x2, u2), input (e_1, e_2)
    StorageMetric metric;      // blkdiag(Q1, Q2), acting on the stacked plant fields
    InputAffineSystem first, second;
    StorageMetric metric_first, metric_second;
    std::size_t n1 = 0, n2 = 0, m = 0;

    struct Parts {
        Vec x1, u1, x2, u2;
    };

    Parts split(const Vec& z) const {
        if (z.size() != n1 + n2 + 2 * m) throw DimensionError("joint state dimension mismatch");
        return {slice(z, 0, n1), slice(z, n1, m), slice(z, n1 + m, n2),
                slice(z, n1 + m + n2, m)};
    }

    double storage(const Vec& z) const {
        const Parts p = split(z);
        return krasovskii::storage(first, metric_first, p.x1, p.u1) +
               krasovskii::storage(second, metric_second, p.x2, p.u2);
    }

    Vec supply_first(const Vec& z) const {
        const Parts p = split(z);
        return supply_output(first, metric_first, p.x1, p.u1);
    }

    Vec supply_second(const Vec& z) const {
        const Parts p = split(z);
        return supply_output(second, metric_second, p.x2, p.u2);
    }
};

/// Compose two systems with equal input dimension through the skew coupling.
/// Pass the systems' passivity certificates when available; a failed
/// certificate is rejected since the joint dissipation inequality then has
/// no basis.
inline JointSystem interconnect(const InputAffineSystem& sys1, const StorageMetric& q1,
                                const InputAffineSystem& sys2, const StorageMetric& q2,
                                const PassivityCertificate* cert1 = nullptr,
                                const PassivityCertificate* cert2 = nullptr) {
    if (sys1.m != sys2.m)
        throw DimensionError("interconnect: systems must share the input dimension");
    if (q1.Q.rows() != sys1.n || q2.Q.rows() != sys2.n)
        throw DimensionError("interconnect: metric dimension mismatch");
    if (cert1 && !cert1->pass)
        throw Error("interconnect: first system's passivity certificate failed");
    if (cert2 && !cert2->pass)
        throw Error("interconnect: second system's passivity certificate failed");

    JointSystem joint;
    joint.first = sys1;
    joint.second = sys2;
    joint.metric_first = q1;
    joint.metric_second = q2;
    joint.n1 = sys1.n;
    joint.n2 = sys2.n;
    joint.m = sys1.m;
    joint.metric = StorageMetric(block_diag(q1.Q, q2.Q));

    const std::size_t n1 = sys1.n, n2 = sys2.n, m = sys1.m;
    const std::size_t dim = n1 + n2 + 2 * m;
    const InputAffineSystem s1 = sys1, s2 = sys2;
    const StorageMetric m1 = q1, m2 = q2;

    InputAffineSystem& sys = joint.system;
    sys.n = dim;
    sys.m = 2 * m;
    sys.meta.name = sys1.meta.name + "+" + sys2.meta.name;
    for (std::size_t i = 0; i < n1; ++i)
        sys.meta.state_labels.push_back("a_" + (i < s1.meta.state_labels.size()
                                                    ? s1.meta.state_labels[i]
                                                    : std::to_string(i + 1)));
    for (std::size_t i = 0; i < m; ++i)
        sys.meta.state_labels.push_back("a_" + (i < s1.meta.input_labels.size()
                                                    ? s1.meta.input_labels[i]
                                                    : std::to_string(i + 1)));
    for (std::size_t i = 0; i < n2; ++i)
        sys.meta.state_labels.push_back("b_" + (i < s2.meta.state_labels.size()
                                                    ? s2.meta.state_labels[i]
                                                    : std::to_string(i + 1)));
    for (std::size_t i = 0; i < m; ++i)
        sys.meta.state_labels.push_back("b_" + (i < s2.meta.input_labels.size()
                                                    ? s2.meta.input_labels[i]
                                                    : std::to_string(i + 1)));
    sys.meta.input_labels = default_labels("e", 2 * m);

    sys.drift = [s1, s2, m1, m2, n1, n2, m](const Vec& z) {
        const Vec x1 = slice(z, 0, n1), u1 = slice(z, n1, m);
        const Vec x2 = slice(z, n1 + m, n2), u2 = slice(z, n1 + m + n2, m);
        const Vec h1 = supply_output(s1, m1, x1, u1);
        const Vec h2 = supply_output(s2, m2, x2, u2);
        Vec out = eval_vector_field(s1, x1, u1);
        out = concat(out, -h2);
        out = concat(out, eval_vector_field(s2, x2, u2));
        out = concat(out, h1);
        return out;
    };
    Mat g(dim, 2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        g(n1 + i, i) = 1.0;                     // e_1 drives u1
        g(n1 + m + n2 + i, m + i) = 1.0;        // e_2 drives u2
    }
    sys.input_maps = [g](const Vec&) { return g; };
    if (sys1.domain || sys2.domain) {
        auto d1 = sys1.domain, d2 = sys2.domain;
        sys.domain = [d1, d2, n1, n2, m](const Vec& z) {
            if (d1 && !d1(slice(z, 0, n1))) return false;
            if (d2 && !d2(slice(z, n1 + m, n2))) return false;
            return true;
        };
    }
    return joint;
}

}  // namespace krasovskii
