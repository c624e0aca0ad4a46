#pragma once

// Krasovskii-type storage and supply for input-affine systems,
//
//     S(x, u) = (1/2) f(x, u)^T Q f(x, u),      h(x, u) = g(x)^T Q f(x, u),
//
// together with sampled matrix-inequality certificates for the three
// structure classes (general input-affine, port-Hamiltonian, gradient) and a
// trajectory-level dissipation-inequality check.
//
// The certificates are pointwise conditions evaluated over a seeded sample of
// the operating region; each certificate records the worst observed margin so
// a pass is auditable rather than a bare boolean.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/forms.hpp"
#include "krasovskii/linalg.hpp"
#include "krasovskii/rng.hpp"
#include "krasovskii/trajectory.hpp"

namespace krasovskii {

// ---------------------------------------------------------------------------
// Storage metric
// ---------------------------------------------------------------------------

/// Symmetric positive semidefinite matrix defining the storage quadratic
/// form. `positive_definite` records whether the metric is also usable as a
/// Lyapunov candidate.
struct StorageMetric {
    Mat Q;
    double min_eig = 0.0;
    bool positive_definite = false;

    StorageMetric() = default;

    explicit StorageMetric(Mat q) : Q(std::move(q)) {
        if (Q.rows() != Q.cols()) throw DimensionError("storage metric must be square");
        if (!is_symmetric(Q, 1e-12)) throw Error("storage metric must be symmetric (1e-12)");
        min_eig = Q.rows() ? min_eigenvalue(Q) : 0.0;
        if (min_eig < -1e-10)
            throw Error("storage metric must be positive semidefinite (min eigenvalue " +
                        std::to_string(min_eig) + ")");
        positive_definite = min_eig > 1e-10;
    }
};

inline double storage(const InputAffineSystem& sys, const StorageMetric& metric, const Vec& x,
                      const Vec& u) {
    if (metric.Q.rows() != sys.n) throw DimensionError("storage: metric dimension mismatch");
    const Vec f = eval_vector_field(sys, x, u);
    return 0.5 * dot(f, metric.Q * f);
}

inline Vec supply_output(const InputAffineSystem& sys, const StorageMetric& metric, const Vec& x,
                         const Vec& u) {
    if (metric.Q.rows() != sys.n) throw DimensionError("supply_output: metric dimension mismatch");
    const Vec f = eval_vector_field(sys, x, u);
    const Mat g = sys.input_matrix(x);
    return g.transposed() * (metric.Q * f);
}

// ---------------------------------------------------------------------------
// Region sampling
// ---------------------------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Seeded uniform sampling of a state (and optionally input) box, with an
/// optional membership predicate. Emitted samples always satisfy both.
struct RegionSampler {
    std::vector<Interval> state_box;
    std::vector<Interval> input_box;  // may be empty; inputs then default to zero
    std::size_t count = 100;
    std::uint64_t seed = 0;
    std::function<bool(const Vec&)> predicate;  // state membership

    void validate() const {
        if (count == 0) throw Error("region sampler: sample count must be positive");
        for (const Interval& iv : state_box)
            if (!(iv.lo <= iv.hi)) throw Error("region sampler: state bounds must satisfy lo <= hi");
        for (const Interval& iv : input_box)
            if (!(iv.lo <= iv.hi)) throw Error("region sampler: input bounds must satisfy lo <= hi");
    }

    std::vector<Vec> states() const {
        validate();
        std::vector<Vec> out;
        out.reserve(count);
        std::mt19937_64 gen(seed);
        const std::size_t max_attempts = count * 1000 + 1000;
        std::size_t attempts = 0;
        while (out.size() < count) {
            if (++attempts > max_attempts)
                throw Error("region sampler: predicate rejected too many samples");
            Vec x(state_box.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = uniform(gen, state_box[i].lo, state_box[i].hi);
            if (predicate && !predicate(x)) continue;
            out.push_back(std::move(x));
        }
        return out;
    }

    std::vector<std::pair<Vec, Vec>> state_inputs() const {
        validate();
        std::vector<std::pair<Vec, Vec>> out;
        out.reserve(count);
        std::mt19937_64 gen(seed);
        const std::size_t max_attempts = count * 1000 + 1000;
        std::size_t attempts = 0;
        while (out.size() < count) {
            if (++attempts > max_attempts)
                throw Error("region sampler: predicate rejected too many samples");
            Vec x(state_box.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = uniform(gen, state_box[i].lo, state_box[i].hi);
            Vec u(input_box.size());
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] = uniform(gen, input_box[i].lo, input_box[i].hi);
            if (predicate && !predicate(x)) continue;
            out.emplace_back(std::move(x), std::move(u));
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

struct ConditionCheck {
    std::string condition;
    double worst_value = 0.0;  // worst observed margin (larger is worse)
    double tolerance = 0.0;
    bool pass = false;
    std::size_t samples = 0;
    Vec worst_state;  // sample attaining worst_value
};

struct PassivityCertificate {
    std::string label;
    std::vector<ConditionCheck> conditions;
    bool pass = false;
    std::uint64_t seed = 0;

    const ConditionCheck* find(const std::string& name) const {
        for (const auto& c : conditions)
            if (c.condition == name) return &c;
        return nullptr;
    }
};

inline PassivityCertificate make_certificate(std::string label, std::vector<ConditionCheck> checks,
                                             std::uint64_t seed) {
    PassivityCertificate cert;
    cert.label = std::move(label);
    cert.conditions = std::move(checks);
    cert.seed = seed;
    cert.pass = true;
    for (const auto& c : cert.conditions) cert.pass = cert.pass && c.pass;
    return cert;
}

/// Certify the two pointwise conditions for Krasovskii passivity of an
/// input-affine system over a sampled region:
///   - Q dg0/dx + (dg0/dx)^T Q negative semidefinite,
///   - Q dg_i/dx + (dg_i/dx)^T Q identically zero for every input column.
/// The supply output is then h = g^T Q f.
inline PassivityCertificate check_prop1(const InputAffineSystem& sys, const StorageMetric& metric,
                                        const RegionSampler& sampler, double tol_neg = 1e-9,
                                        double tol_zero = 1e-9) {
    if (metric.Q.rows() != sys.n) throw DimensionError("check_prop1: metric dimension mismatch");
    if (sampler.state_box.size() != sys.n)
        throw DimensionError("check_prop1: sampler state box dimension mismatch");

    ConditionCheck drift{"drift_lmi_max_eig", -std::numeric_limits<double>::infinity(), tol_neg,
                         false, 0, {}};
    ConditionCheck inputs{"input_lmi_max_abs", 0.0, tol_zero, false, 0, {}};

    const auto samples = sampler.states();
    for (const Vec& x : samples) {
        JacobianSet jac;
        try {
            jac = eval_jacobians(sys, x);
        } catch (const std::exception& e) {
            std::string where;
            for (double v : x) where += " " + format_g17(v);
            throw DomainError("check_prop1: Jacobian evaluation failed at sample [" + where +
                              " ]: " + e.what());
        }
        const Mat qg0 = metric.Q * jac.drift + jac.drift.transposed() * metric.Q;
        const double eig = max_eigenvalue(qg0);
        if (eig > drift.worst_value) {
            drift.worst_value = eig;
            drift.worst_state = x;
        }
        ++drift.samples;
        double worst_entry = 0.0;
        for (std::size_t i = 0; i < sys.m; ++i) {
            const Mat qgi = metric.Q * jac.inputs[i] + jac.inputs[i].transposed() * metric.Q;
            worst_entry = std::max(worst_entry, max_abs(qgi));
        }
        if (sys.m > 0) {
            if (worst_entry > inputs.worst_value) {
                inputs.worst_value = worst_entry;
                inputs.worst_state = x;
            }
            ++inputs.samples;
        }
    }
    drift.pass = drift.worst_value <= tol_neg;
    inputs.pass = sys.m == 0 || inputs.worst_value <= tol_zero;
    if (sys.m == 0) inputs.samples = samples.size();

    return make_certificate("input_affine", {drift, inputs}, sampler.seed);
}

/// True when the Hamiltonian Hessian is constant across seeded probes
/// (max entry deviation <= tol).
inline bool hessian_is_constant(const PortHamiltonianForm& phs, double probe_halfwidth = 1.0,
                                std::size_t probes = 10, double tol = 1e-9,
                                std::uint64_t seed = 20240902) {
    std::mt19937_64 gen(seed);
    const Mat base = phs.hess_hamiltonian(Vec(phs.n(), 0.0));
    Vec x(phs.n());
    for (std::size_t k = 0; k < probes; ++k) {
        for (double& xi : x) xi = uniform(gen, -probe_halfwidth, probe_halfwidth);
        if (max_abs(phs.hess_hamiltonian(x) - base) > tol) return false;
    }
    return true;
}

/// Structure-level certificate for a port-Hamiltonian system:
///   - Q (J0 - R) H'' + H'' (-J0 - R) Q negative semidefinite,
///   - Q J_i H'' - H'' J_i Q identically zero.
/// These are the input-affine conditions expressed through the structure
/// matrices (dg0/dx = (J0 - R) H'', dg_i/dx = J_i H'').
inline PassivityCertificate check_ph(const PortHamiltonianForm& phs, const StorageMetric& metric,
                                     const RegionSampler& sampler, double tol_neg = 1e-9,
                                     double tol_zero = 1e-9) {
    if (metric.Q.rows() != phs.n()) throw DimensionError("check_ph: metric dimension mismatch");

    ConditionCheck drift{"ph_drift_lmi_max_eig", -std::numeric_limits<double>::infinity(), tol_neg,
                         false, 0, {}};
    ConditionCheck inputs{"ph_input_lmi_max_abs", 0.0, tol_zero, false, 0, {}};

    // With a constant Hessian both conditions are state-independent; one
    // evaluation suffices.
    std::vector<Vec> samples;
    if (hessian_is_constant(phs))
        samples = {Vec(phs.n(), 0.0)};
    else
        samples = sampler.states();

    const Mat neg_j0_r = (-1.0) * phs.J0 - phs.R;
    for (const Vec& x : samples) {
        const Mat hess = phs.hess_hamiltonian(x);
        const Mat cond1 = metric.Q * (phs.J0 - phs.R) * hess + hess * neg_j0_r * metric.Q;
        const double eig = max_eigenvalue(cond1);
        if (eig > drift.worst_value) {
            drift.worst_value = eig;
            drift.worst_state = x;
        }
        ++drift.samples;
        double worst_entry = 0.0;
        for (const Mat& Ji : phs.J) {
            const Mat cond2 = metric.Q * Ji * hess - hess * Ji * metric.Q;
            worst_entry = std::max(worst_entry, max_abs(cond2));
        }
        if (!phs.J.empty()) {
            if (worst_entry >= inputs.worst_value) {
                inputs.worst_value = worst_entry;
                inputs.worst_state = x;
            }
            ++inputs.samples;
        }
    }
    drift.pass = drift.worst_value <= tol_neg;
    inputs.pass = phs.J.empty() || inputs.worst_value <= tol_zero;
    if (phs.J.empty()) inputs.samples = samples.size();

    return make_certificate("port_hamiltonian", {drift, inputs}, sampler.seed);
}

/// Overload for the constant-Hessian case, where no sampler is needed.
inline PassivityCertificate check_ph(const PortHamiltonianForm& phs, const StorageMetric& metric,
                                     double tol_neg = 1e-9, double tol_zero = 1e-9) {
    if (!hessian_is_constant(phs))
        throw NotApplicableError(
            "check_ph without a sampler requires a constant Hamiltonian Hessian");
    RegionSampler trivial;
    trivial.state_box.assign(phs.n(), Interval{0.0, 0.0});
    trivial.count = 1;
    return check_ph(phs, metric, trivial, tol_neg, tol_zero);
}

/// Canonical metric for a port-Hamiltonian system with constant Hessian:
/// Q = H'' (any positive multiple works equally).
inline StorageMetric auto_metric_ph(const PortHamiltonianForm& phs) {
    if (!hessian_is_constant(phs))
        throw NotApplicableError(
            "auto metric requires a constant Hamiltonian Hessian (checked at 10 probes, 1e-9)");
    return StorageMetric(phs.hess_hamiltonian(Vec(phs.n(), 0.0)));
}

struct GradientCheckResult {
    PassivityCertificate certificate;
    StorageMetric metric;  // Q = D M D, meaningful when the certificate passes

    // Supply evaluated both ways at a probe point: through the gradient
    // structure (B^T M tilde_f) and through the induced metric (g^T Q f).
    // The two routes agree for consistent sign conventions; both are
    // reported so discrepancies stay visible.
    Vec probe_state;
    Vec probe_input;
    Vec supply_gradient_route;
    Vec supply_metric_route;
};

/// Certificate for a gradient system: D M P'' + P'' M D negative
/// semidefinite over the sampled region. On a pass the storage metric is
/// Q = D M D and the supply is B^T M tilde_f.
inline GradientCheckResult check_gradient(const GradientForm& gsys, const Mat& gain_metric,
                                          const RegionSampler& sampler, double tol_neg = 1e-9) {
    if (!is_symmetric(gain_metric, 1e-12))
        throw Error("check_gradient: M must be symmetric");
    if (min_eigenvalue(gain_metric) < -1e-10)
        throw Error("check_gradient: M must be positive semidefinite");

    ConditionCheck cond{"gradient_lmi_max_eig", -std::numeric_limits<double>::infinity(), tol_neg,
                        false, 0, {}};
    const auto samples = sampler.states();
    for (const Vec& x : samples) {
        Mat hess;
        try {
            hess = gsys.hess_potential(x);
        } catch (const std::exception& e) {
            std::string where;
            for (double v : x) where += " " + format_g17(v);
            throw DomainError("check_gradient: Hessian evaluation failed at sample [" + where +
                              " ]: " + e.what());
        }
        const Mat c = gsys.D * gain_metric * hess + hess * gain_metric * gsys.D;
        const double eig = max_eigenvalue(c);
        if (eig > cond.worst_value) {
            cond.worst_value = eig;
            cond.worst_state = x;
        }
        ++cond.samples;
    }
    cond.pass = cond.worst_value <= tol_neg;

    GradientCheckResult out;
    out.certificate = make_certificate("gradient", {cond}, sampler.seed);
    out.metric = StorageMetric(gsys.D * gain_metric * gsys.D);

    out.probe_state = samples.front();
    out.probe_input = Vec(gsys.m(), 0.0);
    for (std::size_t i = 0; i < out.probe_input.size() && i < sampler.input_box.size(); ++i)
        out.probe_input[i] = 0.5 * (sampler.input_box[i].lo + sampler.input_box[i].hi);
    out.supply_gradient_route =
        gsys.B.transposed() * (gain_metric * gsys.covector_field(out.probe_state, out.probe_input));
    out.supply_metric_route =
        supply_output(gsys.as_input_affine(), out.metric, out.probe_state, out.probe_input);
    return out;
}

// ---------------------------------------------------------------------------
// Dissipation inequality along trajectories
// ---------------------------------------------------------------------------

struct DissipationReport {
    std::vector<double> residual;  // u_d^T h - dS/dt at each sample
    double min_residual = 0.0;     // over certified indices
    std::size_t min_index = 0;
    double max_storage = 0.0;  // max |S| along the trajectory
    double tolerance = 0.0;    // absolute: rel_tol * max(1e-300, max_storage)
    bool pass = false;
    std::vector<std::size_t> violations;  // certified indices below -tolerance
    std::vector<std::size_t> excluded;    // endpoints, kinks, kink windows
};

/// Residual r(t_k) = u_d(t_k)^T h(t_k) - dS/dt(t_k) from recorded channels.
/// dS/dt uses centered differences at interior points and one-sided
/// differences at the ends. Endpoints are excluded from pass/fail, as are
/// samples with |k - kink| < kink_window around each input switch: S is not
/// differentiable at a switch, and for stiff dynamics the first few samples
/// after one sit in a boundary layer where centered differencing misreads
/// the slope.
inline DissipationReport dissipation_residual_from_channels(
    const std::vector<double>& times, const std::vector<double>& storage_series,
    const std::vector<Vec>& rates, const std::vector<Vec>& supply_series,
    const std::vector<std::size_t>& kinks, double rel_tol = 1e-6, std::size_t kink_window = 1) {
    const std::size_t count = times.size();
    if (count < 3) throw Error("dissipation residual needs at least three samples");
    if (storage_series.size() != count || rates.size() != count || supply_series.size() != count)
        throw DimensionError("dissipation residual: channel lengths differ");
    const double h = times[1] - times[0];

    DissipationReport rep;
    rep.residual.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        double dsdt;
        if (k == 0)
            dsdt = (storage_series[1] - storage_series[0]) / h;
        else if (k + 1 == count)
            dsdt = (storage_series[count - 1] - storage_series[count - 2]) / h;
        else
            dsdt = (storage_series[k + 1] - storage_series[k - 1]) / (2.0 * h);
        rep.residual[k] = dot(rates[k], supply_series[k]) - dsdt;
        rep.max_storage = std::max(rep.max_storage, std::abs(storage_series[k]));
    }

    std::vector<bool> skip(count, false);
    skip[0] = skip[count - 1] = true;
    for (std::size_t kink : kinks)
        for (std::size_t d = 0; d < kink_window; ++d) {
            if (kink + d < count) skip[kink + d] = true;
            if (kink >= d) skip[kink - d] = true;
        }
    for (std::size_t k = 0; k < count; ++k)
        if (skip[k]) rep.excluded.push_back(k);

    rep.tolerance = rel_tol * std::max(1e-300, rep.max_storage);
    rep.min_residual = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
        if (skip[k]) continue;
        if (rep.residual[k] < rep.min_residual) {
            rep.min_residual = rep.residual[k];
            rep.min_index = k;
        }
        if (rep.residual[k] < -rep.tolerance) rep.violations.push_back(k);
    }
    rep.pass = rep.violations.empty();
    return rep;
}

/// Dissipation residual for a recorded extended-system trajectory: u_d comes
/// from the trajectory record; supply and storage are recomputed from
/// states/inputs under the given metric unless the trajectory already
/// carries channels recorded under exactly that metric (they are recomputable
/// from the same formulas, so reuse is lossless).
inline DissipationReport dissipation_residual(const Trajectory& traj,
                                              const InputAffineSystem& sys,
                                              const StorageMetric& metric, double rel_tol = 1e-6,
                                              std::size_t kink_window = 1) {
    if (traj.input_rates.empty())
        throw Error("dissipation residual requires a trajectory with recorded input rates");
    const std::size_t count = traj.size();
    const bool same_metric = traj.metric.rows() == metric.Q.rows() &&
                             traj.metric.cols() == metric.Q.cols() &&
                             max_abs(traj.metric - metric.Q) == 0.0;
    if (same_metric && traj.storage.size() == count && traj.supply.size() == count)
        return dissipation_residual_from_channels(traj.times, traj.storage, traj.input_rates,
                                                  traj.supply, traj.input_kinks, rel_tol,
                                                  kink_window);
    std::vector<double> s(count);
    std::vector<Vec> h(count);
    for (std::size_t k = 0; k < count; ++k) {
        s[k] = storage(sys, metric, traj.states[k], traj.inputs[k]);
        h[k] = supply_output(sys, metric, traj.states[k], traj.inputs[k]);
    }
    return dissipation_residual_from_channels(traj.times, s, traj.input_rates, h,
                                              traj.input_kinks, rel_tol, kink_window);
}

}  // namespace krasovskii
