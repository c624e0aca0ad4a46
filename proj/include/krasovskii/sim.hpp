#pragma once

// Deterministic fixed-step RK4 integration with trajectory recording.
//
// Grid times are k * h computed by multiplication, never by accumulation, so
// reruns are bit-identical and schedule switch times that are exact grid
// multiples land on their index. The applied input is fetched once per step
// and held across the four stages: each step then integrates the
// constant-input dynamics to full fourth order, and input discontinuities
// sit exactly on grid nodes.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "krasovskii/control.hpp"
#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"
#include "krasovskii/passivity.hpp"
#include "krasovskii/rng.hpp"
#include "krasovskii/signal.hpp"
#include "krasovskii/trajectory.hpp"

namespace krasovskii {

struct SimConfig {
    double t_end = 1.0;
    double step = 1e-3;
    Vec initial_state;  // x0 (plant/closed loop) or joint state
    Vec initial_input;  // u0 for extended runs
    InputSignal input;  // u(t), u_d(t) or (e_1, e_2)(t) depending on the run
    double divergence_guard = 1e9;

    // Record every Nth step (grid stays uniform with spacing N * step).
    // Must divide the total step count.
    std::size_t record_stride = 1;

    void validate() const {
        if (!(step > 0.0)) throw Error("sim config: step must be positive");
        if (!(t_end >= step)) throw Error("sim config: t_end must be at least one step");
        if (record_stride == 0) throw Error("sim config: record stride must be positive");
        if (step_count() % record_stride != 0)
            throw Error("sim config: record stride must divide the step count");
    }

    std::size_t step_count() const {
        const auto n = static_cast<std::size_t>(std::llround(t_end / step));
        return n == 0 ? 1 : n;
    }
};

namespace detail {

inline void guard_state(const Vec& z, double t, double guard,
                        const std::function<bool(const Vec&)>& domain_ok) {
    for (double v : z) {
        if (!std::isfinite(v))
            throw SimulationError("non-finite state at t = " + format_g17(t));
        if (std::abs(v) > guard)
            throw SimulationError("divergence guard tripped at t = " + format_g17(t) +
                                  " (|state| > " + format_g17(guard) + ")");
    }
    if (domain_ok && !domain_ok(z))
        throw SimulationError("state left the declared domain at t = " + format_g17(t));
}

/// Classical RK4 with preallocated stage buffers; rhs_into(z, out) writes
/// the field value (the applied input is held fixed by the caller).
struct Rk4Workspace {
    Vec k1, k2, k3, k4, tmp;

    explicit Rk4Workspace(std::size_t dim)
        : k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim) {}

    template <typename RhsInto>
    void step(RhsInto&& rhs_into, double h, Vec& z) {
        const std::size_t dim = z.size();
        rhs_into(z, k1);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
        rhs_into(tmp, k2);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
        rhs_into(tmp, k3);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + h * k3[i];
        rhs_into(tmp, k4);
        for (std::size_t i = 0; i < dim; ++i)
            z[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
};

/// Map schedule switch times onto the recorded grid. A switch on a grid node
/// marks that index; one between nodes marks both neighbours (centered
/// differences across either are polluted).
inline std::vector<std::size_t> kink_indices(const InputSignal& signal, double record_step,
                                             std::size_t records) {
    std::vector<std::size_t> kinks;
    for (double ts : signal.switch_times()) {
        const double pos = ts / record_step;
        const double nearest = std::round(pos);
        if (std::abs(pos - nearest) < 1e-6) {
            const auto k = static_cast<std::size_t>(nearest);
            if (k > 0 && k < records) kinks.push_back(k);
        } else {
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            if (lo > 0 && lo < records) kinks.push_back(lo);
            if (lo + 1 < records) kinks.push_back(lo + 1);
        }
    }
    return kinks;
}

/// Shared integration loop: `advance` performs one RK4 step from step index
/// k, `record` appends the sample for time t.
template <typename Advance, typename Record>
void run_grid(const SimConfig& cfg, Advance&& advance, Record&& record) {
    const std::size_t steps = cfg.step_count();
    record(0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        advance(k);
        if ((k + 1) % cfg.record_stride == 0)
            record(static_cast<double>(k + 1) * cfg.step);
    }
}

}  // namespace detail

/// Grid-aligned random schedule: switch times are exact grid multiples of the
/// integration step so kink indices are unambiguous.
inline InputSignal random_piecewise_on_grid(std::size_t dim, double step,
                                            std::size_t steps_per_segment, std::size_t segments,
                                            double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<double> times(segments);
    std::vector<Vec> values(segments, Vec(dim));
    for (std::size_t k = 0; k < segments; ++k) {
        times[k] = static_cast<double>(k * steps_per_segment) * step;
        for (std::size_t i = 0; i < dim; ++i) values[k][i] = uniform(gen, lo, hi);
    }
    return InputSignal::piecewise_constant(std::move(times), std::move(values));
}

// ---------------------------------------------------------------------------
// Integrators
// ---------------------------------------------------------------------------

/// Integrate the plant under an input schedule u(t). When a metric is given,
/// storage and supply channels are recorded.
inline Trajectory integrate_plant(const InputAffineSystem& sys, const SimConfig& cfg,
                                  const StorageMetric* metric = nullptr) {
    cfg.validate();
    if (cfg.initial_state.size() != sys.n)
        throw DimensionError("integrate_plant: initial state dimension mismatch");
    if (cfg.input.dim() != sys.m) throw DimensionError("integrate_plant: input dimension mismatch");

    const double h = cfg.step;
    Trajectory traj;
    traj.state_labels = sys.meta.state_labels;
    traj.input_labels = sys.meta.input_labels;
    if (metric) traj.metric = metric->Q;
    traj.input_kinks = detail::kink_indices(cfg.input, h * cfg.record_stride,
                                            cfg.step_count() / cfg.record_stride);

    Vec x = cfg.initial_state;
    detail::guard_state(x, 0.0, cfg.divergence_guard, sys.domain);

    detail::Rk4Workspace ws(sys.n);
    detail::run_grid(
        cfg,
        [&](std::size_t k) {
            const double t = static_cast<double>(k) * h;
            const Vec& u = cfg.input(t);  // held over the step
            ws.step([&](const Vec& z, Vec& out) { out = eval_vector_field(sys, z, u); }, h, x);
            detail::guard_state(x, static_cast<double>(k + 1) * h, cfg.divergence_guard,
                                sys.domain);
        },
        [&](double t) {
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.inputs.push_back(cfg.input(t));
            if (metric) {
                traj.storage.push_back(storage(sys, *metric, x, traj.inputs.back()));
                traj.supply.push_back(supply_output(sys, *metric, x, traj.inputs.back()));
            }
        });
    return traj;
}

/// Integrate the extended system under an input-rate schedule u_d(t),
/// starting from (initial_state, initial_input). States and inputs are
/// recorded separately; input_rates records the applied schedule.
inline Trajectory integrate_extended(const ExtendedSystem& ext, const SimConfig& cfg,
                                     const StorageMetric* metric = nullptr) {
    cfg.validate();
    const std::size_t n = ext.base.n, m = ext.base.m;
    if (cfg.initial_state.size() != n)
        throw DimensionError("integrate_extended: initial state dimension mismatch");
    if (cfg.initial_input.size() != m)
        throw DimensionError("integrate_extended: initial input dimension mismatch");
    if (cfg.input.dim() != m)
        throw DimensionError("integrate_extended: input-rate dimension mismatch");

    const double h = cfg.step;
    Trajectory traj;
    traj.state_labels = ext.base.meta.state_labels;
    traj.input_labels = ext.base.meta.input_labels;
    if (metric) traj.metric = metric->Q;
    traj.input_kinks = detail::kink_indices(cfg.input, h * cfg.record_stride,
                                            cfg.step_count() / cfg.record_stride);

    auto domain_ok = ext.base.domain
                         ? std::function<bool(const Vec&)>([&ext](const Vec& z) {
                               return ext.base.domain(slice(z, 0, ext.base.n));
                           })
                         : std::function<bool(const Vec&)>{};

    Vec z = concat(cfg.initial_state, cfg.initial_input);
    detail::guard_state(z, 0.0, cfg.divergence_guard, domain_ok);

    detail::Rk4Workspace ws(n + m);
    Vec x_buf(n), u_buf(m);
    auto rhs_into = [&](const Vec& zz, const Vec& ud, Vec& out) {
        for (std::size_t i = 0; i < n; ++i) x_buf[i] = zz[i];
        for (std::size_t j = 0; j < m; ++j) u_buf[j] = zz[n + j];
        const Vec f = eval_vector_field(ext.base, x_buf, u_buf);
        for (std::size_t i = 0; i < n; ++i) out[i] = f[i];
        for (std::size_t j = 0; j < m; ++j) out[n + j] = ud[j];
    };
    detail::run_grid(
        cfg,
        [&](std::size_t k) {
            const double t = static_cast<double>(k) * h;
            const Vec& ud = cfg.input(t);  // held over the step
            ws.step([&](const Vec& zz, Vec& out) { rhs_into(zz, ud, out); }, h, z);
            detail::guard_state(z, static_cast<double>(k + 1) * h, cfg.divergence_guard,
                                domain_ok);
        },
        [&](double t) {
            traj.times.push_back(t);
            traj.states.push_back(slice(z, 0, n));
            traj.inputs.push_back(slice(z, n, m));
            traj.input_rates.push_back(cfg.input(t));
            if (metric) {
                // one field evaluation shared by both channels; accumulation
                // order matches storage() and supply_output() exactly
                const Vec& x = traj.states.back();
                const Vec& u = traj.inputs.back();
                const Vec f = eval_vector_field(ext.base, x, u);
                const Vec qf = metric->Q * f;
                traj.storage.push_back(0.5 * dot(f, qf));
                const Mat g = ext.base.input_matrix(x);
                Vec h(m);
                for (std::size_t i = 0; i < m; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += g(j, i) * qf[j];
                    h[i] = s;
                }
                traj.supply.push_back(std::move(h));
            }
        });
    return traj;
}

/// Integrate the closed loop over z = (x, u). The input schedule in the
/// config is ignored; the loop's external input nu lives in the controller.
/// Records S_K, h_K, S_d and the invariant-set residual channels.
inline Trajectory integrate_closed_loop(const ClosedLoopSystem& cl, const SimConfig& cfg) {
    cfg.validate();
    const std::size_t n = cl.plant.base.n, m = cl.plant.base.m;
    if (cfg.initial_state.size() != n)
        throw DimensionError("integrate_closed_loop: initial state dimension mismatch");
    if (cfg.initial_input.size() != m)
        throw DimensionError("integrate_closed_loop: initial input dimension mismatch");

    const double h = cfg.step;
    Trajectory traj;
    traj.state_labels = cl.plant.base.meta.state_labels;
    traj.input_labels = cl.plant.base.meta.input_labels;
    traj.metric = cl.metric.Q;
    traj.input_kinks = detail::kink_indices(cl.controller.nu, h * cfg.record_stride,
                                            cfg.step_count() / cfg.record_stride);

    auto domain_ok = cl.plant.base.domain
                         ? std::function<bool(const Vec&)>([&cl](const Vec& z) {
                               return cl.plant.base.domain(slice(z, 0, cl.plant.base.n));
                           })
                         : std::function<bool(const Vec&)>{};

    Vec z = concat(cfg.initial_state, cfg.initial_input);
    detail::guard_state(z, 0.0, cfg.divergence_guard, domain_ok);

    // Fused wiring evaluation with reused buffers; this loop runs for tens of
    // millions of steps when resolving the loop's slow mode.
    detail::Rk4Workspace ws(n + m);
    Vec x_buf(n), u_buf(m), qf(n), gap(m);
    auto rhs_into = [&](const Vec& zz, const Vec& nu, Vec& out) {
        for (std::size_t i = 0; i < n; ++i) x_buf[i] = zz[i];
        for (std::size_t j = 0; j < m; ++j) u_buf[j] = zz[n + j];
        Vec f = cl.plant.base.drift(x_buf);
        const Mat g = cl.plant.base.input_matrix(x_buf);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) f[i] += g(i, j) * u_buf[j];
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t k2 = 0; k2 < n; ++k2) s += cl.metric.Q(i, k2) * f[k2];
            qf[i] = s;
        }
        // gap = K2 (u* - u) - h + nu
        for (std::size_t j = 0; j < m; ++j) {
            double s = nu[j];
            for (std::size_t k2 = 0; k2 < m; ++k2)
                s += cl.controller.K2(j, k2) * (cl.controller.u_star[k2] - u_buf[k2]);
            for (std::size_t i = 0; i < n; ++i) s -= g(i, j) * qf[i];
            gap[j] = s;
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = f[i];
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k2 = 0; k2 < m; ++k2) s += cl.K1_inv(j, k2) * gap[k2];
            out[n + j] = s;
        }
    };
    detail::run_grid(
        cfg,
        [&](std::size_t k) {
            const double t = static_cast<double>(k) * h;
            const Vec& nu = cl.controller.nu(t);  // held over the step
            ws.step([&](const Vec& zz, Vec& out) { rhs_into(zz, nu, out); }, h, z);
            detail::guard_state(z, static_cast<double>(k + 1) * h, cfg.divergence_guard,
                                domain_ok);
        },
        [&](double t) {
            const Vec x = slice(z, 0, n), u = slice(z, n, m);
            traj.times.push_back(t);
            traj.states.push_back(x);
            traj.inputs.push_back(u);
            traj.input_rates.push_back(cl.input_rate(t, x, u));
            traj.storage.push_back(storage(cl.plant.base, cl.metric, x, u));
            traj.supply.push_back(supply_output(cl.plant.base, cl.metric, x, u));
            traj.loop_storage.push_back(cl.storage(x, u));
            const auto inv = invariant_set_residual(cl, x, u);
            traj.drift_lmi_residual.push_back(inv.drift_quadratic);
            traj.gain_residual.push_back(inv.gain_gap);
        });
    return traj;
}

/// Integrate an interconnection under external drives (e_1, e_2)(t).
/// Records the joint storage S_1 + S_2 and the stacked supplies (h_1, h_2);
/// the external drive plays the input-rate role.
inline Trajectory integrate_interconnection(const JointSystem& joint, const SimConfig& cfg) {
    cfg.validate();
    if (cfg.initial_state.size() != joint.system.n)
        throw DimensionError("integrate_interconnection: initial state dimension mismatch");
    if (cfg.input.dim() != joint.system.m)
        throw DimensionError("integrate_interconnection: drive dimension mismatch");

    const double h = cfg.step;
    Trajectory traj;
    traj.state_labels = joint.system.meta.state_labels;
    traj.input_labels = joint.system.meta.input_labels;
    traj.metric = joint.metric.Q;
    traj.input_kinks = detail::kink_indices(cfg.input, h * cfg.record_stride,
                                            cfg.step_count() / cfg.record_stride);

    Vec z = cfg.initial_state;
    detail::guard_state(z, 0.0, cfg.divergence_guard, joint.system.domain);

    detail::Rk4Workspace ws(joint.system.n);
    detail::run_grid(
        cfg,
        [&](std::size_t k) {
            const double t = static_cast<double>(k) * h;
            const Vec& e = cfg.input(t);
            ws.step([&](const Vec& zz, Vec& out) { out = eval_vector_field(joint.system, zz, e); },
                    h, z);
            detail::guard_state(z, static_cast<double>(k + 1) * h, cfg.divergence_guard,
                                joint.system.domain);
        },
        [&](double t) {
            traj.times.push_back(t);
            traj.states.push_back(z);
            traj.inputs.push_back({});
            traj.input_rates.push_back(cfg.input(t));
            traj.storage.push_back(joint.storage(z));
            traj.supply.push_back(concat(joint.supply_first(z), joint.supply_second(z)));
        });
    return traj;
}

// ---------------------------------------------------------------------------
// Verification hooks
// ---------------------------------------------------------------------------

/// Dissipation-inequality check for a recorded extended-system trajectory.
inline DissipationReport verify_dissipation(const Trajectory& traj, const InputAffineSystem& sys,
                                            const StorageMetric& metric, double rel_tol = 1e-6,
                                            std::size_t kink_window = 1) {
    return dissipation_residual(traj, sys, metric, rel_tol, kink_window);
}

/// Dissipation check against the trajectory's own recorded channels (used
/// for joint systems whose storage is not a single quadratic form).
inline DissipationReport verify_dissipation_recorded(const Trajectory& traj,
                                                     double rel_tol = 1e-6,
                                                     std::size_t kink_window = 1) {
    if (traj.storage.empty() || traj.supply.empty() || traj.input_rates.empty())
        throw Error("verify_dissipation_recorded: trajectory lacks recorded energy channels");
    return dissipation_residual_from_channels(traj.times, traj.storage, traj.input_rates,
                                              traj.supply, traj.input_kinks, rel_tol, kink_window);
}

struct ConvergenceMetrics {
    double settling_time = std::numeric_limits<double>::infinity();
    double final_error = std::numeric_limits<double>::infinity();
};

/// Settling time: first grid time after which |(x, u) - (x*, u*)| stays
/// within `band` for the rest of the horizon (infinity when it never does).
inline ConvergenceMetrics convergence_metrics(const Trajectory& traj, const Vec& x_target,
                                              const Vec& u_target, double band) {
    if (traj.size() == 0) throw Error("convergence_metrics: empty trajectory");
    const Vec target = concat(x_target, u_target);
    ConvergenceMetrics out;
    std::size_t first_inside = traj.size();
    for (std::size_t k = traj.size(); k-- > 0;) {
        const Vec z = concat(traj.states[k],
                             traj.inputs[k].size() == u_target.size() ? traj.inputs[k] : Vec{});
        if (z.size() != target.size())
            throw DimensionError("convergence_metrics: target dimension mismatch");
        const double err = norm2(z - target);
        if (k + 1 == traj.size()) out.final_error = err;
        if (err <= band)
            first_inside = k;
        else
            break;
    }
    if (first_inside < traj.size()) out.settling_time = traj.times[first_inside];
    return out;
}

}  // namespace krasovskii
