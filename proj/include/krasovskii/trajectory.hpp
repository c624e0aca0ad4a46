#pragma once

// Time-indexed simulation record on a uniform grid, with derived energy
// channels, plus the CSV writer (17 significant digits, exact round-trip).

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"

namespace krasovskii {

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;       // x per time
    std::vector<Vec> inputs;       // u per time
    std::vector<Vec> input_rates;  // u_d per time (extended runs only)

    // Derived channels, consistent with states/inputs under `metric`.
    std::vector<double> storage;       // S = (1/2) f^T Q f
    std::vector<Vec> supply;           // h = g^T Q f
    std::vector<double> loop_storage;  // closed-loop S_d (when applicable)
    std::vector<double> drift_lmi_residual;  // f^T Q_g0 f (closed loop)
    std::vector<Vec> gain_residual;          // K2 (u* - u) - h (closed loop)

    Mat metric;  // Q used for the derived channels

    // Indices where the applied input schedule switched (slope kinks in S).
    std::vector<std::size_t> input_kinks;

    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;

    std::size_t size() const { return times.size(); }

    double step() const {
        if (times.size() < 2) throw Error("trajectory has fewer than two samples");
        return times[1] - times[0];
    }
};

inline std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV layout: t, x_<label>..., u_<label>..., ud_<label>..., S_K, h_K_<label>...,
/// then S_d and invariant-set residual columns when present.
inline void write_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open CSV output file: " + path);

    auto label = [](const std::vector<std::string>& labels, std::size_t i) {
        return i < labels.size() ? labels[i] : std::to_string(i + 1);
    };

    const std::size_t nx = traj.states.empty() ? 0 : traj.states.front().size();
    const std::size_t nu = traj.inputs.empty() ? 0 : traj.inputs.front().size();
    const std::size_t nd = traj.input_rates.empty() ? 0 : traj.input_rates.front().size();
    const std::size_t nh = traj.supply.empty() ? 0 : traj.supply.front().size();
    const std::size_t ng = traj.gain_residual.empty() ? 0 : traj.gain_residual.front().size();

    out << "t";
    for (std::size_t i = 0; i < nx; ++i) out << ",x_" << label(traj.state_labels, i);
    for (std::size_t i = 0; i < nu; ++i) out << ",u_" << label(traj.input_labels, i);
    for (std::size_t i = 0; i < nd; ++i) out << ",ud_" << label(traj.input_labels, i);
    if (!traj.storage.empty()) out << ",S_K";
    for (std::size_t i = 0; i < nh; ++i) out << ",h_K_" << label(traj.input_labels, i);
    if (!traj.loop_storage.empty()) out << ",S_d";
    if (!traj.drift_lmi_residual.empty()) out << ",resid_qg0";
    for (std::size_t i = 0; i < ng; ++i) out << ",resid_gain_" << label(traj.input_labels, i);
    out << "\n";

    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << format_g17(traj.times[k]);
        for (std::size_t i = 0; i < nx; ++i) out << "," << format_g17(traj.states[k][i]);
        for (std::size_t i = 0; i < nu; ++i) out << "," << format_g17(traj.inputs[k][i]);
        for (std::size_t i = 0; i < nd; ++i) out << "," << format_g17(traj.input_rates[k][i]);
        if (!traj.storage.empty()) out << "," << format_g17(traj.storage[k]);
        for (std::size_t i = 0; i < nh; ++i) out << "," << format_g17(traj.supply[k][i]);
        if (!traj.loop_storage.empty()) out << "," << format_g17(traj.loop_storage[k]);
        if (!traj.drift_lmi_residual.empty())
            out << "," << format_g17(traj.drift_lmi_residual[k]);
        for (std::size_t i = 0; i < ng; ++i) out << "," << format_g17(traj.gain_residual[k][i]);
        out << "\n";
    }
}

}  // namespace krasovskii
