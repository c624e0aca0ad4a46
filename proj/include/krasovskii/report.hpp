#pragma once

// JSON serialization of certificates and run reports. Formatting is fixed
// (sorted keys via nlohmann's object ordering, two-space indent, trailing
// newline) so identical runs produce identical bytes.

#include <fstream>
#include <string>

#include <json.hpp>

#include "krasovskii/dynamics.hpp"
#include "krasovskii/errors.hpp"
#include "krasovskii/optim.hpp"
#include "krasovskii/passivity.hpp"
#include "krasovskii/sim.hpp"

namespace krasovskii {

using json = nlohmann::json;

inline json to_json(const Vec& v) { return json(v); }

inline json to_json(const Mat& a) {
    json rows = json::array();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline json to_json(const ConditionCheck& c) {
    return json{{"condition", c.condition},
                {"worst_margin", c.worst_value},
                {"tolerance", c.tolerance},
                {"samples", c.samples},
                {"pass", c.pass},
                {"worst_state", c.worst_state}};
}

inline json to_json(const PassivityCertificate& cert) {
    json conditions = json::array();
    for (const auto& c : cert.conditions) conditions.push_back(to_json(c));
    return json{{"label", cert.label},
                {"pass", cert.pass},
                {"seed", cert.seed},
                {"conditions", conditions}};
}

inline json to_json(const DissipationReport& rep) {
    return json{{"min_residual", rep.min_residual},
                {"min_index", rep.min_index},
                {"max_storage", rep.max_storage},
                {"tolerance", rep.tolerance},
                {"pass", rep.pass},
                {"violations", rep.violations},
                {"excluded_indices", rep.excluded},
                {"samples", rep.residual.size()}};
}

inline json to_json(const KktPoint& p) {
    return json{{"x", p.x},
                {"lambda", p.lambda},
                {"stationarity_norm", p.stationarity_norm},
                {"feasibility_norm", p.feasibility_norm}};
}

inline json to_json(const Equilibrium& eq) {
    return json{{"x", eq.x}, {"u", eq.u}, {"residual_norm", eq.residual_norm}};
}

inline void write_json(const json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open JSON output file: " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace krasovskii
