#pragma once

// Deterministic input signals for simulations: zero, constant, and
// piecewise-constant schedules (including seeded random schedules).

#include <cstdint>
#include <vector>

#include "krasovskii/errors.hpp"
#include "krasovskii/linalg.hpp"

namespace krasovskii {

class InputSignal {
public:
    /// Default: the zero signal of dimension 0.
    InputSignal() : times_{0.0}, values_{Vec{}} {}

    static InputSignal zero(std::size_t dim) {
        InputSignal s;
        s.dim_ = dim;
        s.values_ = {Vec(dim, 0.0)};
        s.times_ = {0.0};
        return s;
    }

    static InputSignal constant(Vec value) {
        InputSignal s;
        s.dim_ = value.size();
        s.values_ = {std::move(value)};
        s.times_ = {0.0};
        return s;
    }

    /// values[i] holds on [times[i], times[i+1]); the last value holds to the
    /// end. times must start at 0 and increase strictly.
    static InputSignal piecewise_constant(std::vector<double> times, std::vector<Vec> values) {
        if (times.empty() || times.size() != values.size())
            throw DimensionError("piecewise signal: times and values must match and be non-empty");
        if (times.front() != 0.0)
            throw DimensionError("piecewise signal: schedule must start at t = 0");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (times[i] <= times[i - 1])
                throw DimensionError("piecewise signal: times must increase strictly");
        const std::size_t dim = values.front().size();
        for (const Vec& v : values)
            if (v.size() != dim) throw DimensionError("piecewise signal: value dimensions differ");
        InputSignal s;
        s.dim_ = dim;
        s.times_ = std::move(times);
        s.values_ = std::move(values);
        return s;
    }

    std::size_t dim() const { return dim_; }

    bool is_constant() const { return values_.size() == 1; }

    const Vec& operator()(double t) const {
        // value on the half-open interval containing t
        std::size_t lo = 0, hi = times_.size();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (times_[mid] <= t)
                lo = mid;
            else
                hi = mid;
        }
        return values_[lo];
    }

    /// Interior discontinuity times (empty for constant signals).
    std::vector<double> switch_times() const {
        return {times_.begin() + 1, times_.end()};
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> times_;
    std::vector<Vec> values_;
};

}  // namespace krasovskii
