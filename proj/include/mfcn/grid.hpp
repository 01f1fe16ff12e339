#pragma once

#include "mfcn/common.hpp"

namespace mfcn {

// Uniform time grid on [0, T] with t_j = T * j / steps.
struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
        if (!(horizon > 0.0)) fail("TimeGrid: horizon must be positive");
        if (steps < 1) fail("TimeGrid: steps must be >= 1");
    }

    double dt() const { return horizon / steps; }
    double time(int j) const { return horizon * static_cast<double>(j) / steps; }
    int points() const { return steps + 1; }
};

}  // namespace mfcn
