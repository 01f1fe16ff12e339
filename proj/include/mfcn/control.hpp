#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mfcn/grid.hpp"
#include "mfcn/measure.hpp"
#include "mfcn/model.hpp"

namespace mfcn {

// Feedback control u for the particles plus deterministic common control v.
// v is piecewise constant on the grid. u is either a piecewise-constant
// table (same control for every particle), an affine-in-state table, or a
// caller-supplied feedback function.
struct ControlPolicy {
    int m = 1;
    int k = 1;
    int steps = 0;

    std::vector<double> v;         // steps x k, empty => zero
    std::vector<double> u_table;   // steps x m, empty => zero
    std::vector<double> u_affine;  // steps x m x d gain on the state, empty => none
    std::function<void(double t, const double* x, const EmpiricalMeasure& mu, double* out)> u_fn;

    // Declared radius of the admissible class for v: int ||v||^2 dt <= M.
    double v_radius = std::numeric_limits<double>::infinity();

    bool has_u() const { return !u_table.empty() || !u_affine.empty() || static_cast<bool>(u_fn); }
    bool has_v() const { return !v.empty(); }
    bool empty() const { return !has_u() && !has_v(); }

    const double* v_at(int j) const {
        return v.empty() ? nullptr : v.data() + static_cast<std::ptrdiff_t>(j) * k;
    }

    void eval_u(int j, double t, const double* x, int d, const EmpiricalMeasure& mu,
                double* out) const {
        for (int c = 0; c < m; ++c) out[c] = 0.0;
        if (!u_table.empty()) {
            const double* row = u_table.data() + static_cast<std::ptrdiff_t>(j) * m;
            for (int c = 0; c < m; ++c) out[c] += row[c];
        }
        if (!u_affine.empty()) {
            const double* gain = u_affine.data() + static_cast<std::ptrdiff_t>(j) * m * d;
            matvec_acc(gain, x, out, m, d);
        }
        if (u_fn) {
            std::vector<double> extra(static_cast<std::size_t>(m), 0.0);
            u_fn(t, x, mu, extra.data());
            for (int c = 0; c < m; ++c) out[c] += extra[static_cast<std::size_t>(c)];
        }
    }

    // Realized int_0^T ||v||^2 dt on the grid.
    double v_energy(const TimeGrid& grid) const {
        if (v.empty()) return 0.0;
        double s = 0.0;
        for (int j = 0; j < steps; ++j) s += norm2sq(v_at(j), k);
        return s * grid.dt();
    }

    void check(const TimeGrid& grid) const {
        if (!v.empty() && static_cast<int>(v.size()) != steps * k)
            fail("ControlPolicy: v table has wrong length");
        if (!u_table.empty() && static_cast<int>(u_table.size()) != steps * m)
            fail("ControlPolicy: u table has wrong length");
        if (steps != 0 && steps != grid.steps) fail("ControlPolicy: grid step mismatch");
        if (v_energy(grid) > v_radius * (1.0 + 1e-12))
            fail(strprintf("ControlPolicy: int ||v||^2 dt = %.6g exceeds declared radius %.6g",
                           v_energy(grid), v_radius));
    }

    static ControlPolicy zero(int m, int k, int steps) {
        ControlPolicy p;
        p.m = m;
        p.k = k;
        p.steps = steps;
        p.v.assign(static_cast<std::size_t>(steps) * k, 0.0);
        p.u_table.assign(static_cast<std::size_t>(steps) * m, 0.0);
        return p;
    }
};

// Parametric control family for the optimizer: u and v piecewise constant on
// coarse pieces mapped onto the simulation grid, optionally with an affine
// state gain per u-piece.
struct ControlFamily {
    int m = 1;
    int k = 1;
    int d = 1;
    int steps = 0;    // simulation grid steps
    int u_pieces = 1;
    int v_pieces = 1;
    bool affine = false;
    double v_radius = std::numeric_limits<double>::infinity();
    int max_params = 64;

    int param_count() const {
        return u_pieces * m + v_pieces * k + (affine ? u_pieces * m * d : 0);
    }

    void check() const {
        if (u_pieces < 1 || v_pieces < 1) fail("ControlFamily: need at least one piece");
        if (steps < u_pieces || steps < v_pieces)
            fail("ControlFamily: more pieces than grid steps");
        if (param_count() > max_params)
            fail(strprintf("ControlFamily: %d parameters exceed cap %d", param_count(),
                           max_params));
    }

    ControlPolicy materialize(const std::vector<double>& params) const;
};

// Plain-text serialization so an optimized control can be reloaded for
// importance-sampling runs.
void save_control_policy(const ControlPolicy& policy, const TimeGrid& grid,
                         const std::string& path);
ControlPolicy load_control_policy(const std::string& path, TimeGrid* grid_out = nullptr);

}  // namespace mfcn
