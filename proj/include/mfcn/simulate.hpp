#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mfcn/control.hpp"
#include "mfcn/grid.hpp"
#include "mfcn/measure.hpp"
#include "mfcn/model.hpp"
#include "mfcn/parallel.hpp"
#include "mfcn/rng.hpp"

namespace mfcn {

struct SimOptions {
    // When false, only the terminal measure is kept in the bundle's flow.
    bool record_flow = true;
    bool record_paths = false;
    bool record_girsanov = false;
    // Noise increments are drawn on a grid refined by this factor and summed,
    // so runs at different step counts can share one underlying noise path.
    int noise_substeps = 1;
};

// One replica of the ensemble: measure flow, optional particle paths, the
// realized Girsanov log-weight, and the realized running control energies.
struct PathBundle {
    MeasureFlow flow;
    std::vector<double> paths;         // (steps+1) x n x d when recorded
    std::vector<double> weight_paths;  // (steps+1) x n when recorded (weighted system)
    bool controlled = false;
    bool has_girsanov = false;
    double girsanov_log_weight = 0.0;
    double running_u_cost = 0.0;  // sum_i int ||u_i||^2 dt
    double running_v_cost = 0.0;  // int ||v||^2 dt
};

// Explicit Euler-Maruyama for the particle system, optionally controlled.
// Coefficients at step j see the empirical measure frozen at t_j.
PathBundle simulate_unweighted(const CoefficientSet& coeffs, const ModelDims& dims,
                               const InitialData& init, const TimeGrid& grid, double kappa,
                               const NoisePlan& plan, std::uint32_t replica,
                               const ControlPolicy* control = nullptr,
                               const SimOptions& options = {});

// Joint (X, A) system with multiplicative weights evolved in log space; the
// flow carries atom weights theta(A_i)/n.
PathBundle simulate_weighted(const CoefficientSet& coeffs, const ModelDims& dims,
                             const InitialData& init, const TimeGrid& grid, double kappa,
                             const NoisePlan& plan, std::uint32_t replica,
                             const ControlPolicy* control = nullptr,
                             const SimOptions& options = {});

// log dP/dQ for the realized tilt, where Q is the controlled simulation
// measure and P the uncontrolled one. Requires record_girsanov.
double girsanov_log_weight(const PathBundle& bundle);

// Map a per-replica computation over an ensemble; parallel over replicas with
// slot-indexed writes, so results are independent of thread count.
template <class Fn>
std::vector<double> ensemble_values(int replicas, Fn&& fn) {
    std::vector<double> out(static_cast<std::size_t>(replicas));
    parallel_for(0, replicas, [&](std::int64_t r) {
        out[static_cast<std::size_t>(r)] = fn(static_cast<std::uint32_t>(r));
    });
    return out;
}

}  // namespace mfcn
