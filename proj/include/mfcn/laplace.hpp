#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mfcn/control.hpp"
#include "mfcn/limit.hpp"
#include "mfcn/simulate.hpp"

namespace mfcn {

// Large-deviation speed a(n): n for the mean-field regime, kappa^-2 when the
// common noise dominates.
enum class Speed { n, kappa_inv_sq };

inline double speed_value(Speed s, int n, double kappa) {
    if (s == Speed::n) return static_cast<double>(n);
    if (!(kappa > 0.0)) fail("speed kappa^-2 requires kappa > 0");
    return 1.0 / (kappa * kappa);
}

// Bounded functional of the measure flow.
struct Functional {
    std::function<double(const MeasureFlow&)> eval;
    double bound = 1.0;
    enum class Smoothness { smooth, lipschitz, discontinuous } tag = Smoothness::lipschitz;

    double operator()(const MeasureFlow& flow) const {
        const double y = eval(flow);
        if (!(std::abs(y) <= bound * (1.0 + 1e-9)))
            fail(strprintf("Functional: |F| = %.6g exceeds declared bound %.6g", std::abs(y),
                           bound));
        return y;
    }
};

Functional functional_constant(double value);
// clip(mean coordinate of the terminal measure, -clip, clip)
Functional functional_clipped_terminal_mean(int coord, double clip);
// height * clip((a - terminal mean) / width, 0, 1): a bounded continuous
// surrogate for the indicator {terminal mean >= a}.
Functional functional_smoothed_threshold(int coord, double a, double width, double height);

struct LaplaceEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    int replicas = 0;
    double speed_value = 0.0;
    double max_exponent = 0.0;  // log-sum-exp diagnostics
    double ess = 0.0;           // effective sample size
    bool degenerate = false;    // ess below threshold
};

// -(1/a) log E[exp(-a F(mu^n))] by log-sum-exp over replica flows, with a
// delta-method standard error.
LaplaceEstimate estimate_laplace_direct(const CoefficientSet& coeffs, const ModelDims& dims,
                                        const InitialData& init, const Functional& F,
                                        const TimeGrid& grid, double kappa, int replicas,
                                        std::uint64_t seed, Speed speed);

struct ControlCostEstimate {
    double u_part = 0.0;  // mean running u-cost with its speed prefactor
    double v_part = 0.0;
    double f_part = 0.0;
    double total = 0.0;
    double stderr_ = 0.0;
    int replicas = 0;
};

// Monte-Carlo estimate of the variational cost of an admissible control pair:
// running control energies with the speed-dependent prefactors plus F on the
// controlled flow.
ControlCostEstimate control_cost(const CoefficientSet& coeffs, const ModelDims& dims,
                                 const InitialData& init, const Functional& F,
                                 const TimeGrid& grid, double kappa, const ControlPolicy& policy,
                                 int replicas, std::uint64_t seed, bool weighted, Speed speed);

struct OptimizeTracePoint {
    int eval = 0;
    double cost = 0.0;
    double best = 0.0;
};

struct OptimizeResult {
    std::vector<double> params;
    ControlPolicy policy;
    ControlCostEstimate cost;  // evaluated on a fresh validation seed
    double crn_best_cost = 0.0;
    std::vector<OptimizeTracePoint> trace;
    bool budget_exhausted = false;
};

struct OptimizeOptions {
    int budget = 2000;        // cost evaluations
    int eval_replicas = 128;  // replicas per evaluation (common random numbers)
    int final_replicas = 512; // validation evaluation of the returned policy
};

// Minimize control_cost over a parametric family with common-random-number
// simultaneous-perturbation gradient steps and a random-search fallback.
// The zero control is always evaluated first, so the returned best never
// loses to it.
OptimizeResult optimize_controls(const CoefficientSet& coeffs, const ModelDims& dims,
                                 const InitialData& init, const Functional& F,
                                 const TimeGrid& grid, double kappa, const ControlFamily& family,
                                 std::uint64_t seed, bool weighted, Speed speed,
                                 const OptimizeOptions& options);

using FlowEvent = std::function<bool(const MeasureFlow&)>;

FlowEvent event_terminal_mean_at_least(int coord, double threshold);

struct ImportanceSamplingResult {
    double p_is = 0.0;
    double is_stderr = 0.0;
    double p_mc = 0.0;
    double mc_stderr = 0.0;
    double variance_reduction = 0.0;  // Var(plain) / Var(tilted)
    long hits_is = 0;
    long hits_mc = 0;
};

// Unbiased exponential-tilt probability estimator with the Girsanov weight,
// plus a plain Monte Carlo run at equal budget for the variance comparison.
ImportanceSamplingResult importance_sampling_probability(
    const CoefficientSet& coeffs, const ModelDims& dims, const InitialData& init,
    const FlowEvent& event, const TimeGrid& grid, double kappa, const ControlPolicy& policy,
    int replicas, std::uint64_t seed);

struct VarianceCell {
    int n = 0;
    double kappa = 0.0;
    double var = 0.0;
    double var_stderr = 0.0;
};

struct VarianceFit {
    double A = 0.0;  // coefficient of 1/n
    double B = 0.0;  // coefficient of kappa^2
    double rel_residual = 0.0;
    std::vector<VarianceCell> cells;
};

// Least-squares fit Var(<f, mu^n(T)>) ~ A/n + B kappa^2 over an (n, kappa)
// grid; relative weighting so each cell counts equally.
VarianceFit variance_decomposition(const CoefficientSet& coeffs, const ModelDims& dims,
                                   const InitialFamily& init_family,
                                   const std::function<double(const EmpiricalMeasure&)>& f,
                                   const TimeGrid& grid, const std::vector<int>& n_list,
                                   const std::vector<double>& kappa_list, int replicas,
                                   std::uint64_t seed);

}  // namespace mfcn
