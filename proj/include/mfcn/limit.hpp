#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mfcn/metric.hpp"
#include "mfcn/model.hpp"
#include "mfcn/simulate.hpp"

namespace mfcn {

// Deterministic initial cloud for a given particle count.
using InitialFamily = std::function<InitialData(int n)>;

struct FixedPointReport {
    int iterations = 0;
    std::vector<double> distances;  // sup-over-grid distance per iteration
    bool converged = false;
    int n_ref = 0;
};

struct PicardOptions {
    int n_ref = 20000;
    int max_iters = 30;
    double tol = 5e-3;
    int dict_size = 64;
    int lp_cap = kDefaultLpCap;
};

// Law-of-large-numbers limit flow by particle-cloud Picard iteration: the
// measure flow is frozen, a reference cloud is driven through it with common
// random numbers across iterations, and the resulting flow replaces the
// frozen one until the sup-over-grid distance drops below tol. The limit has
// no common-noise dependence, so no kappa enters here.
std::pair<MeasureFlow, FixedPointReport> solve_mckean_vlasov(const CoefficientSet& coeffs,
                                                             const ModelDims& dims,
                                                             const InitialFamily& xi0,
                                                             const TimeGrid& grid,
                                                             const PicardOptions& options,
                                                             std::uint64_t seed);

// Weighted analogue: pairs (X, A) with flow weights theta(A)/N.
std::pair<MeasureFlow, FixedPointReport> solve_weighted_limit(const CoefficientSet& coeffs,
                                                              const ModelDims& dims,
                                                              const InitialFamily& eta0,
                                                              const TimeGrid& grid,
                                                              const PicardOptions& options,
                                                              std::uint64_t seed);

// One more Picard sweep from a given flow; used by stability checks.
MeasureFlow picard_sweep(const CoefficientSet& coeffs, const ModelDims& dims,
                         const InitialFamily& init_family, const TimeGrid& grid, int n_ref,
                         std::uint64_t seed, bool weighted, const MeasureFlow& frozen);

// The dictionary the Picard solver measures convergence with.
BlDictionary picard_dictionary(const ModelDims& dims, const PicardOptions& options,
                               std::uint64_t seed);

double flow_sup_distance(const MeasureFlow& a, const MeasureFlow& b, const BlDictionary& dict);

struct LlnGapRow {
    int n = 0;
    double kappa = 0.0;
    double gap = 0.0;     // E[ sup_j d(mu^n(t_j), mu*(t_j)) ] on the dictionary metric
    double stderr_ = 0.0;
};

// Monte-Carlo estimate of the expected sup-over-grid dictionary distance to a
// precomputed reference flow, one row per ensemble size. The same dictionary
// is used for every n so values are comparable.
std::vector<LlnGapRow> lln_gap(const CoefficientSet& coeffs, const ModelDims& dims,
                               const InitialFamily& init_family, const TimeGrid& grid,
                               const std::function<double(int)>& kappa_rule,
                               const std::vector<int>& n_list, int replicas, std::uint64_t seed,
                               const MeasureFlow& reference, bool weighted,
                               const BlDictionary& dict);

}  // namespace mfcn
