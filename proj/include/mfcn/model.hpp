#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfcn/measure.hpp"

namespace mfcn {

struct ModelDims {
    int d = 1;  // state dimension
    int m = 1;  // individual-noise dimension
    int k = 1;  // common-noise dimension

    void check() const {
        if (d < 1 || m < 1 || k < 1) fail("ModelDims: d, m, k must all be >= 1");
    }
};

// Declared structural properties of a coefficient set. Checked by random
// probing in validate_model, not enforced by construction.
struct CoefficientFlags {
    bool sigma_measure_only = false;
    bool gamma_measure_only = false;
    bool gamma_zero = false;
    bool theta_lipschitz = true;
    bool theta_log_growth = false;
    double bound = 10.0;  // declared K for the bounded coefficients
};

// Model coefficient maps. Null std::function means identically zero (theta:
// identity). Matrix outputs are row-major.
struct CoefficientSet {
    using VecFn = std::function<void(const double* x, const EmpiricalMeasure& mu, double* out)>;
    using ScalarFn = std::function<double(const double* x, const EmpiricalMeasure& mu)>;
    using ThetaFn = std::function<double(double)>;

    VecFn b;       // drift, R^d
    VecFn sigma;   // individual diffusion, R^{d x m}
    VecFn alpha;   // common diffusion, R^{d x k}
    ScalarFn c;    // weight drift rate
    VecFn gamma;   // weight individual loading, R^m
    VecFn beta;    // weight common loading, R^k
    ThetaFn theta; // weight transform on R_+
    CoefficientFlags flags;

    double eval_theta(double a) const { return theta ? theta(a) : a; }
};

CoefficientSet::ThetaFn theta_identity();
// Smooth saturating transform theta(x) = scale * log(1 + x).
CoefficientSet::ThetaFn theta_log1p(double scale = 1.0);

// Initial particle positions and weights. Weights default to 1.
struct InitialData {
    int n = 0;
    int dim = 1;
    std::vector<double> positions;  // n x dim
    std::vector<double> weights;    // n (empty => all ones)

    void check() const;
    double weight(int i) const { return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)]; }
    const double* position(int i) const {
        return positions.data() + static_cast<std::ptrdiff_t>(i) * dim;
    }
};

// Deterministic initial clouds (fixed across replicas, reproducible by seed).
InitialData initial_point_cloud(int n, int dim, const std::vector<double>& x0);
InitialData initial_gaussian_cloud(int n, int dim, const std::vector<double>& x0, double sd,
                                   std::uint64_t seed);

struct InitialDataReport {
    double mean_sq_norm = 0.0;     // (1/n) sum ||x_i||^2
    double mean_sq_weight = 0.0;   // (1/n) sum a_i^2
    double mean_neg_log_weight = 0.0;  // (1/n) sum (log a_i)^-
    std::vector<std::string> warnings;
};

InitialDataReport check_initial_data(const InitialData& init, double max_sq_norm = 100.0,
                                     double max_sq_weight = 100.0, double max_neg_log = 100.0);

struct ValidationEntry {
    std::string name;
    double max_norm = 0.0;
    double max_lipschitz_ratio = 0.0;
    int probes = 0;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    std::vector<std::string> violations;  // declared-flag or bound violations
    std::vector<std::string> warnings;
    bool ok() const { return violations.empty(); }
    const ValidationEntry& entry(const std::string& name) const;
};

// Empirical probe of boundedness / Lipschitz behavior on random (x, mu)
// pairs, plus spot checks of the declared structural flags.
ValidationReport validate_model(const CoefficientSet& coeffs, const ModelDims& dims, int probes,
                                std::uint64_t seed);

// Built-in coefficient families.
struct BuiltinParams {
    double rate = 1.0;       // state reversion (ou, linear_mean_field)
    double attract = 1.0;    // mean-field attraction (linear_mean_field)
    double sigma = 1.0;      // individual diffusion scale
    double alpha = 1.0;      // common diffusion scale
    std::vector<double> b0;  // constant drift (constant family)
    double c0 = 0.0;         // weight drift
    double gamma0 = 0.0;     // weight loading on first individual-noise component
    double beta0 = 0.0;      // weight loading on first common-noise component
    bool theta_log = false;  // log1p weight transform instead of identity
    double theta_scale = 1.0;
    double bound = 10.0;
};

CoefficientSet make_pure_brownian(const ModelDims& dims, const BuiltinParams& p = {});
CoefficientSet make_constant(const ModelDims& dims, const BuiltinParams& p);
CoefficientSet make_ou(const ModelDims& dims, const BuiltinParams& p);
CoefficientSet make_linear_mean_field(const ModelDims& dims, const BuiltinParams& p);

// family in {pure_brownian, constant, ou, linear_mean_field}
CoefficientSet make_builtin(const std::string& family, const ModelDims& dims,
                            const BuiltinParams& p);

}  // namespace mfcn
