#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mfcn/laplace.hpp"

namespace mfcn {

// Common-noise intensity schedule kappa(n) -> 0. The ratio sqrt(n) kappa(n)
// decides which large-deviation speed applies.
struct KappaRule {
    enum class Form { critical, power };
    Form form = Form::critical;
    double lambda = 1.0;  // critical: kappa(n) = lambda / sqrt(n)
    double c = 1.0;       // power: kappa(n) = c * n^-p
    double p = 1.0;

    static KappaRule make_critical(double lambda);
    static KappaRule make_power(double c, double p);

    double kappa(int n) const;
};

struct RegimeSpeed {
    Speed speed = Speed::n;
    double lambda = 0.0;  // finite limit of sqrt(n) kappa(n); 0 when it vanishes
    bool critical = false;
};

RegimeSpeed regime_speed(const KappaRule& rule);

enum class RateRegime {
    critical,         // both noise sources contribute, limit lambda
    individual_only,  // sqrt(n) kappa -> 0, speed n
    common_only,      // sqrt(n) kappa -> infinity, speed kappa^-2
};

// Deterministic quadratic control problem for the scalar pure-Brownian
// endpoint-mean event {mean X(T) >= a}: minimize
//   (1/2) int ubar^2 + (1/(2 lambda^2)) int phi^2   s.t. int (ubar + phi) = a,
// in closed form. The critical value is a^2 / (2T (1 + lambda^2)); the
// single-noise regimes give a^2 / (2T).
double quadratic_rate_oracle(double a, double T, double lambda, RateRegime regime);

// Independent numerical minimization of the same problem over a
// piecewise-constant control grid (projected conjugate gradient on the
// equality-constrained quadratic program).
double quadratic_rate_numeric(double a, double T, double lambda, RateRegime regime,
                              int pieces = 64);

// Exponential tilt that drives the pure-Brownian ensemble mean to the
// threshold: the finite-n optimal split between individual and common drift.
ControlPolicy pure_brownian_mean_tilt(double a, const TimeGrid& grid, const ModelDims& dims,
                                      int n, double kappa);

using TiltBuilder = std::function<ControlPolicy(int n, double kappa)>;

struct RatePoint {
    int n = 0;
    double kappa = 0.0;
    double a_n = 0.0;  // speed value used for normalization
    double p_hat = 0.0;
    double p_stderr = 0.0;
    double rate = 0.0;  // -(1/a_n) log p_hat
    double rate_stderr = 0.0;
    bool used_is = false;
};

struct RateEstimate {
    RegimeSpeed speed;
    std::vector<RatePoint> points;
    double extrapolated = 0.0;  // secant through the two largest n
    double extrapolated_stderr = 0.0;
};

// Empirical decay-rate estimate of P(event) across ensemble sizes, normalized
// by the regime's speed, with a 1/a(n) secant extrapolation from the two
// largest sizes.
RateEstimate estimate_decay_rate(const CoefficientSet& coeffs, const ModelDims& dims,
                                 const InitialFamily& init_family, const FlowEvent& event,
                                 const KappaRule& rule, const std::vector<int>& n_list,
                                 const TimeGrid& grid, int replicas, std::uint64_t seed,
                                 bool use_is, const TiltBuilder& tilt = nullptr);

struct RegimeContrastRow {
    int rule_index = 0;
    int n = 0;
    double kappa = 0.0;
    double p_hat = 0.0;
    double p_stderr = 0.0;
    double rate_speed_n = 0.0;      // -(1/n) log p_hat
    double rate_speed_kappa = 0.0;  // -kappa^2 log p_hat
};

struct RegimeContrast {
    std::vector<RegimeSpeed> speeds;  // one per rule
    std::vector<RegimeContrastRow> rows;
};

// Tabulates decay rates under both speed normalizations for each rule: the
// correct speed stabilizes across n while the wrong one trends monotonically.
RegimeContrast regime_contrast(const CoefficientSet& coeffs, const ModelDims& dims,
                               const InitialFamily& init_family, const FlowEvent& event,
                               const std::vector<KappaRule>& rules, const std::vector<int>& n_list,
                               const TimeGrid& grid, int replicas, std::uint64_t seed, bool use_is,
                               const TiltBuilder& tilt = nullptr);

}  // namespace mfcn
