#include "mfcn/rate.hpp"

#include <algorithm>
#include <cmath>

namespace mfcn {

KappaRule KappaRule::make_critical(double lambda) {
    if (!(lambda > 0.0)) fail("KappaRule: critical lambda must be positive");
    KappaRule r;
    r.form = Form::critical;
    r.lambda = lambda;
    return r;
}

KappaRule KappaRule::make_power(double c, double p) {
    if (!(c > 0.0) || !(p > 0.0)) fail("KappaRule: power rule needs c > 0, p > 0");
    KappaRule r;
    r.form = Form::power;
    r.c = c;
    r.p = p;
    return r;
}

double KappaRule::kappa(int n) const {
    if (n < 1) fail("KappaRule: n must be >= 1");
    if (form == Form::critical) return lambda / std::sqrt(static_cast<double>(n));
    return c * std::pow(static_cast<double>(n), -p);
}

RegimeSpeed regime_speed(const KappaRule& rule) {
    RegimeSpeed rs;
    if (rule.form == KappaRule::Form::critical) {
        rs.speed = Speed::n;
        rs.lambda = rule.lambda;
        rs.critical = true;
    } else if (rule.p > 0.5) {
        rs.speed = Speed::n;  // sqrt(n) kappa(n) -> 0: common noise negligible
        rs.lambda = 0.0;
    } else if (rule.p < 0.5) {
        rs.speed = Speed::kappa_inv_sq;  // sqrt(n) kappa(n) -> infinity
        rs.lambda = 0.0;
    } else {
        rs.speed = Speed::n;  // p = 1/2 is the critical scaling in power form
        rs.lambda = rule.c;
        rs.critical = true;
    }
    return rs;
}

double quadratic_rate_oracle(double a, double T, double lambda, RateRegime regime) {
    if (!(T > 0.0)) fail("quadratic_rate_oracle: horizon must be positive");
    switch (regime) {
        case RateRegime::critical:
            if (!(lambda > 0.0)) fail("quadratic_rate_oracle: critical regime needs lambda > 0");
            return a * a / (2.0 * T * (1.0 + lambda * lambda));
        case RateRegime::individual_only:
        case RateRegime::common_only:
            return a * a / (2.0 * T);
    }
    fail("quadratic_rate_oracle: unknown regime");
}

namespace {

// Equality-constrained quadratic program  min (1/2) x^T D x  s.t.  c^T x = a
// solved by conjugate gradients on the constraint manifold.
double projected_cg_value(const std::vector<double>& diag, const std::vector<double>& cons,
                          double a) {
    const std::size_t n = diag.size();
    const double cc = dot(cons.data(), cons.data(), static_cast<int>(n));
    if (!(cc > 0.0)) fail("quadratic_rate_numeric: degenerate constraint");

    auto project = [&](std::vector<double>& v) {
        const double s = dot(cons.data(), v.data(), static_cast<int>(n)) / cc;
        for (std::size_t i = 0; i < n; ++i) v[i] -= s * cons[i];
    };

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = a * cons[i] / cc;  // feasible start

    std::vector<double> r(n), p(n), dp(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = -diag[i] * x[i];
    project(r);
    p = r;
    double rr = dot(r.data(), r.data(), static_cast<int>(n));
    for (std::size_t iter = 0; iter < 4 * n && rr > 1e-28; ++iter) {
        for (std::size_t i = 0; i < n; ++i) dp[i] = diag[i] * p[i];
        const double pdp = dot(p.data(), dp.data(), static_cast<int>(n));
        if (!(pdp > 0.0)) break;
        const double alpha = rr / pdp;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * dp[i];
        project(r);
        const double rr_new = dot(r.data(), r.data(), static_cast<int>(n));
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_new;
    }

    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += 0.5 * diag[i] * x[i] * x[i];
    return value;
}

}  // namespace

double quadratic_rate_numeric(double a, double T, double lambda, RateRegime regime, int pieces) {
    if (!(T > 0.0)) fail("quadratic_rate_numeric: horizon must be positive");
    if (pieces < 1) fail("quadratic_rate_numeric: pieces must be >= 1");
    const double dt = T / pieces;
    std::vector<double> diag;
    std::vector<double> cons;
    const bool with_u = regime != RateRegime::common_only;
    const bool with_phi = regime == RateRegime::critical || regime == RateRegime::common_only;
    if (with_u)
        for (int j = 0; j < pieces; ++j) {
            diag.push_back(dt);
            cons.push_back(dt);
        }
    if (with_phi) {
        if (regime == RateRegime::critical && !(lambda > 0.0))
            fail("quadratic_rate_numeric: critical regime needs lambda > 0");
        const double w = regime == RateRegime::critical ? dt / (lambda * lambda) : dt;
        for (int j = 0; j < pieces; ++j) {
            diag.push_back(w);
            cons.push_back(dt);
        }
    }
    return projected_cg_value(diag, cons, a);
}

ControlPolicy pure_brownian_mean_tilt(double a, const TimeGrid& grid, const ModelDims& dims,
                                      int n, double kappa) {
    if (n < 1) fail("pure_brownian_mean_tilt: n must be >= 1");
    const double lam_sq = n * kappa * kappa;
    const double u0 = a / (grid.horizon * (1.0 + lam_sq));
    const double phi0 = lam_sq * u0;
    ControlPolicy policy = ControlPolicy::zero(dims.m, dims.k, grid.steps);
    for (int j = 0; j < grid.steps; ++j) {
        policy.u_table[static_cast<std::size_t>(j) * dims.m] = u0;
        policy.v[static_cast<std::size_t>(j) * dims.k] = phi0;
    }
    return policy;
}

namespace {

struct ProbabilityEstimate {
    double p = 0.0;
    double stderr_ = 0.0;
    long hits = 0;
};

ProbabilityEstimate estimate_probability(const CoefficientSet& coeffs, const ModelDims& dims,
                                         const InitialData& init, const FlowEvent& event,
                                         const TimeGrid& grid, double kappa,
                                         const ControlPolicy* policy, int replicas,
                                         std::uint64_t seed) {
    const NoisePlan plan{seed};
    SimOptions options;
    options.record_girsanov = policy != nullptr;
    const std::vector<double> values = ensemble_values(replicas, [&](std::uint32_t r) {
        const PathBundle bundle =
            simulate_unweighted(coeffs, dims, init, grid, kappa, plan, r, policy, options);
        if (!event(bundle.flow)) return 0.0;
        return policy ? std::exp(bundle.girsanov_log_weight) : 1.0;
    });
    ProbabilityEstimate est;
    const MeanStderr ms = mean_stderr(values);
    est.p = ms.mean;
    est.stderr_ = ms.stderr_;
    for (double v : values)
        if (v > 0.0) ++est.hits;
    return est;
}

}  // namespace

RateEstimate estimate_decay_rate(const CoefficientSet& coeffs, const ModelDims& dims,
                                 const InitialFamily& init_family, const FlowEvent& event,
                                 const KappaRule& rule, const std::vector<int>& n_list,
                                 const TimeGrid& grid, int replicas, std::uint64_t seed,
                                 bool use_is, const TiltBuilder& tilt) {
    if (n_list.size() < 2) fail("estimate_decay_rate: need at least two ensemble sizes");
    if (use_is && !tilt) fail("estimate_decay_rate: importance sampling requires a tilt builder");
    std::vector<int> sizes = n_list;
    std::sort(sizes.begin(), sizes.end());

    RateEstimate est;
    est.speed = regime_speed(rule);
    for (int n : sizes) {
        const double kappa = rule.kappa(n);
        const InitialData init = init_family(n);
        ControlPolicy policy;
        if (use_is) policy = tilt(n, kappa);
        const ProbabilityEstimate pe = estimate_probability(
            coeffs, dims, init, event, grid, kappa, use_is ? &policy : nullptr, replicas, seed);
        if (!(pe.p > 0.0)) {
            if (!use_is)
                fail(strprintf("estimate_decay_rate: no hits at n = %d; enable importance "
                               "sampling (use_is)",
                               n));
            fail(strprintf("estimate_decay_rate: zero estimate at n = %d even with importance "
                           "sampling; increase the tilt or the replica budget",
                           n));
        }
        RatePoint pt;
        pt.n = n;
        pt.kappa = kappa;
        pt.a_n = speed_value(est.speed.speed, n, kappa);
        pt.p_hat = pe.p;
        pt.p_stderr = pe.stderr_;
        pt.rate = -std::log(pe.p) / pt.a_n;
        pt.rate_stderr = (pe.stderr_ / pe.p) / pt.a_n;
        pt.used_is = use_is;
        est.points.push_back(pt);
    }

    // Secant extrapolation in 1/a(n) through the two largest sizes: with
    // r(n) = r_inf + C / a(n), r_inf = (a2 r2 - a1 r1) / (a2 - a1).
    const RatePoint& p1 = est.points[est.points.size() - 2];
    const RatePoint& p2 = est.points.back();
    const double da = p2.a_n - p1.a_n;
    if (std::abs(da) < 1e-12) {
        est.extrapolated = p2.rate;
        est.extrapolated_stderr = p2.rate_stderr;
    } else {
        est.extrapolated = (p2.a_n * p2.rate - p1.a_n * p1.rate) / da;
        est.extrapolated_stderr = std::sqrt(p2.a_n * p2.a_n * p2.rate_stderr * p2.rate_stderr +
                                            p1.a_n * p1.a_n * p1.rate_stderr * p1.rate_stderr) /
                                  std::abs(da);
    }
    return est;
}

RegimeContrast regime_contrast(const CoefficientSet& coeffs, const ModelDims& dims,
                               const InitialFamily& init_family, const FlowEvent& event,
                               const std::vector<KappaRule>& rules, const std::vector<int>& n_list,
                               const TimeGrid& grid, int replicas, std::uint64_t seed, bool use_is,
                               const TiltBuilder& tilt) {
    if (rules.empty()) fail("regime_contrast: need at least one rule");
    if (use_is && !tilt) fail("regime_contrast: importance sampling requires a tilt builder");
    std::vector<int> sizes = n_list;
    std::sort(sizes.begin(), sizes.end());

    RegimeContrast out;
    for (std::size_t rule_index = 0; rule_index < rules.size(); ++rule_index) {
        const KappaRule& rule = rules[rule_index];
        out.speeds.push_back(regime_speed(rule));
        for (int n : sizes) {
            const double kappa = rule.kappa(n);
            const InitialData init = init_family(n);
            ControlPolicy policy;
            if (use_is) policy = tilt(n, kappa);
            const ProbabilityEstimate pe = estimate_probability(
                coeffs, dims, init, event, grid, kappa, use_is ? &policy : nullptr, replicas,
                seed);
            if (!(pe.p > 0.0))
                fail(strprintf("regime_contrast: zero probability estimate at n = %d", n));
            RegimeContrastRow row;
            row.rule_index = static_cast<int>(rule_index);
            row.n = n;
            row.kappa = kappa;
            row.p_hat = pe.p;
            row.p_stderr = pe.stderr_;
            row.rate_speed_n = -std::log(pe.p) / n;
            row.rate_speed_kappa = -kappa * kappa * std::log(pe.p);
            out.rows.push_back(row);
        }
    }
    return out;
}

}  // namespace mfcn
