#include "mfcn/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfcn {

Functional functional_constant(double value) {
    Functional f;
    f.eval = [value](const MeasureFlow&) { return value; };
    f.bound = std::max(std::abs(value), 1e-12);
    f.tag = Functional::Smoothness::smooth;
    return f;
}

Functional functional_clipped_terminal_mean(int coord, double clip) {
    Functional f;
    f.eval = [coord, clip](const MeasureFlow& flow) {
        const double m = flow.terminal().mean()[static_cast<std::size_t>(coord)];
        return std::clamp(m, -clip, clip);
    };
    f.bound = clip;
    f.tag = Functional::Smoothness::lipschitz;
    return f;
}

Functional functional_smoothed_threshold(int coord, double a, double width, double height) {
    Functional f;
    f.eval = [coord, a, width, height](const MeasureFlow& flow) {
        const double m = flow.terminal().mean()[static_cast<std::size_t>(coord)];
        return height * std::clamp((a - m) / width, 0.0, 1.0);
    };
    f.bound = std::abs(height);
    f.tag = Functional::Smoothness::lipschitz;
    return f;
}

FlowEvent event_terminal_mean_at_least(int coord, double threshold) {
    return [coord, threshold](const MeasureFlow& flow) {
        return flow.terminal().mean()[static_cast<std::size_t>(coord)] >= threshold;
    };
}

LaplaceEstimate estimate_laplace_direct(const CoefficientSet& coeffs, const ModelDims& dims,
                                        const InitialData& init, const Functional& F,
                                        const TimeGrid& grid, double kappa, int replicas,
                                        std::uint64_t seed, Speed speed) {
    if (replicas < 2) fail("estimate_laplace_direct: need at least two replicas");
    const double a = speed_value(speed, init.n, kappa);
    const NoisePlan plan{seed};
    const std::vector<double> values = ensemble_values(replicas, [&](std::uint32_t r) {
        const PathBundle bundle = simulate_unweighted(coeffs, dims, init, grid, kappa, plan, r);
        return F(bundle.flow);
    });

    // log-sum-exp with max subtraction: exp(-a F) spans hundreds of orders of
    // magnitude already for modest a.
    std::vector<double> expo(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) expo[i] = -a * values[i];
    const double mx = *std::max_element(expo.begin(), expo.end());
    std::vector<double> z(values.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::exp(expo[i] - mx);
    const double sum_z = pairwise_sum(z);
    const double mean_z = sum_z / static_cast<double>(z.size());
    std::vector<double> zsq(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) zsq[i] = z[i] * z[i];
    const double sum_zsq = pairwise_sum(zsq);

    LaplaceEstimate est;
    est.replicas = replicas;
    est.speed_value = a;
    est.max_exponent = mx;
    est.value = -(mx + std::log(mean_z)) / a;
    const double var_z = std::max(0.0, (sum_zsq - sum_z * mean_z) / (z.size() - 1.0));
    est.stderr_ = std::sqrt(var_z / static_cast<double>(z.size())) / (mean_z * a);
    est.ess = sum_z * sum_z / std::max(sum_zsq, 1e-300);
    est.degenerate = est.ess < 10.0;
    return est;
}

namespace {

struct CostPrefactors {
    double u = 0.0;
    double v = 0.0;
};

CostPrefactors cost_prefactors(Speed speed, int n, double kappa, bool v_active) {
    CostPrefactors pf;
    if (speed == Speed::n) {
        pf.u = 0.5 / n;
        if (v_active) {
            if (!(kappa > 0.0)) fail("control_cost: nonzero common control requires kappa > 0");
            pf.v = 0.5 / (n * kappa * kappa);
        }
    } else {
        pf.u = 0.5 * kappa * kappa;
        pf.v = v_active ? 0.5 : 0.0;
    }
    return pf;
}

}  // namespace

ControlCostEstimate control_cost(const CoefficientSet& coeffs, const ModelDims& dims,
                                 const InitialData& init, const Functional& F,
                                 const TimeGrid& grid, double kappa, const ControlPolicy& policy,
                                 int replicas, std::uint64_t seed, bool weighted, Speed speed) {
    if (replicas < 2) fail("control_cost: need at least two replicas");
    policy.check(grid);
    const double v_energy = policy.v_energy(grid);
    const CostPrefactors pf = cost_prefactors(speed, init.n, kappa, v_energy > 0.0);
    const NoisePlan plan{seed};

    std::vector<double> f_vals(static_cast<std::size_t>(replicas));
    std::vector<double> u_costs(static_cast<std::size_t>(replicas));
    parallel_for(0, replicas, [&](std::int64_t r) {
        const PathBundle bundle =
            weighted ? simulate_weighted(coeffs, dims, init, grid, kappa, plan,
                                         static_cast<std::uint32_t>(r), &policy)
                     : simulate_unweighted(coeffs, dims, init, grid, kappa, plan,
                                           static_cast<std::uint32_t>(r), &policy);
        f_vals[static_cast<std::size_t>(r)] = F(bundle.flow);
        u_costs[static_cast<std::size_t>(r)] = bundle.running_u_cost;
    });

    std::vector<double> totals(static_cast<std::size_t>(replicas));
    for (std::size_t i = 0; i < totals.size(); ++i)
        totals[i] = pf.u * u_costs[i] + pf.v * v_energy + f_vals[i];
    const MeanStderr total = mean_stderr(totals);

    ControlCostEstimate est;
    est.replicas = replicas;
    est.u_part = pf.u * mean_stderr(u_costs).mean;
    est.v_part = pf.v * v_energy;
    est.f_part = mean_stderr(f_vals).mean;
    est.total = total.mean;
    est.stderr_ = total.stderr_;
    return est;
}

OptimizeResult optimize_controls(const CoefficientSet& coeffs, const ModelDims& dims,
                                 const InitialData& init, const Functional& F,
                                 const TimeGrid& grid, double kappa, const ControlFamily& family,
                                 std::uint64_t seed, bool weighted, Speed speed,
                                 const OptimizeOptions& options) {
    family.check();
    if (options.budget < 1) fail("optimize_controls: budget must be >= 1");
    const int dim = family.param_count();
    Prng rng(seed ^ 0x0971A12Eu);
    const std::uint64_t crn_seed = seed ^ 0xC0117051u;  // fixed across every evaluation

    OptimizeResult res;
    int evals_used = 0;
    auto evaluate = [&](const std::vector<double>& p) {
        const ControlPolicy policy = family.materialize(p);
        const double cost = control_cost(coeffs, dims, init, F, grid, kappa, policy,
                                         options.eval_replicas, crn_seed, weighted, speed)
                                .total;
        ++evals_used;
        return cost;
    };

    std::vector<double> best_p(static_cast<std::size_t>(dim), 0.0);
    double best_cost = evaluate(best_p);
    res.trace.push_back({evals_used, best_cost, best_cost});
    auto consider = [&](const std::vector<double>& p, double cost) {
        if (cost < best_cost) {
            best_cost = cost;
            best_p = p;
        }
        res.trace.push_back({evals_used, cost, best_cost});
    };

    std::vector<double> p = best_p;
    std::vector<double> delta(static_cast<std::size_t>(dim));
    std::vector<double> pp(static_cast<std::size_t>(dim));
    std::vector<double> pm(static_cast<std::size_t>(dim));
    const double c0 = 0.15;
    const double a0 = 0.4;
    int iter = 0;
    int stall = 0;
    while (evals_used + 2 <= options.budget) {
        ++iter;
        const double ck = c0 / std::pow(static_cast<double>(iter), 0.101);
        const double ak = a0 / std::pow(10.0 + iter, 0.602);

        if (stall >= 8) {
            // Derivative-free fallback: local Gaussian search around the best
            // point, shrinking with the perturbation schedule.
            for (int i = 0; i < dim; ++i)
                pp[static_cast<std::size_t>(i)] = best_p[static_cast<std::size_t>(i)] + ck * rng.normal();
            const double cost = evaluate(pp);
            if (cost < best_cost) stall = 0;
            consider(pp, cost);
            p = best_p;
            continue;
        }

        for (int i = 0; i < dim; ++i) delta[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int i = 0; i < dim; ++i) {
            pp[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] + ck * delta[static_cast<std::size_t>(i)];
            pm[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] - ck * delta[static_cast<std::size_t>(i)];
        }
        const double cp = evaluate(pp);
        consider(pp, cp);
        if (evals_used >= options.budget) break;
        const double cm = evaluate(pm);
        consider(pm, cm);

        const double directional = (cp - cm) / (2.0 * ck);
        const double step = std::clamp(ak * directional, -0.5, 0.5);
        for (int i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] -= step * delta[static_cast<std::size_t>(i)];

        if (std::min(cp, cm) >= best_cost)
            ++stall;
        else
            stall = 0;
    }

    res.budget_exhausted = evals_used >= options.budget - 1;
    res.params = best_p;
    res.policy = family.materialize(best_p);
    res.crn_best_cost = best_cost;
    res.cost = control_cost(coeffs, dims, init, F, grid, kappa, res.policy,
                            options.final_replicas, seed ^ 0xF1A1u, weighted, speed);
    return res;
}

ImportanceSamplingResult importance_sampling_probability(
    const CoefficientSet& coeffs, const ModelDims& dims, const InitialData& init,
    const FlowEvent& event, const TimeGrid& grid, double kappa, const ControlPolicy& policy,
    int replicas, std::uint64_t seed) {
    if (replicas < 2) fail("importance_sampling_probability: need at least two replicas");
    policy.check(grid);
    if (policy.v_energy(grid) > 0.0 && !(kappa > 0.0))
        fail("importance_sampling_probability: nonzero common control requires kappa > 0");

    const NoisePlan plan{seed};
    SimOptions is_options;
    is_options.record_girsanov = true;
    const std::vector<double> tilted = ensemble_values(replicas, [&](std::uint32_t r) {
        const PathBundle bundle =
            simulate_unweighted(coeffs, dims, init, grid, kappa, plan, r, &policy, is_options);
        return event(bundle.flow) ? std::exp(bundle.girsanov_log_weight) : 0.0;
    });

    const NoisePlan mc_plan{seed ^ 0x9D1A171Cu};
    const std::vector<double> plain = ensemble_values(replicas, [&](std::uint32_t r) {
        const PathBundle bundle = simulate_unweighted(coeffs, dims, init, grid, kappa, mc_plan, r);
        return event(bundle.flow) ? 1.0 : 0.0;
    });

    ImportanceSamplingResult res;
    const MeanStderr is = mean_stderr(tilted);
    const MeanStderr mc = mean_stderr(plain);
    res.p_is = is.mean;
    res.is_stderr = is.stderr_;
    res.p_mc = mc.mean;
    res.mc_stderr = mc.stderr_;
    for (double w : tilted)
        if (w > 0.0) ++res.hits_is;
    for (double h : plain)
        if (h > 0.0) ++res.hits_mc;
    if (res.hits_is == 0 && res.hits_mc == 0)
        fail("importance_sampling_probability: no hits under either estimator; "
             "increase the tilt or the replica budget");
    const double var_is = sample_variance(tilted);
    const double var_mc = sample_variance(plain);
    res.variance_reduction = var_is > 0.0 ? var_mc / var_is
                                          : (var_mc > 0.0 ? std::numeric_limits<double>::infinity()
                                                          : 1.0);
    return res;
}

VarianceFit variance_decomposition(const CoefficientSet& coeffs, const ModelDims& dims,
                                   const InitialFamily& init_family,
                                   const std::function<double(const EmpiricalMeasure&)>& f,
                                   const TimeGrid& grid, const std::vector<int>& n_list,
                                   const std::vector<double>& kappa_list, int replicas,
                                   std::uint64_t seed) {
    if (n_list.size() < 3 || kappa_list.size() < 3)
        fail("variance_decomposition: need at least three values of n and of kappa");
    if (replicas < 8) fail("variance_decomposition: replicas too small");

    VarianceFit fit;
    SimOptions options;
    options.record_flow = false;  // only the terminal measure is needed

    for (int n : n_list) {
        const InitialData init = init_family(n);
        for (double kappa : kappa_list) {
            const NoisePlan plan{seed};
            const std::vector<double> values = ensemble_values(replicas, [&](std::uint32_t r) {
                PathBundle bundle =
                    simulate_unweighted(coeffs, dims, init, grid, kappa, plan, r, nullptr, options);
                return f(bundle.flow.terminal());
            });
            VarianceCell cell;
            cell.n = n;
            cell.kappa = kappa;
            cell.var = sample_variance(values);
            cell.var_stderr = cell.var * std::sqrt(2.0 / (replicas - 1.0));
            fit.cells.push_back(cell);
        }
    }

    // Weighted least squares on (1/n, kappa^2) with relative weights.
    double s11 = 0.0, s12 = 0.0, s22 = 0.0, r1 = 0.0, r2 = 0.0;
    for (const auto& cell : fit.cells) {
        const double x1 = 1.0 / cell.n;
        const double x2 = cell.kappa * cell.kappa;
        const double w = 1.0 / std::max(cell.var * cell.var, 1e-300);
        s11 += w * x1 * x1;
        s12 += w * x1 * x2;
        s22 += w * x2 * x2;
        r1 += w * x1 * cell.var;
        r2 += w * x2 * cell.var;
    }
    const double det = s11 * s22 - s12 * s12;
    if (!(std::abs(det) > 1e-14 * std::max(s11 * s22, 1.0)))
        fail("variance_decomposition: singular design");
    fit.A = (s22 * r1 - s12 * r2) / det;
    fit.B = (s11 * r2 - s12 * r1) / det;

    double resid = 0.0;
    for (const auto& cell : fit.cells) {
        const double pred = fit.A / cell.n + fit.B * cell.kappa * cell.kappa;
        const double rel = (cell.var - pred) / std::max(cell.var, 1e-300);
        resid += rel * rel;
    }
    fit.rel_residual = std::sqrt(resid / static_cast<double>(fit.cells.size()));
    return fit;
}

}  // namespace mfcn
