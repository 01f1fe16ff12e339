#include "mfcn/limit.hpp"

#include <algorithm>
#include <cmath>

namespace mfcn {

namespace {

// One frozen-flow sweep: drive n_ref independent copies through the frozen
// measure flow. Copies are independent by construction, so the loop is
// parallel over copies with a barrier per step (the next frozen measure is
// only read, never written).
MeasureFlow frozen_flow_sweep(const CoefficientSet& coeffs, const ModelDims& dims,
                              const InitialData& init, const TimeGrid& grid,
                              const NoisePlan& plan, bool weighted, const MeasureFlow& frozen) {
    const int n = init.n;
    const int d = dims.d;
    const int m = dims.m;
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);

    std::vector<double> x(init.positions);
    std::vector<double> log_a(static_cast<std::size_t>(n), 0.0);
    if (weighted)
        for (int i = 0; i < n; ++i) log_a[static_cast<std::size_t>(i)] = std::log(init.weight(i));

    MeasureFlow out;
    out.grid = grid;
    out.measures.reserve(static_cast<std::size_t>(grid.points()));

    std::vector<double> weights(static_cast<std::size_t>(n));
    auto snapshot = [&]() {
        const double inv_n = 1.0 / n;
        if (weighted) {
            for (int i = 0; i < n; ++i)
                weights[static_cast<std::size_t>(i)] =
                    coeffs.eval_theta(std::exp(log_a[static_cast<std::size_t>(i)])) * inv_n;
        } else {
            std::fill(weights.begin(), weights.end(), inv_n);
        }
        out.measures.emplace_back(d, x, weights);
    };

    for (int j = 0; j < grid.steps; ++j) {
        snapshot();
        const EmpiricalMeasure& mu = frozen.measures[static_cast<std::size_t>(j)];
        parallel_for(0, n, [&](std::int64_t i) {
            thread_local std::vector<double> bx, sg, dw;
            bx.assign(static_cast<std::size_t>(d), 0.0);
            sg.assign(static_cast<std::size_t>(d) * m, 0.0);
            dw.resize(static_cast<std::size_t>(m));
            double* xi = x.data() + static_cast<std::ptrdiff_t>(i) * d;
            plan.normals(0, NoisePlan::particle_tag(i), static_cast<std::uint32_t>(j), dw.data(),
                         m);
            for (int c = 0; c < m; ++c) dw[static_cast<std::size_t>(c)] *= sqrt_dt;

            if (weighted) {
                const double cval = coeffs.c ? coeffs.c(xi, mu) : 0.0;
                double drift = cval;
                double noise = 0.0;
                if (coeffs.gamma) {
                    thread_local std::vector<double> gam;
                    gam.assign(static_cast<std::size_t>(m), 0.0);
                    coeffs.gamma(xi, mu, gam.data());
                    drift -= 0.5 * norm2sq(gam.data(), m);
                    noise += dot(gam.data(), dw.data(), m);
                }
                log_a[static_cast<std::size_t>(i)] += drift * dt + noise;
                if (!std::isfinite(log_a[static_cast<std::size_t>(i)]))
                    fail(strprintf("limit: non-finite weight (copy %lld, step %d)",
                                   static_cast<long long>(i), j + 1));
            }

            if (coeffs.b) coeffs.b(xi, mu, bx.data());
            if (coeffs.sigma) coeffs.sigma(xi, mu, sg.data());
            if (coeffs.b)
                for (int c = 0; c < d; ++c) xi[c] += bx[static_cast<std::size_t>(c)] * dt;
            if (coeffs.sigma) matvec_acc(sg.data(), dw.data(), xi, d, m);
            for (int c = 0; c < d; ++c)
                if (!std::isfinite(xi[c]))
                    fail(strprintf("limit: non-finite state (copy %lld, step %d)",
                                   static_cast<long long>(i), j + 1));
        });
    }
    snapshot();
    return out;
}

MeasureFlow constant_flow(const CoefficientSet& coeffs, const InitialData& init,
                          const TimeGrid& grid, bool weighted) {
    const int n = init.n;
    std::vector<double> weights(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        weights[static_cast<std::size_t>(i)] =
            (weighted ? coeffs.eval_theta(init.weight(i)) : 1.0) / n;
    EmpiricalMeasure mu(init.dim, init.positions, weights);
    MeasureFlow flow;
    flow.grid = grid;
    flow.measures.assign(static_cast<std::size_t>(grid.points()), mu);
    return flow;
}

double flow_distance(const MeasureFlow& a, const MeasureFlow& b, const BlDictionary& dict,
                     bool exact, int lp_cap) {
    double worst = 0.0;
    for (std::size_t j = 0; j < a.measures.size(); ++j) {
        const double dj = exact ? dbl_distance(a.measures[j], b.measures[j], lp_cap)
                                : dbl_distance_approx(a.measures[j], b.measures[j], dict);
        worst = std::max(worst, dj);
    }
    return worst;
}

std::pair<MeasureFlow, FixedPointReport> picard_iterate(const CoefficientSet& coeffs,
                                                        const ModelDims& dims,
                                                        const InitialFamily& family,
                                                        const TimeGrid& grid,
                                                        const PicardOptions& options,
                                                        std::uint64_t seed, bool weighted) {
    dims.check();
    if (options.n_ref < 1) fail("picard: n_ref must be >= 1");
    if (!(options.tol > 0.0)) fail("picard: tol must be positive");
    const InitialData init = family(options.n_ref);
    init.check();
    const NoisePlan plan{seed};
    const BlDictionary dict(dims.d, options.dict_size, seed ^ 0xD1C7u);
    const bool exact = 2 * options.n_ref <= options.lp_cap;

    MeasureFlow current = constant_flow(coeffs, init, grid, weighted);
    FixedPointReport report;
    report.n_ref = options.n_ref;
    for (int iter = 0; iter < options.max_iters; ++iter) {
        MeasureFlow next = frozen_flow_sweep(coeffs, dims, init, grid, plan, weighted, current);
        const double dist = flow_distance(next, current, dict, exact, options.lp_cap);
        report.distances.push_back(dist);
        report.iterations = iter + 1;
        current = std::move(next);
        if (dist <= options.tol) {
            report.converged = true;
            break;
        }
    }
    return {std::move(current), std::move(report)};
}

}  // namespace

std::pair<MeasureFlow, FixedPointReport> solve_mckean_vlasov(const CoefficientSet& coeffs,
                                                             const ModelDims& dims,
                                                             const InitialFamily& xi0,
                                                             const TimeGrid& grid,
                                                             const PicardOptions& options,
                                                             std::uint64_t seed) {
    return picard_iterate(coeffs, dims, xi0, grid, options, seed, false);
}

std::pair<MeasureFlow, FixedPointReport> solve_weighted_limit(const CoefficientSet& coeffs,
                                                              const ModelDims& dims,
                                                              const InitialFamily& eta0,
                                                              const TimeGrid& grid,
                                                              const PicardOptions& options,
                                                              std::uint64_t seed) {
    return picard_iterate(coeffs, dims, eta0, grid, options, seed, true);
}

MeasureFlow picard_sweep(const CoefficientSet& coeffs, const ModelDims& dims,
                         const InitialFamily& init_family, const TimeGrid& grid, int n_ref,
                         std::uint64_t seed, bool weighted, const MeasureFlow& frozen) {
    const InitialData init = init_family(n_ref);
    return frozen_flow_sweep(coeffs, dims, init, grid, NoisePlan{seed}, weighted, frozen);
}

BlDictionary picard_dictionary(const ModelDims& dims, const PicardOptions& options,
                               std::uint64_t seed) {
    return BlDictionary(dims.d, options.dict_size, seed ^ 0xD1C7u);
}

double flow_sup_distance(const MeasureFlow& a, const MeasureFlow& b, const BlDictionary& dict) {
    if (a.measures.size() != b.measures.size()) fail("flow_sup_distance: grid mismatch");
    double worst = 0.0;
    for (std::size_t j = 0; j < a.measures.size(); ++j)
        worst = std::max(worst, dbl_distance_approx(a.measures[j], b.measures[j], dict));
    return worst;
}

std::vector<LlnGapRow> lln_gap(const CoefficientSet& coeffs, const ModelDims& dims,
                               const InitialFamily& init_family, const TimeGrid& grid,
                               const std::function<double(int)>& kappa_rule,
                               const std::vector<int>& n_list, int replicas, std::uint64_t seed,
                               const MeasureFlow& reference, bool weighted,
                               const BlDictionary& dict) {
    reference.check();
    if (replicas < 2) fail("lln_gap: need at least two replicas");

    std::vector<std::vector<double>> ref_profiles;
    ref_profiles.reserve(reference.measures.size());
    for (const auto& mu : reference.measures) ref_profiles.push_back(dict.profile(mu));

    const NoisePlan plan{seed};
    SimOptions options;
    options.record_flow = true;

    std::vector<LlnGapRow> rows;
    for (int n : n_list) {
        if (n > reference.measures.front().size())
            fail("lln_gap: reference cloud smaller than requested ensemble size");
        const InitialData init = init_family(n);
        const double kappa = kappa_rule(n);
        auto sup_distance = [&](std::uint32_t replica) {
            const PathBundle bundle =
                weighted ? simulate_weighted(coeffs, dims, init, grid, kappa, plan, replica,
                                             nullptr, options)
                         : simulate_unweighted(coeffs, dims, init, grid, kappa, plan, replica,
                                               nullptr, options);
            double worst = 0.0;
            for (std::size_t j = 0; j < bundle.flow.measures.size(); ++j) {
                const auto prof = dict.profile(bundle.flow.measures[j]);
                worst = std::max(worst, BlDictionary::distance(prof, ref_profiles[j]));
            }
            return worst;
        };
        const std::vector<double> sups = ensemble_values(replicas, sup_distance);
        const MeanStderr ms = mean_stderr(sups);
        rows.push_back({n, kappa, ms.mean, ms.stderr_});
    }
    return rows;
}

}  // namespace mfcn
