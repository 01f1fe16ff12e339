#include "mfcn/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace mfcn {

namespace {

constexpr double kLogWeightOverflow = 700.0;  // exp() overflow guard

struct Stepper {
    const CoefficientSet& coeffs;
    const ModelDims& dims;
    const InitialData& init;
    const TimeGrid& grid;
    double kappa;
    const NoisePlan& plan;
    std::uint32_t replica;
    const ControlPolicy* control;
    SimOptions options;
    bool weighted;

    PathBundle run() {
        init.check();
        dims.check();
        if (static_cast<int>(init.dim) != dims.d) fail("simulate: initial data dimension mismatch");
        if (options.noise_substeps < 1) fail("simulate: noise_substeps must be >= 1");
        if (control) control->check(grid);
        const bool tilt_v = control && control->has_v() && control->v_energy(grid) > 0.0;
        if (options.record_girsanov && tilt_v && kappa == 0.0)
            fail("simulate: nonzero common control with kappa = 0 admits no change of measure");

        const int n = init.n;
        const int d = dims.d;
        const int m = dims.m;
        const int k = dims.k;
        const double dt = grid.dt();
        const int sub = options.noise_substeps;
        const double sqrt_dt_sub = std::sqrt(dt / sub);
        const bool use_common = kappa != 0.0;
        const bool has_u = control && control->has_u();
        const bool has_v = control && control->has_v();

        PathBundle out;
        out.controlled = control != nullptr;
        out.has_girsanov = options.record_girsanov && control != nullptr;
        out.flow.grid = grid;
        if (options.record_flow) out.flow.measures.reserve(static_cast<std::size_t>(grid.points()));
        if (options.record_paths) {
            out.paths.reserve(static_cast<std::size_t>(grid.points()) * n * d);
            if (weighted) out.weight_paths.reserve(static_cast<std::size_t>(grid.points()) * n);
        }

        std::vector<double> x(init.positions);
        std::vector<double> log_a;
        if (weighted) {
            log_a.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) log_a[static_cast<std::size_t>(i)] = std::log(init.weight(i));
        }

        std::vector<double> bx(static_cast<std::size_t>(d));
        std::vector<double> sg(static_cast<std::size_t>(d) * m);
        std::vector<double> al(static_cast<std::size_t>(d) * k);
        std::vector<double> dw(static_cast<std::size_t>(m));
        std::vector<double> db(static_cast<std::size_t>(k));
        std::vector<double> zscratch(static_cast<std::size_t>(std::max(m, k)));
        std::vector<double> uu(static_cast<std::size_t>(m));
        std::vector<double> wvec(static_cast<std::size_t>(m));
        std::vector<double> bvec(static_cast<std::size_t>(k));
        std::vector<double> gam(static_cast<std::size_t>(m));
        std::vector<double> bet(static_cast<std::size_t>(k));
        std::vector<double> weights(static_cast<std::size_t>(n));

        double girsanov = 0.0;
        double u_energy = 0.0;
        double v_energy = 0.0;

        auto snapshot_measure = [&](int step_index) {
            const double inv_n = 1.0 / n;
            if (weighted) {
                for (int i = 0; i < n; ++i) {
                    const double la = log_a[static_cast<std::size_t>(i)];
                    if (!(la < kLogWeightOverflow))
                        fail(strprintf("simulate: weight overflow (particle %d, step %d, replica %u)",
                                       i, step_index, replica));
                    weights[static_cast<std::size_t>(i)] =
                        coeffs.eval_theta(std::exp(la)) * inv_n;
                }
            } else {
                std::fill(weights.begin(), weights.end(), inv_n);
            }
            EmpiricalMeasure mu(d, x, weights);
            // Without record_flow only the terminal measure is retained.
            if (options.record_flow || step_index == grid.steps) out.flow.measures.push_back(mu);
            if (options.record_paths) {
                out.paths.insert(out.paths.end(), x.begin(), x.end());
                if (weighted)
                    for (int i = 0; i < n; ++i)
                        out.weight_paths.push_back(std::exp(log_a[static_cast<std::size_t>(i)]));
            }
            return mu;
        };

        for (int j = 0; j < grid.steps; ++j) {
            const EmpiricalMeasure mu = snapshot_measure(j);
            const double t = grid.time(j);

            std::fill(db.begin(), db.end(), 0.0);
            if (use_common) {
                for (int l = 0; l < sub; ++l) {
                    plan.normals(replica, NoisePlan::kCommonTag,
                                 static_cast<std::uint32_t>(j) * sub + l, zscratch.data(), k);
                    for (int c = 0; c < k; ++c) db[static_cast<std::size_t>(c)] += sqrt_dt_sub * zscratch[static_cast<std::size_t>(c)];
                }
            }
            const double* vj = has_v ? control->v_at(j) : nullptr;
            if (vj) {
                v_energy += norm2sq(vj, k) * dt;
                if (options.record_girsanov) {
                    if (kappa != 0.0) {
                        girsanov -= dot(vj, db.data(), k) / kappa;
                        girsanov -= 0.5 * norm2sq(vj, k) * dt / (kappa * kappa);
                    } else if (norm2sq(vj, k) > 0.0) {
                        fail("simulate: nonzero common control with kappa = 0 admits no change of measure");
                    }
                }
            }

            for (int i = 0; i < n; ++i) {
                double* xi = x.data() + static_cast<std::ptrdiff_t>(i) * d;

                std::fill(dw.begin(), dw.end(), 0.0);
                for (int l = 0; l < sub; ++l) {
                    plan.normals(replica, NoisePlan::particle_tag(i),
                                 static_cast<std::uint32_t>(j) * sub + l, zscratch.data(), m);
                    for (int c = 0; c < m; ++c) dw[static_cast<std::size_t>(c)] += sqrt_dt_sub * zscratch[static_cast<std::size_t>(c)];
                }

                std::copy(dw.begin(), dw.end(), wvec.begin());
                if (has_u) {
                    control->eval_u(j, t, xi, d, mu, uu.data());
                    for (int c = 0; c < m; ++c) wvec[static_cast<std::size_t>(c)] += uu[static_cast<std::size_t>(c)] * dt;
                    const double usq = norm2sq(uu.data(), m);
                    u_energy += usq * dt;
                    if (options.record_girsanov)
                        girsanov -= dot(uu.data(), dw.data(), m) + 0.5 * usq * dt;
                }

                for (int c = 0; c < k; ++c) bvec[static_cast<std::size_t>(c)] = kappa * db[static_cast<std::size_t>(c)];
                if (vj)
                    for (int c = 0; c < k; ++c) bvec[static_cast<std::size_t>(c)] += vj[c] * dt;

                if (weighted) {
                    const double cval = coeffs.c ? coeffs.c(xi, mu) : 0.0;
                    double drift = cval;
                    double noise = 0.0;
                    if (coeffs.gamma) {
                        coeffs.gamma(xi, mu, gam.data());
                        drift -= 0.5 * norm2sq(gam.data(), m);
                        noise += dot(gam.data(), wvec.data(), m);
                    }
                    if (coeffs.beta) {
                        coeffs.beta(xi, mu, bet.data());
                        drift -= 0.5 * kappa * kappa * norm2sq(bet.data(), k);
                        noise += dot(bet.data(), bvec.data(), k);
                    }
                    log_a[static_cast<std::size_t>(i)] += drift * dt + noise;
                }

                // All coefficients are evaluated at the step-start state
                // before any component of the update touches x_i.
                const bool want_alpha = coeffs.alpha && (use_common || vj);
                if (coeffs.b) coeffs.b(xi, mu, bx.data());
                if (coeffs.sigma) coeffs.sigma(xi, mu, sg.data());
                if (want_alpha) coeffs.alpha(xi, mu, al.data());
                if (coeffs.b)
                    for (int c = 0; c < d; ++c) xi[c] += bx[static_cast<std::size_t>(c)] * dt;
                if (coeffs.sigma) matvec_acc(sg.data(), wvec.data(), xi, d, m);
                if (want_alpha) matvec_acc(al.data(), bvec.data(), xi, d, k);

                for (int c = 0; c < d; ++c)
                    if (!std::isfinite(xi[c]))
                        fail(strprintf(
                            "simulate: non-finite state (particle %d, step %d, replica %u)", i,
                            j + 1, replica));
                if (weighted && !std::isfinite(log_a[static_cast<std::size_t>(i)]))
                    fail(strprintf(
                        "simulate: non-finite weight (particle %d, step %d, replica %u)", i, j + 1,
                        replica));
            }
        }

        snapshot_measure(grid.steps);
        if (options.record_flow) out.flow.check();
        out.girsanov_log_weight = out.has_girsanov ? girsanov : 0.0;
        out.running_u_cost = u_energy;
        out.running_v_cost = v_energy;
        return out;
    }
};

}  // namespace

PathBundle simulate_unweighted(const CoefficientSet& coeffs, const ModelDims& dims,
                               const InitialData& init, const TimeGrid& grid, double kappa,
                               const NoisePlan& plan, std::uint32_t replica,
                               const ControlPolicy* control, const SimOptions& options) {
    if (kappa < 0.0) fail("simulate: kappa must be nonnegative");
    Stepper s{coeffs, dims, init, grid, kappa, plan, replica, control, options, false};
    return s.run();
}

PathBundle simulate_weighted(const CoefficientSet& coeffs, const ModelDims& dims,
                             const InitialData& init, const TimeGrid& grid, double kappa,
                             const NoisePlan& plan, std::uint32_t replica,
                             const ControlPolicy* control, const SimOptions& options) {
    if (kappa < 0.0) fail("simulate: kappa must be nonnegative");
    for (int i = 0; i < init.n; ++i)
        if (!(init.weight(i) > 0.0)) fail("simulate_weighted: initial weights must be positive");
    Stepper s{coeffs, dims, init, grid, kappa, plan, replica, control, options, true};
    return s.run();
}

double girsanov_log_weight(const PathBundle& bundle) {
    if (!bundle.controlled) return 0.0;
    if (!bundle.has_girsanov)
        fail("girsanov_log_weight: bundle was simulated without record_girsanov");
    return bundle.girsanov_log_weight;
}

}  // namespace mfcn
