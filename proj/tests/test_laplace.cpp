#include <doctest.h>

#include <cmath>

#include "mfcn/laplace.hpp"
#include "mfcn/rng.hpp"

using namespace mfcn;

namespace {

const ModelDims kScalar{1, 1, 1};

double gaussian_clip_mean(double m, double s, double lo, double hi) {
    const double zl = (lo - m) / s;
    const double zh = (hi - m) / s;
    const double phi_l = std::exp(-0.5 * zl * zl) / std::sqrt(2.0 * M_PI);
    const double phi_h = std::exp(-0.5 * zh * zh) / std::sqrt(2.0 * M_PI);
    return lo * normal_cdf(zl) + hi * normal_upper_tail(zh) +
           m * (normal_cdf(zh) - normal_cdf(zl)) - s * (phi_h - phi_l);
}

}  // namespace

TEST_CASE("constant functional is reproduced exactly") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(10, 1, {0.0});
    const LaplaceEstimate est =
        estimate_laplace_direct(coeffs, kScalar, init, functional_constant(0.37), TimeGrid(1.0, 3),
                                0.1, 64, 31, Speed::n);
    CHECK(est.value == doctest::Approx(0.37).epsilon(1e-14));
    CHECK(est.stderr_ == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(est.ess == doctest::Approx(64.0));
    CHECK(!est.degenerate);
}

TEST_CASE("laplace value stays within the functional's range") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(25, 1, {0.0});
    const Functional F = functional_clipped_terminal_mean(0, 0.4);
    const LaplaceEstimate est = estimate_laplace_direct(coeffs, kScalar, init, F, TimeGrid(1.0, 5),
                                                        0.05, 500, 32, Speed::n);
    CHECK(est.value >= -0.4 - 3.0 * est.stderr_);
    CHECK(est.value <= 0.4 + 3.0 * est.stderr_);
}

TEST_CASE("single-particle sign functional matches the normal-cdf value") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const double x0 = 0.3;
    const InitialData init = initial_point_cloud(1, 1, {x0});
    Functional F;
    F.bound = 1.0;
    F.tag = Functional::Smoothness::discontinuous;
    F.eval = [](const MeasureFlow& flow) {
        return flow.terminal().mean()[0] >= 0.0 ? 1.0 : 0.0;
    };
    const int replicas = 40000;
    const LaplaceEstimate est = estimate_laplace_direct(coeffs, kScalar, init, F, TimeGrid(1.0, 1),
                                                        0.0, replicas, 33, Speed::n);
    const double p = normal_cdf(x0);  // P(x0 + W(1) >= 0)
    const double expected = -std::log(p * std::exp(-1.0) + (1.0 - p));
    CHECK(std::abs(est.value - expected) < 3.0 * est.stderr_);
}

TEST_CASE("jensen bound against the plain mean") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(30, 1, {0.0});
    const Functional F = functional_clipped_terminal_mean(0, 0.3);
    const TimeGrid grid(1.0, 5);
    const NoisePlan plan{34};
    const int replicas = 2000;
    const LaplaceEstimate est =
        estimate_laplace_direct(coeffs, kScalar, init, F, grid, 0.05, replicas, 34, Speed::n);
    const std::vector<double> values = ensemble_values(replicas, [&](std::uint32_t r) {
        return F(simulate_unweighted(coeffs, kScalar, init, grid, 0.05, plan, r).flow);
    });
    const MeanStderr plain = mean_stderr(values);
    CHECK(est.value <= plain.mean + 3.0 * (plain.stderr_ + est.stderr_));
}

TEST_CASE("laplace estimate is invariant to the thread count") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(20, 1, {0.0});
    const Functional F = functional_clipped_terminal_mean(0, 0.5);
    auto run = [&](int threads) {
        set_max_threads(threads);
        return estimate_laplace_direct(coeffs, kScalar, init, F, TimeGrid(1.0, 4), 0.1, 256, 35,
                                       Speed::n)
            .value;
    };
    const double serial = run(1);
    const double threaded = run(2);
    set_max_threads(0);
    CHECK(serial == threaded);
}

TEST_CASE("degeneracy diagnostics flag a collapsing log-sum-exp") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(2000, 1, {0.0});
    const Functional F = functional_clipped_terminal_mean(0, 1.0);
    const LaplaceEstimate est = estimate_laplace_direct(coeffs, kScalar, init, F, TimeGrid(1.0, 2),
                                                        0.0, 40, 36, Speed::n);
    CHECK(est.degenerate);
    CHECK(est.ess < 10.0);
}

TEST_CASE("zero control cost equals the plain functional mean") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(15, 1, {0.1});
    const Functional F = functional_clipped_terminal_mean(0, 0.6);
    const TimeGrid grid(1.0, 6);
    const ControlPolicy zero = ControlPolicy::zero(1, 1, grid.steps);
    const ControlCostEstimate cost =
        control_cost(coeffs, kScalar, init, F, grid, 0.1, zero, 400, 37, false, Speed::n);
    CHECK(cost.u_part == 0.0);
    CHECK(cost.v_part == 0.0);
    CHECK(cost.total == doctest::Approx(cost.f_part).epsilon(1e-14));
}

TEST_CASE("admissible controls upper-bound the laplace value") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const int n = 20;
    const InitialData init = initial_point_cloud(n, 1, {0.0});
    const Functional F = functional_clipped_terminal_mean(0, 0.3);
    const TimeGrid grid(1.0, 8);
    const double kappa = 1.0 / std::sqrt(static_cast<double>(n));
    const LaplaceEstimate direct =
        estimate_laplace_direct(coeffs, kScalar, init, F, grid, kappa, 4000, 38, Speed::n);
    Prng rng(380);
    for (int trial = 0; trial < 5; ++trial) {
        ControlPolicy policy = ControlPolicy::zero(1, 1, grid.steps);
        for (int j = 0; j < grid.steps; ++j) {
            policy.u_table[static_cast<std::size_t>(j)] = rng.uniform(-0.8, 0.8);
            policy.v[static_cast<std::size_t>(j)] = rng.uniform(-0.8, 0.8);
        }
        const ControlCostEstimate cost =
            control_cost(coeffs, kScalar, init, F, grid, kappa, policy, 800, 39, false, Speed::n);
        CHECK(cost.total + 3.0 * (cost.stderr_ + direct.stderr_) >= direct.value);
    }
}

TEST_CASE("deterministic drift control cost matches the closed form") {
    // b = 0, sigma = 0, alpha = 1, constant v: the ensemble mean is Gaussian
    // from the common noise alone and every cost term is explicit.
    BuiltinParams p;
    p.sigma = 0.0;
    p.alpha = 1.0;
    const CoefficientSet coeffs = make_pure_brownian(kScalar, p);
    const int n = 50;
    const double kappa = 0.2;
    const double v0 = 0.6;
    const double clip = 0.5;
    const double x0 = -0.1;
    const InitialData init = initial_point_cloud(n, 1, {x0});
    const TimeGrid grid(1.0, 10);
    ControlPolicy policy = ControlPolicy::zero(1, 1, grid.steps);
    for (int j = 0; j < grid.steps; ++j) policy.v[static_cast<std::size_t>(j)] = v0;
    const Functional F = functional_clipped_terminal_mean(0, clip);
    const ControlCostEstimate cost =
        control_cost(coeffs, kScalar, init, F, grid, kappa, policy, 3000, 40, false, Speed::n);

    const double v_cost = v0 * v0 / (2.0 * n * kappa * kappa);
    const double f_mean = gaussian_clip_mean(x0 + v0, kappa, -clip, clip);
    CHECK(cost.v_part == doctest::Approx(v_cost).epsilon(1e-12));
    CHECK(std::abs(cost.total - (v_cost + f_mean)) < 3.0 * cost.stderr_);
}

TEST_CASE("optimizer keeps the zero control when the functional is flat") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(10, 1, {0.0});
    const TimeGrid grid(1.0, 8);
    ControlFamily family;
    family.m = family.k = family.d = 1;
    family.steps = grid.steps;
    family.u_pieces = 2;
    family.v_pieces = 2;
    OptimizeOptions opt;
    opt.budget = 40;
    opt.eval_replicas = 64;
    opt.final_replicas = 128;
    const OptimizeResult res = optimize_controls(coeffs, kScalar, init, functional_constant(0.25),
                                                 grid, 0.1, family, 41, false, Speed::n, opt);
    CHECK(res.cost.f_part == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(res.cost.u_part + res.cost.v_part <= 0.02);
    CHECK(std::abs(res.cost.total - 0.25) < 0.03);
    CHECK(res.budget_exhausted);
}

TEST_CASE("doubling the optimizer budget never worsens the tracked best") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(12, 1, {0.0});
    const TimeGrid grid(1.0, 8);
    const Functional F = functional_clipped_terminal_mean(0, 0.3);
    ControlFamily family;
    family.m = family.k = family.d = 1;
    family.steps = grid.steps;
    family.u_pieces = 2;
    family.v_pieces = 2;
    OptimizeOptions small;
    small.budget = 60;
    small.eval_replicas = 32;
    small.final_replicas = 64;
    OptimizeOptions big = small;
    big.budget = 120;
    const double kappa = 0.2;
    const OptimizeResult a =
        optimize_controls(coeffs, kScalar, init, F, grid, kappa, family, 42, false, Speed::n, small);
    const OptimizeResult b =
        optimize_controls(coeffs, kScalar, init, F, grid, kappa, family, 42, false, Speed::n, big);
    CHECK(b.crn_best_cost <= a.crn_best_cost + 1e-12);
}

TEST_CASE("importance sampling is exact for the whole space and unbiased for events") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const int n = 50;
    const InitialData init = initial_point_cloud(n, 1, {0.0});
    const TimeGrid grid(1.0, 6);
    const double kappa = 0.1;

    const FlowEvent everything = [](const MeasureFlow&) { return true; };
    const ControlPolicy zero = ControlPolicy::zero(1, 1, grid.steps);
    const ImportanceSamplingResult whole = importance_sampling_probability(
        coeffs, kScalar, init, everything, grid, kappa, zero, 200, 43);
    CHECK(whole.p_is == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(whole.is_stderr == doctest::Approx(0.0).epsilon(1e-14));

    ControlPolicy tilt = ControlPolicy::zero(1, 1, grid.steps);
    for (int j = 0; j < grid.steps; ++j) tilt.u_table[static_cast<std::size_t>(j)] = 0.2;
    const ImportanceSamplingResult tilted = importance_sampling_probability(
        coeffs, kScalar, init, everything, grid, kappa, tilt, 4000, 43);
    CHECK(std::abs(tilted.p_is - 1.0) < 3.0 * tilted.is_stderr);

    const FlowEvent reachable = event_terminal_mean_at_least(0, 0.1);
    const ImportanceSamplingResult cross = importance_sampling_probability(
        coeffs, kScalar, init, reachable, grid, kappa, tilt, 4000, 44);
    const double joint = std::sqrt(cross.is_stderr * cross.is_stderr +
                                   cross.mc_stderr * cross.mc_stderr);
    CHECK(std::abs(cross.p_is - cross.p_mc) < 3.0 * joint);
}

TEST_CASE("importance sampling beats plain monte carlo in the rare regime") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const int n = 100;
    const double kappa = 0.1;
    const double a = 0.5;
    const InitialData init = initial_point_cloud(n, 1, {0.0});
    const TimeGrid grid(1.0, 6);
    ControlPolicy tilt = ControlPolicy::zero(1, 1, grid.steps);
    const double lam_sq = n * kappa * kappa;
    const double u0 = a / (1.0 + lam_sq);
    for (int j = 0; j < grid.steps; ++j) {
        tilt.u_table[static_cast<std::size_t>(j)] = u0;
        tilt.v[static_cast<std::size_t>(j)] = lam_sq * u0;
    }
    const ImportanceSamplingResult res = importance_sampling_probability(
        coeffs, kScalar, init, event_terminal_mean_at_least(0, a), grid, kappa, tilt, 4000, 45);
    const double closed = normal_upper_tail(a / std::sqrt((1.0 + lam_sq) / n));
    CHECK(std::abs(res.p_is - closed) < 3.0 * res.is_stderr);
    CHECK(res.is_stderr <= res.mc_stderr);
    CHECK(res.variance_reduction > 1.0);
}

TEST_CASE("variance decomposition vanishing coefficients") {
    const TimeGrid grid(1.0, 4);
    const auto family = [](int n) { return initial_point_cloud(n, 1, {0.0}); };
    const auto f = [](const EmpiricalMeasure& mu) { return mu.mean()[0]; };
    const std::vector<int> n_list = {50, 100, 200};
    const std::vector<double> kappa_list = {0.02, 0.06, 0.1};

    BuiltinParams no_common;
    no_common.sigma = 1.0;
    no_common.alpha = 0.0;
    const VarianceFit fit_a = variance_decomposition(make_pure_brownian(kScalar, no_common),
                                                     kScalar, family, f, grid, n_list, kappa_list,
                                                     2000, 46);
    CHECK(fit_a.A == doctest::Approx(1.0).epsilon(0.10));
    CHECK(std::abs(fit_a.B) < 0.15);

    BuiltinParams no_individual;
    no_individual.sigma = 0.0;
    no_individual.alpha = 1.0;
    const VarianceFit fit_b = variance_decomposition(make_pure_brownian(kScalar, no_individual),
                                                     kScalar, family, f, grid, n_list, kappa_list,
                                                     2000, 47);
    CHECK(fit_b.B == doctest::Approx(1.0).epsilon(0.10));
    CHECK(std::abs(fit_b.A) < 0.02);

    CHECK_THROWS(variance_decomposition(make_pure_brownian(kScalar), kScalar, family, f, grid,
                                        {50, 100}, kappa_list, 2000, 48));
    CHECK_THROWS_WITH_AS(
        variance_decomposition(make_pure_brownian(kScalar), kScalar, family, f, grid,
                               {100, 100, 100}, {0.05, 0.05, 0.05}, 64, 49),
        doctest::Contains("singular"), std::runtime_error);
}

TEST_CASE("functional bound violations are caught") {
    Functional F;
    F.bound = 0.1;
    F.eval = [](const MeasureFlow&) { return 0.5; };
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const InitialData init = initial_point_cloud(2, 1, {0.0});
    CHECK_THROWS(estimate_laplace_direct(coeffs, kScalar, init, F, TimeGrid(1.0, 2), 0.0, 8, 50,
                                         Speed::n));
}
