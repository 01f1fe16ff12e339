#include <doctest.h>

#include <cmath>

#include "mfcn/rate.hpp"

using namespace mfcn;

namespace {
const ModelDims kScalar{1, 1, 1};
}

TEST_CASE("regime classification") {
    const RegimeSpeed critical = regime_speed(KappaRule::make_critical(2.0));
    CHECK(critical.speed == Speed::n);
    CHECK(critical.lambda == doctest::Approx(2.0));
    CHECK(critical.critical);

    const RegimeSpeed fast = regime_speed(KappaRule::make_power(1.0, 1.0));
    CHECK(fast.speed == Speed::n);
    CHECK(!fast.critical);

    const RegimeSpeed slow = regime_speed(KappaRule::make_power(1.0, 0.25));
    CHECK(slow.speed == Speed::kappa_inv_sq);

    const RegimeSpeed half = regime_speed(KappaRule::make_power(1.5, 0.5));
    CHECK(half.critical);
    CHECK(half.lambda == doctest::Approx(1.5));

    CHECK(KappaRule::make_power(1.0, 0.25).kappa(16) == doctest::Approx(0.5));
    CHECK(KappaRule::make_critical(2.0).kappa(4) == doctest::Approx(1.0));
}

TEST_CASE("quadratic oracle closed forms") {
    CHECK(quadratic_rate_oracle(0.0, 1.0, 1.0, RateRegime::critical) == 0.0);
    CHECK(quadratic_rate_oracle(1.0, 1.0, 1.0, RateRegime::critical) == doctest::Approx(0.25));
    CHECK(quadratic_rate_oracle(0.8, 1.0, 1.0, RateRegime::critical) == doctest::Approx(0.16));
    CHECK(quadratic_rate_oracle(1.0, 1.0, 0.0, RateRegime::individual_only) ==
          doctest::Approx(0.5));
    CHECK(quadratic_rate_oracle(1.0, 1.0, 0.0, RateRegime::common_only) == doctest::Approx(0.5));
    CHECK_THROWS(quadratic_rate_oracle(1.0, -1.0, 1.0, RateRegime::critical));
}

TEST_CASE("quadratic oracle monotonicity") {
    CHECK(quadratic_rate_oracle(1.2, 1.0, 1.0, RateRegime::critical) >
          quadratic_rate_oracle(0.9, 1.0, 1.0, RateRegime::critical));
    CHECK(quadratic_rate_oracle(1.0, 2.0, 1.0, RateRegime::critical) <
          quadratic_rate_oracle(1.0, 1.0, 1.0, RateRegime::critical));
    CHECK(quadratic_rate_oracle(1.0, 1.0, 2.0, RateRegime::critical) <
          quadratic_rate_oracle(1.0, 1.0, 1.0, RateRegime::critical));
    // a small common-noise budget can only cheapen deviations
    CHECK(quadratic_rate_oracle(1.0, 1.0, 0.3, RateRegime::critical) <
          quadratic_rate_oracle(1.0, 1.0, 0.0, RateRegime::individual_only));
}

TEST_CASE("closed form agrees with the piecewise-constant minimization") {
    int idx = 0;
    for (double a : {0.3, 0.8, 1.5, -0.7}) {
        for (double T : {0.5, 1.0, 2.5}) {
            for (double lambda : {0.4, 1.0, 2.0}) {
                ++idx;
                const double closed = quadratic_rate_oracle(a, T, lambda, RateRegime::critical);
                const double numeric = quadratic_rate_numeric(a, T, lambda, RateRegime::critical);
                CHECK(numeric == doctest::Approx(closed).epsilon(1e-9));
            }
            const double c1 = quadratic_rate_oracle(a, T, 0.0, RateRegime::individual_only);
            CHECK(quadratic_rate_numeric(a, T, 0.0, RateRegime::individual_only) ==
                  doctest::Approx(c1).epsilon(1e-9));
            CHECK(quadratic_rate_numeric(a, T, 0.0, RateRegime::common_only) ==
                  doctest::Approx(c1).epsilon(1e-9));
        }
    }
    CHECK(idx == 36);
}

TEST_CASE("mean tilt reaches the threshold in expectation") {
    const TimeGrid grid(1.0, 8);
    const ControlPolicy tilt = pure_brownian_mean_tilt(0.8, grid, kScalar, 100, 0.1);
    double shift = 0.0;
    for (int j = 0; j < grid.steps; ++j)
        shift += (tilt.u_table[static_cast<std::size_t>(j)] + tilt.v[static_cast<std::size_t>(j)]) *
                 grid.dt();
    CHECK(shift == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("whole-space event has zero decay rate") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const auto family = [](int n) { return initial_point_cloud(n, 1, {0.0}); };
    const FlowEvent everything = [](const MeasureFlow&) { return true; };
    const RateEstimate est =
        estimate_decay_rate(coeffs, kScalar, family, everything, KappaRule::make_critical(1.0),
                            {20, 40}, TimeGrid(1.0, 4), 200, 51, false);
    for (const auto& pt : est.points) CHECK(pt.rate == doctest::Approx(0.0));
    CHECK(est.extrapolated == doctest::Approx(0.0));
}

TEST_CASE("unreachable event without importance sampling advises use_is") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const auto family = [](int n) { return initial_point_cloud(n, 1, {0.0}); };
    CHECK_THROWS_WITH_AS(
        estimate_decay_rate(coeffs, kScalar, family, event_terminal_mean_at_least(0, 50.0),
                            KappaRule::make_critical(1.0), {20, 40}, TimeGrid(1.0, 4), 100, 52,
                            false),
        doctest::Contains("use_is"), std::runtime_error);
}

TEST_CASE("critical-regime decay rate lands near the quadratic value") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const auto family = [](int n) { return initial_point_cloud(n, 1, {0.0}); };
    const double a = 0.8;
    const TimeGrid grid(1.0, 8);
    const TiltBuilder tilt = [&](int n, double kappa) {
        return pure_brownian_mean_tilt(a, grid, kScalar, n, kappa);
    };
    const RateEstimate est =
        estimate_decay_rate(coeffs, kScalar, family, event_terminal_mean_at_least(0, a),
                            KappaRule::make_critical(1.0), {50, 100, 200}, grid, 4000, 53, true,
                            tilt);
    const double oracle = quadratic_rate_oracle(a, 1.0, 1.0, RateRegime::critical);
    CHECK(std::abs(est.extrapolated - oracle) / oracle < 0.15);
    // rate estimates carry their own uncertainty
    for (const auto& pt : est.points) CHECK(pt.rate_stderr > 0.0);
    // common noise can only cheapen deviations
    const double lambda0 = quadratic_rate_oracle(a, 1.0, 0.0, RateRegime::individual_only);
    for (const auto& pt : est.points) CHECK(pt.rate < lambda0);
}

TEST_CASE("critical rule normalizations differ by the constant lambda^2") {
    const CoefficientSet coeffs = make_pure_brownian(kScalar);
    const auto family = [](int n) { return initial_point_cloud(n, 1, {0.0}); };
    const double a = 0.5;
    const TimeGrid grid(1.0, 6);
    const double lambda = 1.3;
    const TiltBuilder tilt = [&](int n, double kappa) {
        return pure_brownian_mean_tilt(a, grid, kScalar, n, kappa);
    };
    const RegimeContrast contrast = regime_contrast(
        coeffs, kScalar, family, event_terminal_mean_at_least(0, a),
        {KappaRule::make_critical(lambda)}, {30, 60}, grid, 2000, 54, true, tilt);
    for (const auto& row : contrast.rows)
        CHECK(row.rate_speed_kappa ==
              doctest::Approx(lambda * lambda * row.rate_speed_n).epsilon(1e-12));
}
