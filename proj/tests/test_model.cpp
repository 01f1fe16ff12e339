#include <doctest.h>

#include <cmath>

#include "mfcn/model.hpp"

using namespace mfcn;

TEST_CASE("dims validation") {
    CHECK_THROWS(ModelDims{0, 1, 1}.check());
    CHECK_NOTHROW(ModelDims{3, 2, 1}.check());
}

TEST_CASE("constant coefficients probe to zero lipschitz ratio") {
    const ModelDims dims{1, 1, 1};
    BuiltinParams p;
    p.sigma = 0.7;
    p.alpha = 0.3;
    const CoefficientSet coeffs = make_pure_brownian(dims, p);
    const ValidationReport rep = validate_model(coeffs, dims, 50, 1);
    CHECK(rep.ok());
    CHECK(rep.entry("sigma").max_lipschitz_ratio == doctest::Approx(0.0));
    CHECK(rep.entry("alpha").max_lipschitz_ratio == doctest::Approx(0.0));
    CHECK(rep.entry("sigma").max_norm == doctest::Approx(0.7));
}

TEST_CASE("linear drift probes to unit lipschitz ratio") {
    const ModelDims dims{1, 1, 1};
    BuiltinParams p;
    p.rate = 1.0;
    const CoefficientSet coeffs = make_ou(dims, p);
    const ValidationReport rep = validate_model(coeffs, dims, 100, 2);
    CHECK(rep.entry("b").max_lipschitz_ratio == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("measure-only flag violation is reported") {
    const ModelDims dims{1, 1, 1};
    CoefficientSet coeffs;
    coeffs.sigma = [](const double* x, const EmpiricalMeasure&, double* out) { out[0] = x[0]; };
    coeffs.flags.sigma_measure_only = true;
    const ValidationReport rep = validate_model(coeffs, dims, 20, 3);
    CHECK(!rep.ok());
    REQUIRE(rep.violations.size() >= 1);
    CHECK(rep.violations[0].find("sigma") != std::string::npos);
}

TEST_CASE("declared bound violation is reported") {
    const ModelDims dims{1, 1, 1};
    BuiltinParams p;
    p.sigma = 5.0;
    p.bound = 1.0;
    const CoefficientSet coeffs = make_pure_brownian(dims, p);
    const ValidationReport rep = validate_model(coeffs, dims, 20, 4);
    CHECK(!rep.ok());
}

TEST_CASE("gamma zero flag") {
    const ModelDims dims{1, 1, 1};
    CoefficientSet coeffs;
    coeffs.gamma = [](const double*, const EmpiricalMeasure&, double* out) { out[0] = 0.5; };
    coeffs.flags.gamma_zero = true;
    const ValidationReport rep = validate_model(coeffs, dims, 10, 5);
    CHECK(!rep.ok());
}

TEST_CASE("theta builtins") {
    const auto id = theta_identity();
    const auto lg = theta_log1p(2.0);
    CHECK(id(3.5) == 3.5);
    CHECK(lg(0.0) == 0.0);
    CHECK(lg(1.0) == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("initial data checks") {
    InitialData init = initial_point_cloud(4, 2, {1.0, -1.0});
    CHECK(init.n == 4);
    CHECK(init.position(3)[1] == -1.0);
    const InitialDataReport rep = check_initial_data(init);
    CHECK(rep.mean_sq_norm == doctest::Approx(2.0));
    CHECK(rep.warnings.empty());

    init.weights.assign(4, 1e-30);
    const InitialDataReport rep2 = check_initial_data(init, 100.0, 100.0, 10.0);
    CHECK(!rep2.warnings.empty());
}

TEST_CASE("gaussian cloud is deterministic in the seed") {
    const InitialData a = initial_gaussian_cloud(50, 2, {0.0, 0.0}, 1.0, 7);
    const InitialData b = initial_gaussian_cloud(50, 2, {0.0, 0.0}, 1.0, 7);
    const InitialData c = initial_gaussian_cloud(50, 2, {0.0, 0.0}, 1.0, 8);
    CHECK(a.positions == b.positions);
    CHECK(a.positions != c.positions);
}

TEST_CASE("mean-field family pulls toward the ensemble mean") {
    const ModelDims dims{1, 1, 1};
    BuiltinParams p;
    p.rate = 1.0;
    p.attract = 1.0;
    const CoefficientSet coeffs = make_linear_mean_field(dims, p);
    const EmpiricalMeasure mu(1, {2.0, 4.0}, {0.5, 0.5});
    const double x = 1.0;
    double out = 0.0;
    coeffs.b(&x, mu, &out);
    CHECK(out == doctest::Approx(-1.0 + 3.0));
}

TEST_CASE("unknown family throws") {
    CHECK_THROWS(make_builtin("heston", ModelDims{1, 1, 1}, BuiltinParams{}));
}
