#include "mfcn/model.hpp"

#include <algorithm>
#include <cmath>

#include "mfcn/metric.hpp"
#include "mfcn/rng.hpp"

namespace mfcn {

CoefficientSet::ThetaFn theta_identity() {
    return [](double a) { return a; };
}

CoefficientSet::ThetaFn theta_log1p(double scale) {
    return [scale](double a) { return scale * std::log1p(a); };
}

void InitialData::check() const {
    if (n < 1) fail("InitialData: need at least one particle");
    if (dim < 1) fail("InitialData: dimension must be >= 1");
    if (positions.size() != static_cast<std::size_t>(n) * dim)
        fail("InitialData: position array has wrong length");
    if (!weights.empty() && weights.size() != static_cast<std::size_t>(n))
        fail("InitialData: weight array has wrong length");
    for (double w : weights)
        if (!(w > 0.0)) fail("InitialData: weights must be strictly positive");
}

InitialData initial_point_cloud(int n, int dim, const std::vector<double>& x0) {
    if (static_cast<int>(x0.size()) != dim) fail("initial_point_cloud: x0 has wrong dimension");
    InitialData init;
    init.n = n;
    init.dim = dim;
    init.positions.resize(static_cast<std::size_t>(n) * dim);
    for (int i = 0; i < n; ++i)
        std::copy(x0.begin(), x0.end(), init.positions.begin() + static_cast<std::ptrdiff_t>(i) * dim);
    init.check();
    return init;
}

InitialData initial_gaussian_cloud(int n, int dim, const std::vector<double>& x0, double sd,
                                   std::uint64_t seed) {
    if (static_cast<int>(x0.size()) != dim) fail("initial_gaussian_cloud: x0 has wrong dimension");
    InitialData init;
    init.n = n;
    init.dim = dim;
    init.positions.resize(static_cast<std::size_t>(n) * dim);
    NoisePlan plan{seed};
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (int i = 0; i < n; ++i) {
        plan.normals(0, NoisePlan::particle_tag(i), NoisePlan::kInitStep, z.data(), dim);
        for (int c = 0; c < dim; ++c)
            init.positions[static_cast<std::size_t>(i) * dim + c] = x0[static_cast<std::size_t>(c)] + sd * z[static_cast<std::size_t>(c)];
    }
    init.check();
    return init;
}

InitialDataReport check_initial_data(const InitialData& init, double max_sq_norm,
                                     double max_sq_weight, double max_neg_log) {
    init.check();
    InitialDataReport rep;
    std::vector<double> sq(static_cast<std::size_t>(init.n));
    for (int i = 0; i < init.n; ++i) sq[static_cast<std::size_t>(i)] = norm2sq(init.position(i), init.dim);
    rep.mean_sq_norm = pairwise_sum(sq) / init.n;
    for (int i = 0; i < init.n; ++i) {
        const double a = init.weight(i);
        sq[static_cast<std::size_t>(i)] = a * a;
    }
    rep.mean_sq_weight = pairwise_sum(sq) / init.n;
    for (int i = 0; i < init.n; ++i)
        sq[static_cast<std::size_t>(i)] = std::max(0.0, -std::log(init.weight(i)));
    rep.mean_neg_log_weight = pairwise_sum(sq) / init.n;

    if (rep.mean_sq_norm > max_sq_norm)
        rep.warnings.push_back(strprintf("mean squared norm %.3g exceeds %.3g", rep.mean_sq_norm,
                                         max_sq_norm));
    if (rep.mean_sq_weight > max_sq_weight)
        rep.warnings.push_back(strprintf("mean squared weight %.3g exceeds %.3g",
                                         rep.mean_sq_weight, max_sq_weight));
    if (rep.mean_neg_log_weight > max_neg_log)
        rep.warnings.push_back(strprintf("mean negative log weight %.3g exceeds %.3g",
                                         rep.mean_neg_log_weight, max_neg_log));
    return rep;
}

const ValidationEntry& ValidationReport::entry(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    fail("ValidationReport: no entry named " + name);
}

namespace {

EmpiricalMeasure random_probe_measure(Prng& rng, int dim) {
    const int atoms = 2 + static_cast<int>(rng.below(7));
    std::vector<double> pts(static_cast<std::size_t>(atoms) * dim);
    std::vector<double> w(static_cast<std::size_t>(atoms));
    for (double& v : pts) v = 2.0 * rng.normal();
    double tot = 0.0;
    for (double& v : w) {
        v = rng.uniform(0.05, 1.0);
        tot += v;
    }
    const double mass = rng.uniform(0.5, 2.0);
    for (double& v : w) v *= mass / tot;
    return EmpiricalMeasure(dim, std::move(pts), std::move(w));
}

struct ProbePoint {
    std::vector<double> x;
    EmpiricalMeasure mu;
};

double vec_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return std::sqrt(s);
}

}  // namespace

ValidationReport validate_model(const CoefficientSet& coeffs, const ModelDims& dims, int probes,
                                std::uint64_t seed) {
    dims.check();
    if (probes < 1) fail("validate_model: probes must be >= 1");
    Prng rng(seed ^ 0x7A11DA7Eu);
    ValidationReport rep;

    struct Coef {
        const char* name;
        int out_len;
        std::function<void(const double*, const EmpiricalMeasure&, double*)> eval;
        bool present;
        bool bounded;  // subject to the declared bound
    };
    std::vector<Coef> coefs;
    coefs.push_back({"b", dims.d,
                     [&](const double* x, const EmpiricalMeasure& mu, double* out) {
                         std::fill(out, out + dims.d, 0.0);
                         if (coeffs.b) coeffs.b(x, mu, out);
                     },
                     static_cast<bool>(coeffs.b), false});
    coefs.push_back({"sigma", dims.d * dims.m,
                     [&](const double* x, const EmpiricalMeasure& mu, double* out) {
                         std::fill(out, out + dims.d * dims.m, 0.0);
                         if (coeffs.sigma) coeffs.sigma(x, mu, out);
                     },
                     static_cast<bool>(coeffs.sigma), true});
    coefs.push_back({"alpha", dims.d * dims.k,
                     [&](const double* x, const EmpiricalMeasure& mu, double* out) {
                         std::fill(out, out + dims.d * dims.k, 0.0);
                         if (coeffs.alpha) coeffs.alpha(x, mu, out);
                     },
                     static_cast<bool>(coeffs.alpha), true});
    coefs.push_back({"c", 1,
                     [&](const double* x, const EmpiricalMeasure& mu, double* out) {
                         out[0] = coeffs.c ? coeffs.c(x, mu) : 0.0;
                     },
                     static_cast<bool>(coeffs.c), true});
    coefs.push_back({"gamma", dims.m,
                     [&](const double* x, const EmpiricalMeasure& mu, double* out) {
                         std::fill(out, out + dims.m, 0.0);
                         if (coeffs.gamma) coeffs.gamma(x, mu, out);
                     },
                     static_cast<bool>(coeffs.gamma), true});
    coefs.push_back({"beta", dims.k,
                     [&](const double* x, const EmpiricalMeasure& mu, double* out) {
                         std::fill(out, out + dims.k, 0.0);
                         if (coeffs.beta) coeffs.beta(x, mu, out);
                     },
                     static_cast<bool>(coeffs.beta), true});

    // Probe pairs: vary x at fixed mu, vary mu at fixed x, and vary both.
    std::vector<ProbePoint> pts;
    pts.reserve(static_cast<std::size_t>(probes));
    for (int p = 0; p < probes; ++p) {
        ProbePoint pp;
        pp.x.resize(static_cast<std::size_t>(dims.d));
        for (double& v : pp.x) v = 2.0 * rng.normal();
        pp.mu = random_probe_measure(rng, dims.d);
        pts.push_back(std::move(pp));
    }

    for (auto& cf : coefs) {
        ValidationEntry ent;
        ent.name = cf.name;
        ent.probes = probes;
        std::vector<double> va(static_cast<std::size_t>(cf.out_len));
        std::vector<double> vb(static_cast<std::size_t>(cf.out_len));
        for (int p = 0; p < probes; ++p) {
            const ProbePoint& a = pts[static_cast<std::size_t>(p)];
            const ProbePoint& b = pts[static_cast<std::size_t>((p + 1) % probes)];
            cf.eval(a.x.data(), a.mu, va.data());
            ent.max_norm = std::max(ent.max_norm, std::sqrt(norm2sq(va.data(), cf.out_len)));

            // x-direction ratio at fixed measure
            cf.eval(b.x.data(), a.mu, vb.data());
            const double dx = vec_dist(a.x, b.x);
            if (dx > 1e-9)
                ent.max_lipschitz_ratio =
                    std::max(ent.max_lipschitz_ratio, vec_dist(va, vb) / dx);

            // joint ratio with the bounded-Lipschitz denominator
            cf.eval(b.x.data(), b.mu, vb.data());
            const double dmu = dbl_distance(a.mu, b.mu);
            if (dx + dmu > 1e-9)
                ent.max_lipschitz_ratio =
                    std::max(ent.max_lipschitz_ratio, vec_dist(va, vb) / (dx + dmu));
        }
        if (cf.bounded && cf.present && ent.max_norm > coeffs.flags.bound)
            rep.violations.push_back(strprintf("%s: observed norm %.4g exceeds declared bound %.4g",
                                               cf.name, ent.max_norm, coeffs.flags.bound));
        rep.entries.push_back(std::move(ent));
    }

    // Declared-flag spot checks.
    if (coeffs.flags.sigma_measure_only && coeffs.sigma) {
        std::vector<double> va(static_cast<std::size_t>(dims.d) * dims.m);
        std::vector<double> vb(static_cast<std::size_t>(dims.d) * dims.m);
        for (int p = 0; p < probes; ++p) {
            const ProbePoint& a = pts[static_cast<std::size_t>(p)];
            const ProbePoint& b = pts[static_cast<std::size_t>((p + 1) % probes)];
            coeffs.sigma(a.x.data(), a.mu, va.data());
            coeffs.sigma(b.x.data(), a.mu, vb.data());
            if (vec_dist(va, vb) > 1e-9) {
                rep.violations.push_back(
                    "sigma: declared measure-only but value depends on the state argument");
                break;
            }
        }
    }
    if (coeffs.flags.gamma_measure_only && coeffs.gamma) {
        std::vector<double> va(static_cast<std::size_t>(dims.m));
        std::vector<double> vb(static_cast<std::size_t>(dims.m));
        for (int p = 0; p < probes; ++p) {
            const ProbePoint& a = pts[static_cast<std::size_t>(p)];
            const ProbePoint& b = pts[static_cast<std::size_t>((p + 1) % probes)];
            coeffs.gamma(a.x.data(), a.mu, va.data());
            coeffs.gamma(b.x.data(), a.mu, vb.data());
            if (vec_dist(va, vb) > 1e-9) {
                rep.violations.push_back(
                    "gamma: declared measure-only but value depends on the state argument");
                break;
            }
        }
    }
    if (coeffs.flags.gamma_zero && coeffs.gamma) {
        std::vector<double> va(static_cast<std::size_t>(dims.m));
        for (int p = 0; p < probes; ++p) {
            const ProbePoint& a = pts[static_cast<std::size_t>(p)];
            coeffs.gamma(a.x.data(), a.mu, va.data());
            if (std::sqrt(norm2sq(va.data(), dims.m)) > 1e-12) {
                rep.violations.push_back("gamma: declared zero but evaluates nonzero");
                break;
            }
        }
    }
    if (coeffs.theta) {
        // Lipschitz / log-growth spot checks on R_+.
        double max_ratio = 0.0;
        double max_txp = 0.0;
        for (int p = 0; p < 4 * probes; ++p) {
            const double x = std::exp(rng.uniform(-3.0, 5.0));
            const double y = x * (1.0 + rng.uniform(0.01, 0.5));
            max_ratio = std::max(max_ratio,
                                 std::abs(coeffs.eval_theta(y) - coeffs.eval_theta(x)) / (y - x));
            const double h = 1e-4 * x;
            max_txp = std::max(max_txp,
                               std::abs((coeffs.eval_theta(x + h) - coeffs.eval_theta(x - h)) /
                                        (2.0 * h) * x));
        }
        if (coeffs.flags.theta_lipschitz && max_ratio > 100.0)
            rep.warnings.push_back(
                strprintf("theta: declared Lipschitz but observed ratio %.3g", max_ratio));
        if (coeffs.flags.theta_log_growth && max_txp > 100.0)
            rep.warnings.push_back(
                strprintf("theta: declared log-growth but |theta'(x) x| reached %.3g", max_txp));
    }

    return rep;
}

namespace {

// sigma = s * I_{d x m}, alpha = a * I_{d x k} (diagonal, truncated).
CoefficientSet::VecFn diag_matrix(int rows, int cols, double scale) {
    if (scale == 0.0) return nullptr;
    return [rows, cols, scale](const double*, const EmpiricalMeasure&, double* out) {
        std::fill(out, out + rows * cols, 0.0);
        for (int i = 0; i < std::min(rows, cols); ++i) out[i * cols + i] = scale;
    };
}

void apply_weight_params(CoefficientSet& cs, const ModelDims& dims, const BuiltinParams& p) {
    if (p.c0 != 0.0) {
        const double c0 = p.c0;
        cs.c = [c0](const double*, const EmpiricalMeasure&) { return c0; };
    }
    if (p.gamma0 != 0.0) {
        const double g0 = p.gamma0;
        const int m = dims.m;
        cs.gamma = [g0, m](const double*, const EmpiricalMeasure&, double* out) {
            std::fill(out, out + m, 0.0);
            out[0] = g0;
        };
        cs.flags.gamma_measure_only = true;
    } else {
        cs.flags.gamma_zero = true;
    }
    if (p.beta0 != 0.0) {
        const double b0 = p.beta0;
        const int k = dims.k;
        cs.beta = [b0, k](const double*, const EmpiricalMeasure&, double* out) {
            std::fill(out, out + k, 0.0);
            out[0] = b0;
        };
    }
    cs.theta = p.theta_log ? theta_log1p(p.theta_scale) : theta_identity();
    cs.flags.theta_lipschitz = true;
    cs.flags.theta_log_growth = p.theta_log;
    cs.flags.bound = p.bound;
}

}  // namespace

CoefficientSet make_pure_brownian(const ModelDims& dims, const BuiltinParams& p) {
    dims.check();
    CoefficientSet cs;
    cs.sigma = diag_matrix(dims.d, dims.m, p.sigma);
    cs.alpha = diag_matrix(dims.d, dims.k, p.alpha);
    cs.flags.sigma_measure_only = true;
    apply_weight_params(cs, dims, p);
    return cs;
}

CoefficientSet make_constant(const ModelDims& dims, const BuiltinParams& p) {
    dims.check();
    CoefficientSet cs;
    if (!p.b0.empty()) {
        if (static_cast<int>(p.b0.size()) != dims.d) fail("make_constant: b0 has wrong dimension");
        std::vector<double> b0 = p.b0;
        cs.b = [b0](const double*, const EmpiricalMeasure&, double* out) {
            std::copy(b0.begin(), b0.end(), out);
        };
    }
    cs.sigma = diag_matrix(dims.d, dims.m, p.sigma);
    cs.alpha = diag_matrix(dims.d, dims.k, p.alpha);
    cs.flags.sigma_measure_only = true;
    apply_weight_params(cs, dims, p);
    return cs;
}

CoefficientSet make_ou(const ModelDims& dims, const BuiltinParams& p) {
    dims.check();
    CoefficientSet cs;
    const double rate = p.rate;
    const int d = dims.d;
    cs.b = [rate, d](const double* x, const EmpiricalMeasure&, double* out) {
        for (int i = 0; i < d; ++i) out[i] = -rate * x[i];
    };
    cs.sigma = diag_matrix(dims.d, dims.m, p.sigma);
    cs.alpha = diag_matrix(dims.d, dims.k, p.alpha);
    cs.flags.sigma_measure_only = true;
    apply_weight_params(cs, dims, p);
    return cs;
}

CoefficientSet make_linear_mean_field(const ModelDims& dims, const BuiltinParams& p) {
    dims.check();
    CoefficientSet cs;
    const double rate = p.rate;
    const double attract = p.attract;
    const int d = dims.d;
    cs.b = [rate, attract, d](const double* x, const EmpiricalMeasure& mu, double* out) {
        const std::vector<double>& mbar = mu.mean();
        for (int i = 0; i < d; ++i)
            out[i] = -rate * x[i] + attract * mbar[static_cast<std::size_t>(i)];
    };
    cs.sigma = diag_matrix(dims.d, dims.m, p.sigma);
    cs.alpha = diag_matrix(dims.d, dims.k, p.alpha);
    cs.flags.sigma_measure_only = true;
    apply_weight_params(cs, dims, p);
    return cs;
}

CoefficientSet make_builtin(const std::string& family, const ModelDims& dims,
                            const BuiltinParams& p) {
    if (family == "pure_brownian") return make_pure_brownian(dims, p);
    if (family == "constant") return make_constant(dims, p);
    if (family == "ou") return make_ou(dims, p);
    if (family == "linear_mean_field") return make_linear_mean_field(dims, p);
    fail("unknown coefficient family: " + family);
}

}  // namespace mfcn
