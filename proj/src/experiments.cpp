#include "mfcn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mfcn/csv.hpp"
#include "mfcn/laplace.hpp"
#include "mfcn/limit.hpp"
#include "mfcn/manifest.hpp"
#include "mfcn/rate.hpp"

namespace fs = std::filesystem;

namespace mfcn {

namespace {

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

struct KeySpec {
    const char* key;
    bool required;
};

const std::vector<KeySpec>& common_keys() {
    static const std::vector<KeySpec> keys = {
        {"schema_version", true}, {"seed", true},          {"model.family", true},
        {"model.d", false},       {"model.m", false},      {"model.k", false},
        {"model.rate", false},    {"model.attract", false},{"model.sigma", false},
        {"model.alpha", false},   {"model.b0", false},     {"model.c0", false},
        {"model.gamma0", false},  {"model.beta0", false},  {"model.theta", false},
        {"model.theta_scale", false}, {"model.bound", false},
        {"init.kind", false},     {"init.x0", false},      {"init.sd", false},
        {"init.weight", false},   {"grid.horizon", true},  {"grid.steps", true},
        {"kappa.form", false},    {"kappa.lambda", false}, {"kappa.c", false},
        {"kappa.p", false},
    };
    return keys;
}

std::vector<KeySpec> command_keys(const std::string& command) {
    if (command == "validate") return {{"validate.probes", false}};
    if (command == "lln")
        return {{"n_list", true},        {"replicas", true},      {"lln.n_ref", false},
                {"lln.tol", false},      {"lln.max_iters", false},{"lln.dict_size", false},
                {"lln.weighted", false}, {"lln.export_flow", false}};
    if (command == "feynman-kac")
        return {{"n", true}, {"replicas", true}, {"fk.g", false}, {"fk.coord", false}};
    if (command == "variance")
        return {{"n_list", true}, {"variance.kappa_list", true}, {"replicas", true},
                {"variance.coord", false}};
    if (command == "laplace")
        return {{"n", true},       {"replicas", true}, {"laplace.speed", false},
                {"f.kind", false}, {"f.clip", false},  {"f.coord", false},
                {"f.value", false}};
    if (command == "optimize")
        return {{"n", true},           {"optimize.budget", false},
                {"optimize.eval_replicas", false}, {"optimize.final_replicas", false},
                {"optimize.u_pieces", false},      {"optimize.v_pieces", false},
                {"optimize.affine", false},        {"optimize.weighted", false},
                {"f.kind", false},     {"f.clip", false},
                {"f.coord", false},    {"f.value", false}};
    if (command == "rare-event")
        return {{"n", true},          {"replicas", true},       {"event.a", true},
                {"event.coord", false}, {"rare.control_file", false}};
    if (command == "rate")
        return {{"n_list", true}, {"replicas", true}, {"event.a", true},
                {"event.coord", false}, {"rate.use_is", false}};
    if (command == "regimes")
        return {{"n_list", true}, {"replicas", true}, {"event.a", true},
                {"event.coord", false}, {"regimes.rules", true}, {"rate.use_is", false}};
    fail("unknown command: " + command);
}

std::vector<std::string> validate_config(const std::string& command, const KVConfig& cfg) {
    std::vector<std::string> violations;
    std::set<std::string> allowed;
    auto note = [&](const std::vector<KeySpec>& specs) {
        for (const auto& spec : specs) {
            allowed.insert(spec.key);
            if (spec.required && !cfg.has(spec.key))
                violations.push_back(strprintf("missing required key: %s", spec.key));
        }
    };
    note(common_keys());
    note(command_keys(command));
    for (const auto& key : cfg.keys())
        if (!allowed.count(key)) violations.push_back("unknown key: " + key);

    if (cfg.has("schema_version") && cfg.get_int("schema_version", 1) != 1)
        violations.push_back("schema_version: only version 1 is supported");
    if (cfg.has("grid.horizon") && !(cfg.get_double("grid.horizon", 1.0) > 0.0))
        violations.push_back("grid.horizon: must be positive");
    if (cfg.has("grid.steps") && cfg.get_int("grid.steps", 1) < 1)
        violations.push_back("grid.steps: must be >= 1");
    if (cfg.has("model.family")) {
        const std::string family = cfg.get_string("model.family");
        if (family != "pure_brownian" && family != "constant" && family != "ou" &&
            family != "linear_mean_field")
            violations.push_back("model.family: unknown family " + family);
    }
    if (cfg.has("kappa.form")) {
        const std::string form = cfg.get_string("kappa.form");
        if (form != "critical" && form != "power")
            violations.push_back("kappa.form: must be critical or power");
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Config -> model pieces
// ---------------------------------------------------------------------------

struct ModelBundle {
    ModelDims dims;
    CoefficientSet coeffs;
    TimeGrid grid;
    std::uint64_t seed = 0;
    InitialFamily init_family;
    KappaRule kappa_rule;
    bool has_kappa_rule = false;
};

ModelBundle build_model(const KVConfig& cfg) {
    ModelBundle mb;
    mb.dims.d = cfg.get_int("model.d", 1);
    mb.dims.m = cfg.get_int("model.m", 1);
    mb.dims.k = cfg.get_int("model.k", 1);
    mb.dims.check();

    BuiltinParams params;
    params.rate = cfg.get_double("model.rate", 1.0);
    params.attract = cfg.get_double("model.attract", 1.0);
    params.sigma = cfg.get_double("model.sigma", 1.0);
    params.alpha = cfg.get_double("model.alpha", 1.0);
    if (cfg.has("model.b0")) params.b0 = cfg.get_doubles("model.b0");
    params.c0 = cfg.get_double("model.c0", 0.0);
    params.gamma0 = cfg.get_double("model.gamma0", 0.0);
    params.beta0 = cfg.get_double("model.beta0", 0.0);
    params.theta_log = cfg.get_string("model.theta", "identity") == "log1p";
    params.theta_scale = cfg.get_double("model.theta_scale", 1.0);
    params.bound = cfg.get_double("model.bound", 10.0);
    mb.coeffs = make_builtin(cfg.get_string("model.family"), mb.dims, params);

    mb.grid = TimeGrid(cfg.get_double("grid.horizon"), cfg.get_int("grid.steps"));
    mb.seed = static_cast<std::uint64_t>(cfg.get_long("seed"));

    const std::string init_kind = cfg.get_string("init.kind", "point");
    std::vector<double> x0(static_cast<std::size_t>(mb.dims.d), 0.0);
    if (cfg.has("init.x0")) {
        x0 = cfg.get_doubles("init.x0");
        if (static_cast<int>(x0.size()) != mb.dims.d) fail("init.x0: wrong dimension");
    }
    const double sd = cfg.get_double("init.sd", 1.0);
    const double w0 = cfg.get_double("init.weight", 1.0);
    const int dims_d = mb.dims.d;
    const std::uint64_t init_seed = mb.seed ^ 0x1A171A1u;
    mb.init_family = [init_kind, x0, sd, w0, dims_d, init_seed](int n) {
        InitialData init = init_kind == "gaussian"
                               ? initial_gaussian_cloud(n, dims_d, x0, sd, init_seed)
                               : initial_point_cloud(n, dims_d, x0);
        if (w0 != 1.0) init.weights.assign(static_cast<std::size_t>(n), w0);
        return init;
    };

    if (cfg.has("kappa.form")) {
        const std::string form = cfg.get_string("kappa.form");
        mb.kappa_rule = form == "critical"
                            ? KappaRule::make_critical(cfg.get_double("kappa.lambda", 1.0))
                            : KappaRule::make_power(cfg.get_double("kappa.c", 1.0),
                                                    cfg.get_double("kappa.p", 1.0));
        mb.has_kappa_rule = true;
    }
    return mb;
}

double kappa_for(const ModelBundle& mb, int n) {
    return mb.has_kappa_rule ? mb.kappa_rule.kappa(n) : 0.0;
}

Functional functional_from_config(const KVConfig& cfg) {
    const std::string kind = cfg.get_string("f.kind", "clipped_mean");
    const int coord = cfg.get_int("f.coord", 0);
    if (kind == "clipped_mean")
        return functional_clipped_terminal_mean(coord, cfg.get_double("f.clip", 1.0));
    if (kind == "constant") return functional_constant(cfg.get_double("f.value", 1.0));
    fail("f.kind: unknown functional " + kind);
}

// ---------------------------------------------------------------------------
// Command implementations; each returns the list of CSV artifacts written.
// ---------------------------------------------------------------------------

using Artifacts = std::vector<std::string>;

Artifacts cmd_validate(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const int probes = cfg.get_int("validate.probes", 200);
    const ValidationReport rep = validate_model(mb.coeffs, mb.dims, probes, mb.seed);
    CsvWriter csv(dir + "/validate_report.csv",
                  {"kind", "name", "max_norm", "max_lipschitz_ratio", "detail"});
    for (const auto& e : rep.entries)
        csv.row({"coefficient", e.name, CsvWriter::num(e.max_norm),
                 CsvWriter::num(e.max_lipschitz_ratio), ""});
    for (const auto& v : rep.violations) csv.row({"violation", "", "", "", v});
    for (const auto& w : rep.warnings) csv.row({"warning", "", "", "", w});
    return {"validate_report.csv"};
}

Artifacts cmd_lln(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const std::vector<int> n_list = cfg.get_ints("n_list");
    const int replicas = cfg.get_int("replicas");
    const bool weighted = cfg.get_bool("lln.weighted", false);
    PicardOptions popt;
    popt.n_ref = cfg.get_int("lln.n_ref", 20000);
    popt.tol = cfg.get_double("lln.tol", 5e-3);
    popt.max_iters = cfg.get_int("lln.max_iters", 30);
    popt.dict_size = cfg.get_int("lln.dict_size", 64);

    const auto [flow, report] =
        weighted ? solve_weighted_limit(mb.coeffs, mb.dims, mb.init_family, mb.grid, popt, mb.seed)
                 : solve_mckean_vlasov(mb.coeffs, mb.dims, mb.init_family, mb.grid, popt, mb.seed);

    Artifacts artifacts;
    {
        CsvWriter csv(dir + "/picard.csv", {"iteration", "distance", "converged", "n_ref"});
        for (std::size_t i = 0; i < report.distances.size(); ++i)
            csv.row({CsvWriter::num(static_cast<int>(i + 1)), CsvWriter::num(report.distances[i]),
                     CsvWriter::flag(report.converged && i + 1 == report.distances.size()),
                     CsvWriter::num(report.n_ref)});
        artifacts.push_back("picard.csv");
    }
    {
        CsvWriter csv(dir + "/flow_summary.csv", {"step", "time", "mass", "mean_0", "variance_0"});
        for (int j = 0; j < mb.grid.points(); ++j) {
            const EmpiricalMeasure& mu = flow.measures[static_cast<std::size_t>(j)];
            const double mean0 = mu.mean()[0];
            double var = 0.0;
            if (mu.mass() > 0.0) {
                std::vector<double> terms(static_cast<std::size_t>(mu.size()));
                for (int i = 0; i < mu.size(); ++i) {
                    const double dx = mu.atom(i)[0] - mean0;
                    terms[static_cast<std::size_t>(i)] = mu.weight(i) * dx * dx;
                }
                var = pairwise_sum(terms) / mu.mass();
            }
            csv.row({CsvWriter::num(j), CsvWriter::num(mb.grid.time(j)),
                     CsvWriter::num(mu.mass()), CsvWriter::num(mean0), CsvWriter::num(var)});
        }
        artifacts.push_back("flow_summary.csv");
    }
    if (cfg.get_bool("lln.export_flow", false)) {
        CsvWriter csv(dir + "/flow_atoms.csv", {"step", "time", "atom", "x_0", "weight"});
        for (int j = 0; j < mb.grid.points(); ++j) {
            const EmpiricalMeasure& mu = flow.measures[static_cast<std::size_t>(j)];
            for (int i = 0; i < mu.size(); ++i)
                csv.row({CsvWriter::num(j), CsvWriter::num(mb.grid.time(j)), CsvWriter::num(i),
                         CsvWriter::num(mu.atom(i)[0]), CsvWriter::num(mu.weight(i))});
        }
        artifacts.push_back("flow_atoms.csv");
    }
    {
        const BlDictionary dict = picard_dictionary(mb.dims, popt, mb.seed);
        const auto kappa_rule = [&](int n) { return kappa_for(mb, n); };
        const auto rows = lln_gap(mb.coeffs, mb.dims, mb.init_family, mb.grid, kappa_rule, n_list,
                                  replicas, mb.seed ^ 0x6A9u, flow, weighted, dict);
        CsvWriter csv(dir + "/lln_gap.csv", {"n", "kappa", "gap", "stderr"});
        for (const auto& row : rows)
            csv.row({CsvWriter::num(row.n), CsvWriter::num(row.kappa), CsvWriter::num(row.gap),
                     CsvWriter::num(row.stderr_)});
        artifacts.push_back("lln_gap.csv");
    }
    return artifacts;
}

Artifacts cmd_feynman_kac(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const int n = cfg.get_int("n");
    const int replicas = cfg.get_int("replicas");
    const std::string g_kind = cfg.get_string("fk.g", "square");
    const int coord = cfg.get_int("fk.coord", 0);
    const InitialData init = mb.init_family(n);
    const double kappa = kappa_for(mb, n);
    const NoisePlan plan{mb.seed};

    auto g_of_terminal = [&](const EmpiricalMeasure& mu) {
        std::vector<double> terms(static_cast<std::size_t>(mu.size()));
        for (int i = 0; i < mu.size(); ++i) {
            const double x = mu.atom(i)[coord];
            terms[static_cast<std::size_t>(i)] = mu.weight(i) * (g_kind == "square" ? x * x : x);
        }
        return pairwise_sum(terms);
    };

    SimOptions options;
    options.record_flow = false;
    const std::vector<double> values = ensemble_values(replicas, [&](std::uint32_t r) {
        const PathBundle bundle =
            simulate_weighted(mb.coeffs, mb.dims, init, mb.grid, kappa, plan, r, nullptr, options);
        return bundle.flow.terminal().mass() > 0.0 ? g_of_terminal(bundle.flow.terminal()) : 0.0;
    });

    Artifacts artifacts;
    {
        CsvWriter csv(dir + "/fk_replicas.csv", {"replica", "value"});
        for (int r = 0; r < replicas; ++r)
            csv.row({CsvWriter::num(r), CsvWriter::num(values[static_cast<std::size_t>(r)])});
        artifacts.push_back("fk_replicas.csv");
    }
    {
        const MeanStderr ms = mean_stderr(values);
        // For driftless unit-diffusion models with constant weight rate the
        // functional has the closed form e^{c0 T} (x0^2 + sigma^2 T).
        std::string closed = "";
        if (cfg.get_string("model.family") == "pure_brownian" && g_kind == "square") {
            const double c0 = cfg.get_double("model.c0", 0.0);
            const double sig = cfg.get_double("model.sigma", 1.0);
            const double x0 = cfg.has("init.x0") ? cfg.get_doubles("init.x0")[0] : 0.0;
            closed = CsvWriter::num(std::exp(c0 * mb.grid.horizon) *
                                    (x0 * x0 + sig * sig * mb.grid.horizon));
        }
        CsvWriter csv(dir + "/fk_summary.csv",
                      {"n", "replicas", "mean", "stderr", "closed_form"});
        csv.row({CsvWriter::num(n), CsvWriter::num(replicas), CsvWriter::num(ms.mean),
                 CsvWriter::num(ms.stderr_), closed});
        artifacts.push_back("fk_summary.csv");
    }
    return artifacts;
}

Artifacts cmd_variance(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const std::vector<int> n_list = cfg.get_ints("n_list");
    const std::vector<double> kappa_list = cfg.get_doubles("variance.kappa_list");
    const int replicas = cfg.get_int("replicas");
    const int coord = cfg.get_int("variance.coord", 0);
    const auto f = [coord](const EmpiricalMeasure& mu) {
        return mu.mean()[static_cast<std::size_t>(coord)];
    };
    const VarianceFit fit = variance_decomposition(mb.coeffs, mb.dims, mb.init_family, f, mb.grid,
                                                   n_list, kappa_list, replicas, mb.seed);
    {
        CsvWriter csv(dir + "/variance_cells.csv", {"n", "kappa", "var", "var_stderr"});
        for (const auto& cell : fit.cells)
            csv.row({CsvWriter::num(cell.n), CsvWriter::num(cell.kappa), CsvWriter::num(cell.var),
                     CsvWriter::num(cell.var_stderr)});
    }
    {
        CsvWriter csv(dir + "/variance_fit.csv", {"A", "B", "rel_residual"});
        csv.row({CsvWriter::num(fit.A), CsvWriter::num(fit.B), CsvWriter::num(fit.rel_residual)});
    }
    return {"variance_cells.csv", "variance_fit.csv"};
}

Artifacts cmd_laplace(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const int n = cfg.get_int("n");
    const int replicas = cfg.get_int("replicas");
    const Speed speed =
        cfg.get_string("laplace.speed", "n") == "kappa2" ? Speed::kappa_inv_sq : Speed::n;
    const Functional F = functional_from_config(cfg);
    const InitialData init = mb.init_family(n);
    const double kappa = kappa_for(mb, n);
    const LaplaceEstimate est = estimate_laplace_direct(mb.coeffs, mb.dims, init, F, mb.grid,
                                                        kappa, replicas, mb.seed, speed);
    CsvWriter csv(dir + "/laplace.csv", {"n", "kappa", "speed", "value", "stderr", "replicas",
                                         "ess", "max_exponent", "degenerate"});
    csv.row({CsvWriter::num(n), CsvWriter::num(kappa),
             speed == Speed::n ? "n" : "kappa2", CsvWriter::num(est.value),
             CsvWriter::num(est.stderr_), CsvWriter::num(est.replicas), CsvWriter::num(est.ess),
             CsvWriter::num(est.max_exponent), CsvWriter::flag(est.degenerate)});
    return {"laplace.csv"};
}

Artifacts cmd_optimize(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const int n = cfg.get_int("n");
    const InitialData init = mb.init_family(n);
    const double kappa = kappa_for(mb, n);
    const Functional F = functional_from_config(cfg);
    const bool weighted = cfg.get_bool("optimize.weighted", false);

    ControlFamily family;
    family.m = mb.dims.m;
    family.k = mb.dims.k;
    family.d = mb.dims.d;
    family.steps = mb.grid.steps;
    family.u_pieces = cfg.get_int("optimize.u_pieces", 4);
    family.v_pieces = cfg.get_int("optimize.v_pieces", 4);
    family.affine = cfg.get_bool("optimize.affine", false);

    OptimizeOptions oopt;
    oopt.budget = cfg.get_int("optimize.budget", 2000);
    oopt.eval_replicas = cfg.get_int("optimize.eval_replicas", 128);
    oopt.final_replicas = cfg.get_int("optimize.final_replicas", 512);

    const OptimizeResult res = optimize_controls(mb.coeffs, mb.dims, init, F, mb.grid, kappa,
                                                 family, mb.seed, weighted, Speed::n, oopt);
    {
        CsvWriter csv(dir + "/optimize_trace.csv", {"eval", "cost", "best"});
        for (const auto& pt : res.trace)
            csv.row({CsvWriter::num(pt.eval), CsvWriter::num(pt.cost), CsvWriter::num(pt.best)});
    }
    {
        CsvWriter csv(dir + "/optimize_summary.csv",
                      {"n", "kappa", "total", "stderr", "u_part", "v_part", "f_part",
                       "crn_best", "budget", "budget_exhausted"});
        csv.row({CsvWriter::num(n), CsvWriter::num(kappa), CsvWriter::num(res.cost.total),
                 CsvWriter::num(res.cost.stderr_), CsvWriter::num(res.cost.u_part),
                 CsvWriter::num(res.cost.v_part), CsvWriter::num(res.cost.f_part),
                 CsvWriter::num(res.crn_best_cost), CsvWriter::num(oopt.budget),
                 CsvWriter::flag(res.budget_exhausted)});
    }
    save_control_policy(res.policy, mb.grid, dir + "/control_policy.txt");
    return {"optimize_trace.csv", "optimize_summary.csv", "control_policy.txt"};
}

Artifacts cmd_rare_event(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const int n = cfg.get_int("n");
    const int replicas = cfg.get_int("replicas");
    const double a = cfg.get_double("event.a");
    const int coord = cfg.get_int("event.coord", 0);
    const InitialData init = mb.init_family(n);
    const double kappa = kappa_for(mb, n);

    ControlPolicy policy;
    if (cfg.has("rare.control_file")) {
        policy = load_control_policy(cfg.get_string("rare.control_file"));
        if (policy.steps != mb.grid.steps) fail("rare.control_file: grid step mismatch");
    } else {
        policy = pure_brownian_mean_tilt(a, mb.grid, mb.dims, n, kappa);
    }

    const FlowEvent event = event_terminal_mean_at_least(coord, a);
    const ImportanceSamplingResult res = importance_sampling_probability(
        mb.coeffs, mb.dims, init, event, mb.grid, kappa, policy, replicas, mb.seed);

    std::string closed = "";
    if (cfg.get_string("model.family") == "pure_brownian") {
        // Terminal ensemble mean is Gaussian with variance T (1 + n kappa^2) / n.
        const double sig = cfg.get_double("model.sigma", 1.0);
        const double al = cfg.get_double("model.alpha", 1.0);
        const double x0 = cfg.has("init.x0") ? cfg.get_doubles("init.x0")[0] : 0.0;
        const double var =
            mb.grid.horizon * (sig * sig / n + kappa * kappa * al * al);
        closed = CsvWriter::num(normal_upper_tail((a - x0) / std::sqrt(var)));
    }

    CsvWriter csv(dir + "/rare_event.csv",
                  {"method", "estimate", "stderr", "hits", "variance_reduction", "closed_form"});
    csv.row({"importance_sampling", CsvWriter::num(res.p_is), CsvWriter::num(res.is_stderr),
             CsvWriter::num(res.hits_is), CsvWriter::num(res.variance_reduction), closed});
    csv.row({"plain_mc", CsvWriter::num(res.p_mc), CsvWriter::num(res.mc_stderr),
             CsvWriter::num(res.hits_mc), "", closed});
    return {"rare_event.csv"};
}

TiltBuilder make_tilt_builder(const ModelBundle& mb, double a) {
    const ModelDims dims = mb.dims;
    const TimeGrid grid = mb.grid;
    return [a, grid, dims](int n, double kappa) {
        return pure_brownian_mean_tilt(a, grid, dims, n, kappa);
    };
}

Artifacts cmd_rate(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    if (!mb.has_kappa_rule) fail("rate: kappa.form must be configured");
    const std::vector<int> n_list = cfg.get_ints("n_list");
    const int replicas = cfg.get_int("replicas");
    const double a = cfg.get_double("event.a");
    const int coord = cfg.get_int("event.coord", 0);
    const bool use_is = cfg.get_bool("rate.use_is", true);
    const FlowEvent event = event_terminal_mean_at_least(coord, a);
    const RateEstimate est =
        estimate_decay_rate(mb.coeffs, mb.dims, mb.init_family, event, mb.kappa_rule, n_list,
                            mb.grid, replicas, mb.seed, use_is,
                            make_tilt_builder(mb, a));
    {
        CsvWriter csv(dir + "/rate_points.csv", {"n", "kappa", "a_n", "p_hat", "p_stderr", "rate",
                                                 "rate_stderr", "used_is"});
        for (const auto& pt : est.points)
            csv.row({CsvWriter::num(pt.n), CsvWriter::num(pt.kappa), CsvWriter::num(pt.a_n),
                     CsvWriter::num(pt.p_hat), CsvWriter::num(pt.p_stderr),
                     CsvWriter::num(pt.rate), CsvWriter::num(pt.rate_stderr),
                     CsvWriter::flag(pt.used_is)});
    }
    {
        std::string oracle = "";
        if (cfg.get_string("model.family") == "pure_brownian") {
            const RateRegime regime = est.speed.critical
                                          ? RateRegime::critical
                                          : (est.speed.speed == Speed::n
                                                 ? RateRegime::individual_only
                                                 : RateRegime::common_only);
            oracle = CsvWriter::num(
                quadratic_rate_oracle(a, mb.grid.horizon, est.speed.lambda, regime));
        }
        CsvWriter csv(dir + "/rate_summary.csv",
                      {"speed", "lambda", "extrapolated", "stderr", "oracle"});
        csv.row({est.speed.speed == Speed::n ? "n" : "kappa2", CsvWriter::num(est.speed.lambda),
                 CsvWriter::num(est.extrapolated), CsvWriter::num(est.extrapolated_stderr),
                 oracle});
    }
    return {"rate_points.csv", "rate_summary.csv"};
}

Artifacts cmd_regimes(const KVConfig& cfg, const ModelBundle& mb, const std::string& dir) {
    const std::vector<int> n_list = cfg.get_ints("n_list");
    const int replicas = cfg.get_int("replicas");
    const double a = cfg.get_double("event.a");
    const int coord = cfg.get_int("event.coord", 0);
    const bool use_is = cfg.get_bool("rate.use_is", true);

    // regimes.rules = "power:1:1;power:1:0.25" or "critical:1"
    std::vector<KappaRule> rules;
    {
        const std::string spec = cfg.get_string("regimes.rules");
        std::size_t pos = 0;
        while (pos < spec.size()) {
            std::size_t end = spec.find(';', pos);
            if (end == std::string::npos) end = spec.size();
            const std::string item = spec.substr(pos, end - pos);
            pos = end + 1;
            if (item.empty()) continue;
            std::vector<std::string> parts;
            std::size_t q = 0;
            while (q <= item.size()) {
                std::size_t r = item.find(':', q);
                if (r == std::string::npos) r = item.size();
                parts.push_back(item.substr(q, r - q));
                q = r + 1;
            }
            if (parts[0] == "critical" && parts.size() == 2)
                rules.push_back(KappaRule::make_critical(std::stod(parts[1])));
            else if (parts[0] == "power" && parts.size() == 3)
                rules.push_back(KappaRule::make_power(std::stod(parts[1]), std::stod(parts[2])));
            else
                fail("regimes.rules: cannot parse rule " + item);
        }
    }

    const FlowEvent event = event_terminal_mean_at_least(coord, a);
    const RegimeContrast contrast =
        regime_contrast(mb.coeffs, mb.dims, mb.init_family, event, rules, n_list, mb.grid,
                        replicas, mb.seed, use_is, make_tilt_builder(mb, a));

    Artifacts artifacts;
    {
        CsvWriter csv(dir + "/regimes_summary.csv",
                      {"rule", "correct_speed", "n", "kappa", "p_hat", "p_stderr", "rate_speed_n",
                       "rate_speed_kappa"});
        for (const auto& row : contrast.rows) {
            const RegimeSpeed& rs = contrast.speeds[static_cast<std::size_t>(row.rule_index)];
            csv.row({CsvWriter::num(row.rule_index),
                     rs.speed == Speed::n ? "n" : "kappa2", CsvWriter::num(row.n),
                     CsvWriter::num(row.kappa), CsvWriter::num(row.p_hat),
                     CsvWriter::num(row.p_stderr), CsvWriter::num(row.rate_speed_n),
                     CsvWriter::num(row.rate_speed_kappa)});
        }
        artifacts.push_back("regimes_summary.csv");
    }
    return artifacts;
}

Artifacts dispatch(const std::string& command, const KVConfig& cfg, const ModelBundle& mb,
                   const std::string& dir) {
    if (command == "validate") return cmd_validate(cfg, mb, dir);
    if (command == "lln") return cmd_lln(cfg, mb, dir);
    if (command == "feynman-kac") return cmd_feynman_kac(cfg, mb, dir);
    if (command == "variance") return cmd_variance(cfg, mb, dir);
    if (command == "laplace") return cmd_laplace(cfg, mb, dir);
    if (command == "optimize") return cmd_optimize(cfg, mb, dir);
    if (command == "rare-event") return cmd_rare_event(cfg, mb, dir);
    if (command == "rate") return cmd_rate(cfg, mb, dir);
    if (command == "regimes") return cmd_regimes(cfg, mb, dir);
    fail("unknown command: " + command);
}

void write_error_record(const std::string& dir, const std::string& kind,
                        const std::vector<std::string>& details) {
    std::ofstream out(dir + "/error.txt");
    out << "error = " << kind << "\n";
    for (std::size_t i = 0; i < details.size(); ++i)
        out << "detail." << i << " = " << details[i] << "\n";
}

}  // namespace

const std::vector<std::string>& experiment_commands() {
    static const std::vector<std::string> commands = {
        "validate", "lln",      "feynman-kac", "variance", "laplace",
        "optimize", "rare-event", "rate",      "regimes"};
    return commands;
}

int run_experiment(const RunOptions& options) {
    set_max_threads(options.threads);
    fs::create_directories(options.out_dir);
    const auto t0 = std::chrono::steady_clock::now();

    KVConfig cfg;
    try {
        cfg = KVConfig::load(options.config_path);
    } catch (const std::exception& e) {
        write_error_record(options.out_dir, "config_load", {e.what()});
        fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    if (options.seed_override) cfg.set("seed", strprintf("%llu", static_cast<unsigned long long>(*options.seed_override)));

    const std::vector<std::string> violations = validate_config(options.command, cfg);
    if (!violations.empty()) {
        write_error_record(options.out_dir, "config_validation", violations);
        for (const auto& v : violations) fprintf(stderr, "config: %s\n", v.c_str());
        return 2;
    }

    Artifacts artifacts;
    try {
        const ModelBundle mb = build_model(cfg);
        artifacts = dispatch(options.command, cfg, mb, options.out_dir);
    } catch (const std::exception& e) {
        write_error_record(options.out_dir, "runtime", {e.what()});
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    // Manifest: config copy + hashes of every artifact.
    cfg.save(options.out_dir + "/" + kConfigCopyName);
    const auto t1 = std::chrono::steady_clock::now();
    KVConfig manifest;
    manifest.set("schema_version", "1");
    manifest.set("command", options.command);
    manifest.set("config_file", kConfigCopyName);
    manifest.set("config_sha256", sha256_file(options.out_dir + "/" + kConfigCopyName));
    manifest.set("seed", cfg.get_string("seed"));
    manifest.set("code_version", kCodeVersion);
    manifest.set("threads", strprintf("%d", max_threads()));
    manifest.set_double("wall_time_s",
                        std::chrono::duration<double>(t1 - t0).count());
    for (const auto& name : artifacts)
        manifest.set("output." + name, sha256_file(options.out_dir + "/" + name));
    manifest.save(options.out_dir + "/" + kManifestName);
    return 0;
}

int replay_manifest(const std::string& manifest_path, int threads) {
    KVConfig manifest;
    try {
        manifest = KVConfig::load(manifest_path);
    } catch (const std::exception& e) {
        fprintf(stderr, "replay: %s\n", e.what());
        return 1;
    }
    const fs::path base = fs::path(manifest_path).parent_path();
    const fs::path replay_dir = base / "replay_tmp";

    RunOptions options;
    options.command = manifest.get_string("command");
    options.config_path = (base / manifest.get_string("config_file")).string();
    options.out_dir = replay_dir.string();
    options.threads = threads;
    options.seed_override =
        static_cast<std::uint64_t>(std::stoull(manifest.get_string("seed")));

    const int code = run_experiment(options);
    if (code != 0) {
        fprintf(stderr, "replay: re-run failed with exit code %d\n", code);
        return code;
    }

    int result = 0;
    for (const auto& key : manifest.keys()) {
        if (key.rfind("output.", 0) != 0) continue;
        const std::string name = key.substr(7);
        const std::string expected = manifest.get_string(key);
        std::string actual;
        try {
            actual = sha256_file((replay_dir / name).string());
        } catch (const std::exception&) {
            actual = "<missing>";
        }
        if (actual != expected) {
            fprintf(stderr, "replay: mismatch in %s\n", name.c_str());
            result = 3;
            break;
        }
    }
    fs::remove_all(replay_dir);
    if (result == 0) printf("replay: outputs byte-identical\n");
    return result;
}

}  // namespace mfcn
