#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfcn/config.hpp"
#include "mfcn/control.hpp"
#include "mfcn/experiments.hpp"
#include "mfcn/manifest.hpp"

using namespace mfcn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    const fs::path dir =
        fs::temp_directory_path() / strprintf("mfcn_test_%s_%d_%d", tag.c_str(), getpid(), counter++);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string small_validate_config() {
    return "schema_version = 1\n"
           "seed = 11\n"
           "model.family = linear_mean_field\n"
           "model.rate = 1.0\n"
           "model.attract = 0.8\n"
           "model.sigma = 1.0\n"
           "model.alpha = 1.0\n"
           "grid.horizon = 1.0\n"
           "grid.steps = 10\n"
           "validate.probes = 40\n";
}

std::string small_fk_config() {
    return "schema_version = 1\n"
           "seed = 12\n"
           "model.family = pure_brownian\n"
           "model.c0 = 0.5\n"
           "init.x0 = 0.0\n"
           "grid.horizon = 1.0\n"
           "grid.steps = 10\n"
           "n = 100\n"
           "replicas = 50\n";
}

}  // namespace

TEST_CASE("config round-trips losslessly") {
    const KVConfig cfg = KVConfig::parse(small_fk_config());
    const KVConfig again = KVConfig::parse(cfg.to_text());
    CHECK(cfg.to_text() == again.to_text());
    CHECK(again.get_double("model.c0") == 0.5);
    CHECK(again.get_int("n") == 100);
    CHECK(again.get_string("model.family") == "pure_brownian");
    CHECK_THROWS(again.get_string("nope"));
    CHECK(again.get_ints("n") == std::vector<int>{100});
}

TEST_CASE("validate command runs clean on the linear model") {
    const fs::path dir = fresh_dir("validate");
    const fs::path cfg_path = dir / "exp.cfg";
    std::ofstream(cfg_path) << small_validate_config();

    RunOptions opt;
    opt.command = "validate";
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir / "out").string();
    opt.threads = 1;
    CHECK(run_experiment(opt) == 0);

    std::ifstream report(dir / "out" / "validate_report.csv");
    REQUIRE(report.good());
    std::string line;
    std::getline(report, line);
    CHECK(line.find("# manifest:") == 0);
    std::getline(report, line);
    CHECK(line.find("kind,name") == 0);
    bool violation = false;
    while (std::getline(report, line))
        if (line.rfind("violation", 0) == 0) violation = true;
    CHECK(!violation);

    const KVConfig manifest = KVConfig::load((dir / "out" / kManifestName).string());
    CHECK(manifest.get_string("command") == "validate");
    CHECK(manifest.has("output.validate_report.csv"));
    CHECK(manifest.get_string("code_version") == kCodeVersion);
    fs::remove_all(dir);
}

TEST_CASE("config violations are all reported with exit 2") {
    const fs::path dir = fresh_dir("badcfg");
    const fs::path cfg_path = dir / "exp.cfg";
    std::ofstream(cfg_path) << "schema_version = 1\nbogus.key = 3\n";

    RunOptions opt;
    opt.command = "feynman-kac";
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir / "out").string();
    CHECK(run_experiment(opt) == 2);

    std::ifstream err(dir / "out" / "error.txt");
    std::stringstream buf;
    buf << err.rdbuf();
    const std::string text = buf.str();
    CHECK(text.find("config_validation") != std::string::npos);
    CHECK(text.find("seed") != std::string::npos);           // missing
    CHECK(text.find("model.family") != std::string::npos);   // missing
    CHECK(text.find("bogus.key") != std::string::npos);      // unknown
    fs::remove_all(dir);
}

TEST_CASE("runs are pure functions of config and seed; replay verifies") {
    const fs::path dir = fresh_dir("replay");
    const fs::path cfg_path = dir / "exp.cfg";
    std::ofstream(cfg_path) << small_fk_config();

    RunOptions opt;
    opt.command = "feynman-kac";
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir / "out_a").string();
    opt.threads = 2;
    REQUIRE(run_experiment(opt) == 0);
    RunOptions opt_b = opt;
    opt_b.out_dir = (dir / "out_b").string();
    opt_b.threads = 1;
    REQUIRE(run_experiment(opt_b) == 0);
    CHECK(sha256_file((dir / "out_a" / "fk_replicas.csv").string()) ==
          sha256_file((dir / "out_b" / "fk_replicas.csv").string()));
    CHECK(sha256_file((dir / "out_a" / "fk_summary.csv").string()) ==
          sha256_file((dir / "out_b" / "fk_summary.csv").string()));

    // Replay under a different thread count: byte-identical.
    CHECK(replay_manifest((dir / "out_a" / kManifestName).string(), 1) == 0);

    // Tampering with the recorded seed must be detected.
    const fs::path manifest_path = dir / "out_a" / kManifestName;
    KVConfig manifest = KVConfig::load(manifest_path.string());
    manifest.set("seed", "999");
    manifest.save(manifest_path.string());
    CHECK(replay_manifest(manifest_path.string(), 1) != 0);
    fs::remove_all(dir);
}

TEST_CASE("runtime failures exit nonzero with an error record") {
    const fs::path dir = fresh_dir("runtime");
    const fs::path cfg_path = dir / "exp.cfg";
    // rate without importance sampling on an unreachable event
    std::ofstream(cfg_path) << "schema_version = 1\n"
                               "seed = 5\n"
                               "model.family = pure_brownian\n"
                               "grid.horizon = 1.0\n"
                               "grid.steps = 4\n"
                               "kappa.form = critical\n"
                               "kappa.lambda = 1.0\n"
                               "n_list = 10,20\n"
                               "replicas = 20\n"
                               "event.a = 50.0\n"
                               "rate.use_is = false\n";
    RunOptions opt;
    opt.command = "rate";
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir / "out").string();
    CHECK(run_experiment(opt) == 1);
    CHECK(fs::exists(dir / "out" / "error.txt"));
    fs::remove_all(dir);
}

TEST_CASE("cli binary end to end") {
    const fs::path dir = fresh_dir("cli");
    const fs::path cfg_path = dir / "exp.cfg";
    std::ofstream(cfg_path) << small_validate_config();
    const std::string cmd = std::string(MFCN_CLI_PATH) + " run validate --config " +
                            cfg_path.string() + " --out " + (dir / "out").string() +
                            " --threads 1 > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    const std::string replay_cmd = std::string(MFCN_CLI_PATH) + " replay " +
                                   (dir / "out" / kManifestName).string() +
                                   " --threads 2 > /dev/null 2>&1";
    CHECK(std::system(replay_cmd.c_str()) == 0);
    fs::remove_all(dir);
}

TEST_CASE("control policies round-trip through their text schema") {
    const fs::path dir = fresh_dir("policy");
    TimeGrid grid(2.0, 5);
    ControlPolicy policy = ControlPolicy::zero(2, 1, grid.steps);
    for (int j = 0; j < grid.steps; ++j) {
        policy.u_table[static_cast<std::size_t>(j) * 2] = 0.1 * j;
        policy.u_table[static_cast<std::size_t>(j) * 2 + 1] = -0.2 * j;
        policy.v[static_cast<std::size_t>(j)] = 1.0 / (j + 1);
    }
    policy.v_radius = 7.5;
    const std::string path = (dir / "policy.txt").string();
    save_control_policy(policy, grid, path);
    TimeGrid loaded_grid;
    const ControlPolicy loaded = load_control_policy(path, &loaded_grid);
    CHECK(loaded.m == 2);
    CHECK(loaded.k == 1);
    CHECK(loaded.steps == 5);
    CHECK(loaded_grid.horizon == 2.0);
    CHECK(loaded.u_table == policy.u_table);
    CHECK(loaded.v == policy.v);
    CHECK(loaded.v_radius == 7.5);
    fs::remove_all(dir);
}
