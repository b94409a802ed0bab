#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "modescatter/cli.hpp"
#include "modescatter/errors.hpp"

using namespace modescatter;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MODESCATTER_SOURCE_DIR) / "configs";

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("modescatter_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int status = -1;
    std::string err;
};

Run run(const std::string& args) {
    const char* bin = std::getenv("MODESCATTER_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "MODESCATTER_BIN is not set");
    const fs::path err = scratch() / "stderr.txt";
    const std::string cmd = std::string(bin) + " " + args + " > " + (scratch() / "stdout.txt").string() + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err)};
}

fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = scratch() / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

}  // namespace

TEST_CASE("flux audit of an empty strip passes") {
    const fs::path out = scratch() / "free";
    const Run r = run("run " + (kConfigs / "flux_free_space.json").string() + " --out " + out.string() + " --threads 2");
    CHECK(r.status == 0);
    const json m = json::parse(slurp(out / "metrics.json"));
    CHECK(m["passed"].get<bool>());
    CHECK(m["metrics"]["max_flux_residual"].get<double>() < 1e-8);
    // manifest hashes match the files on disk
    const json man = json::parse(slurp(out / "manifest.json"));
    for (const auto& f : man["files"]) CHECK(sha256_hex(slurp(out / f["path"].get<std::string>())) == f["sha256"]);
    CHECK(fs::exists(out / "dataset.csv"));
    CHECK(fs::exists(out / "amplitudes.gp"));
}

TEST_CASE("metrics are identical across thread counts") {
    const fs::path a = scratch() / "det1", b = scratch() / "det2";
    const std::string cfg = (kConfigs / "flux_free_space.json").string();
    REQUIRE(run("run " + cfg + " --out " + a.string() + " --threads 1").status == 0);
    REQUIRE(run("run " + cfg + " --out " + b.string() + " --threads 3").status == 0);
    CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
    CHECK(slurp(a / "dataset.json") == slurp(b / "dataset.json"));
    // rerunning into an existing output directory replaces it
    CHECK(run("run " + cfg + " --out " + a.string()).status == 0);
    CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
}

TEST_CASE("DtN comparison passes") {
    const fs::path out = scratch() / "dtn";
    const Run r = run("run " + (kConfigs / "dtn_compare.json").string() + " --out " + out.string());
    CHECK(r.status == 0);
    CHECK(fs::exists(out / "dtn_direct.json"));
}

TEST_CASE("a tightened tolerance on a coarse grid fails the audit") {
    json cfg = json::parse(slurp(kConfigs / "lemma1.json"));
    cfg["scenario"] = (kConfigs / "scenarios" / "reference_te.json").string();
    cfg["tolerances"] = {{"lemma1", 1e-6}};
    const fs::path p = write_config("lemma1_tight.json", cfg);
    const fs::path out = scratch() / "lemma1";
    const Run r = run("run " + p.string() + " --resolution-scale 0.5 --out " + out.string());
    CHECK(r.status == kAuditFailureExitCode);
    const json m = json::parse(slurp(out / "metrics.json"));
    CHECK_FALSE(m["passed"].get<bool>());
}

TEST_CASE("threshold collisions are rejected before solving") {
    json cfg = json::parse(slurp(kConfigs / "flux_free_space.json"));
    cfg["scenario"] = (kConfigs / "scenarios" / "free_space.json").string();
    cfg["k"] = {1.2};  // |1 + 0.2|
    const Run r = run("validate " + write_config("collide.json", cfg).string());
    CHECK(r.status == 3);
    CHECK(r.err.find("p=1") != std::string::npos);
    CHECK(r.err.find("try") != std::string::npos);
}

TEST_CASE("missing files are parse errors naming the path") {
    json cfg = {{"experiment", "flux_audit"}, {"scenario", "does_not_exist.json"}, {"k", {1.5}}};
    const Run r = run("validate " + write_config("missing.json", cfg).string());
    CHECK(r.status == 2);
    CHECK(r.err.find("does_not_exist.json") != std::string::npos);
    CHECK(run("validate " + (scratch() / "nope.json").string()).status == 2);
}

TEST_CASE("environment thread fallback and validation output") {
    ::setenv("MODESCATTER_THREADS", "2", 1);
    CHECK(run("validate " + (kConfigs / "time_synthesis.json").string()).status == 0);
    const json v = json::parse(slurp(scratch() / "stdout.txt"));
    CHECK(v["experiment"] == "time_synthesis");
    CHECK(v["time"]["pad_factor"] == 8);
    ::setenv("MODESCATTER_THREADS", "many", 1);
    CHECK(run("validate " + (kConfigs / "time_synthesis.json").string()).status == 2);
    ::unsetenv("MODESCATTER_THREADS");
}

TEST_CASE("config resolution in process") {
    const ExperimentConfig cfg = validate_config(kConfigs / "flux_te.json");
    CHECK(cfg.kind == ExperimentKind::flux_audit);
    CHECK(cfg.M == grating_default_cutoff(2.4, 0.0));
    CHECK(cfg.scenario.T_prime == 3.0);
    CHECK(cfg.tolerance("flux") == 1e-2);
    const ExperimentConfig half = validate_config(kConfigs / "flux_te.json", 0.5);
    CHECK(half.scenario.grid.n1 == 32);
    CHECK(half.scenario.grid.h2 == doctest::Approx(0.05));
    const ExperimentConfig guide = validate_config(kConfigs / "waveguide_sweep.json");
    CHECK(guide.scenario.geometry == Geometry::waveguide);
    CHECK_THROWS_AS(experiment_from_string("bogus"), ParseError);
}

TEST_CASE("sampled scenario round trip") {
    const Scenario s = load_scenario(kConfigs / "scenarios" / "pec_disk_case2.json");
    CHECK(s.has_conductors());
    const Scenario back = scenario_from_json(json::parse(scenario_to_json(s).dump()));
    CHECK(back.medium == s.medium);
    CHECK(back.conductor == s.conductor);
    CHECK(back.R == s.R);
    CHECK_THROWS_AS(scenario_from_json(scenario_to_json(s), 2.0), InvalidScenarioError);
}
