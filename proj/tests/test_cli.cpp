#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "qmask/cli.hpp"

using namespace qmask;
using namespace qmask::cli;
namespace fs = std::filesystem;

namespace {

RunOutcome dry(const std::string& text) {
    RunOptions opt;
    opt.write = false;
    return run_manifest_text(text, opt);
}

std::string field_of(const RunOutcome& r) { return r.error.value("field", std::string{}); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qmask-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_binary(const std::string& args, const std::string& env = "") {
    const char* bin = std::getenv("QMASK_BIN");
    if (!bin) return -1;
    const std::string cmd = env + " \"" + std::string(bin) + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const json& catalog_manifest(const std::string& name) {
    static const auto entries = catalog();
    for (const auto& e : entries)
        if (e.name == name) return e.manifest;
    throw std::logic_error("no catalog entry " + name);
}

}  // namespace

TEST_CASE("malformed JSON is a validation error naming the manifest", "[cli]") {
    const RunOutcome r = dry("{\"command\": \"entropy\",");
    CHECK(r.exit_code == kValidation);
    CHECK(field_of(r) == "manifest");
    CHECK(r.error["type"] == "ParseError");
}

TEST_CASE("unknown fields are rejected with their path", "[cli]") {
    const RunOutcome top = dry(R"({"command": "dephasing", "colour": 1,
        "parameters": {"q": 0.1, "eps0": 0, "eps1": 1, "lambda_grid": [0]}})");
    CHECK(top.exit_code == kValidation);
    CHECK(field_of(top) == "colour");
    const RunOutcome nested = dry(R"({"command": "dephasing",
        "parameters": {"q": 0.1, "eps0": 0, "eps1": 1, "lambda_grid": [0], "lamda": 2}})");
    CHECK(nested.exit_code == kValidation);
    CHECK(field_of(nested) == "parameters.lamda");
}

TEST_CASE("out-of-range and mistyped values name the field", "[cli]") {
    const RunOutcome range = dry(R"({"command": "dephasing",
        "parameters": {"q": 0.1, "eps0": 2, "eps1": 1, "lambda_grid": [0]}})");
    CHECK(range.exit_code == kValidation);
    CHECK(field_of(range) == "parameters.eps0");
    const RunOutcome elem = dry(R"({"command": "dephasing",
        "parameters": {"q": 0.1, "eps0": 0, "eps1": 1, "lambda_grid": [0, "x"]}})");
    CHECK(field_of(elem) == "parameters.lambda_grid[1]");
    const RunOutcome cmd = dry(R"({"command": "frobnicate"})");
    CHECK(field_of(cmd) == "command");
}

TEST_CASE("stochastic commands require a seed", "[cli]") {
    json m = catalog_manifest("decoupling-monte-carlo");
    m.erase("seed");
    RunOptions opt;
    opt.write = false;
    const RunOutcome r = run_manifest_json(m, opt);
    CHECK(r.exit_code == kValidation);
    CHECK(field_of(r) == "seed");
    opt.seed = 3;
    json small = m;
    small["parameters"]["samples"] = 5;
    CHECK(run_manifest_json(small, opt).exit_code == kOk);
}

TEST_CASE("CSV header records version, command, seed and sample count", "[cli]") {
    json m = catalog_manifest("decoupling-monte-carlo");
    m["parameters"]["samples"] = 5;
    RunOptions opt;
    opt.write = false;
    const RunOutcome r = run_manifest_json(m, opt);
    REQUIRE(r.exit_code == kOk);
    const std::string first = r.csv.substr(0, r.csv.find('\n'));
    CHECK(first == "# qmask 0.1.0 command=decouple seed=7 samples=5");
    CHECK(r.resolved["parameters"]["samples"] == 5);
    CHECK(r.resolved["parameters"]["epsilon"] == 0.0);
}

TEST_CASE("seeded runs are byte-identical", "[cli]") {
    json m = catalog_manifest("determinism");
    m["parameters"]["samples"] = 10;
    RunOptions opt;
    opt.write = false;
    const RunOutcome a = run_manifest_json(m, opt), b = run_manifest_json(m, opt);
    REQUIRE(a.exit_code == kOk);
    CHECK(a.csv == b.csv);
    opt.seed = 12;
    CHECK(run_manifest_json(m, opt).csv != a.csv);
}

TEST_CASE("catalog covers every acceptance criterion", "[cli]") {
    const auto entries = catalog();
    std::set<std::string> names, criteria;
    for (const auto& e : entries) {
        names.insert(e.name);
        criteria.insert(e.criterion);
    }
    CHECK(names.count("dephasing-closed-form"));
    CHECK(names.count("erasure-ea-capacity"));
    CHECK(names.count("controlled-z-code"));
    for (int i = 1; i <= 11; ++i) CHECK(criteria.count(std::to_string(i)));
}

TEST_CASE("entropy command on the maximally entangled baseline", "[cli]") {
    const RunOutcome r = dry(catalog_manifest("maximally-entangled-baseline").dump());
    REQUIRE(r.exit_code == kOk);
    CHECK(std::abs(r.result["value"].get<double>() - 2 * std::log2(3.0)) < 1e-10);
    CHECK(r.csv.find("mutual,A,B,,3.16992500144,exact") != std::string::npos);
}

TEST_CASE("matrix states are validated", "[cli]") {
    const RunOutcome bad = dry(R"({"command": "entropy",
        "instance": {"state": "matrix", "shape": {"labels": ["A"], "dims": [2]}, "matrix": [[1, 0], [0, 1]]},
        "parameters": {"quantity": "entropy", "a": ["A"]}})");
    CHECK(bad.exit_code == kValidation);
    CHECK(field_of(bad) == "instance.matrix");
    const RunOutcome ok = dry(R"({"command": "entropy",
        "instance": {"state": "matrix", "shape": {"labels": ["A"], "dims": [2]}, "matrix": [[0.5, 0], [0, 0.5]]},
        "parameters": {"quantity": "entropy", "a": ["A"]}})");
    REQUIRE(ok.exit_code == kOk);
    CHECK(ok.result["value"] == 1.0);
}

TEST_CASE("dimension cap maps to exit code 3", "[cli]") {
    const std::size_t saved = dim_cap();
    set_dim_cap(4);
    const RunOutcome r = dry(R"({"command": "entropy", "instance": {"state": "maximally-entangled", "dim": 3},
        "parameters": {"quantity": "mutual", "a": ["A"], "b": ["B"]}})");
    set_dim_cap(saved);
    CHECK(r.exit_code == kDimension);
    CHECK(r.error["error"] == "dimension");
}

TEST_CASE("runs write csv, json and the resolved manifest", "[cli]") {
    const fs::path dir = scratch("write");
    RunOptions opt;
    opt.out_dir = dir;
    const RunOutcome r = run_manifest_json(catalog_manifest("dephasing-closed-form"), opt);
    REQUIRE(r.exit_code == kOk);
    CHECK(fs::exists(dir / "dephasing.csv"));
    CHECK(fs::exists(dir / "dephasing.json"));
    CHECK(fs::exists(dir / "manifest.resolved.json"));
    std::ifstream in(dir / "manifest.resolved.json");
    const json resolved = json::parse(in);
    // The resolved manifest runs to the same CSV.
    RunOptions again;
    again.write = false;
    CHECK(run_manifest_json(resolved, again).csv == r.csv);
    fs::remove_all(dir);
}

TEST_CASE("binary exit codes", "[cli][binary]") {
    if (!std::getenv("QMASK_BIN")) SKIP("QMASK_BIN not set");
    const fs::path dir = scratch("bin");
    const auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream(dir / name) << body;
        return (dir / name).string();
    };
    const std::string ok = write("ok.json", catalog_manifest("maximally-entangled-baseline").dump());
    const std::string broken = write("broken.json", "{\"command\": ");
    const std::string out = (dir / "out").string();
    CHECK(run_binary("entropy --manifest " + ok + " --out " + out) == 0);
    CHECK(fs::exists(dir / "out" / "entropy.csv"));
    CHECK(run_binary("entropy --manifest " + broken) == 2);
    CHECK(run_binary("entropy --manifest " + (dir / "missing.json").string()) == 2);
    CHECK(run_binary("region --manifest " + ok) == 2);
    CHECK(run_binary("entropy --manifest " + ok + " --out " + out, "QMASK_DIM_CAP=4") == 3);
    CHECK(run_binary("entropy --manifest " + ok, "QMASK_DIM_CAP=abc") == 2);
    CHECK(run_binary("list-examples") == 0);
    fs::remove_all(dir);
}
