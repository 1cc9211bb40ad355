// qmask <command> --manifest <path> [--out <dir>] [--seed <u64>]
// qmask list-examples [--write <dir>]

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qmask/cli.hpp"

namespace {

void apply_dim_cap_env() {
    if (const char* v = std::getenv("QMASK_DIM_CAP")) {
        char* end = nullptr;
        const unsigned long long cap = std::strtoull(v, &end, 10);
        if (end == v || *end != '\0' || cap == 0) {
            std::cerr << qmask::cli::error_json("validation", "EnvError", "QMASK_DIM_CAP", "expected a positive integer")
                             .dump()
                      << "\n";
            std::exit(qmask::cli::kValidation);
        }
        qmask::set_dim_cap(static_cast<std::size_t>(cap));
    }
}

int list_examples(const std::string& write_dir) {
    const auto entries = qmask::cli::catalog();
    for (const auto& e : entries) {
        std::cout << e.name << "  (criterion " << e.criterion << ")\n" << e.manifest.dump(2) << "\n\n";
        if (!write_dir.empty()) {
            std::filesystem::create_directories(write_dir);
            qmask::cli::write_file(std::filesystem::path(write_dir) / (e.name + ".json"), e.manifest.dump(2) + "\n");
        }
    }
    return qmask::cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masking-region toolkit: entropies, regions, decoupling, codes"};
    app.set_version_flag("--version", qmask::kVersion);
    std::string command, manifest, out_dir, write_dir;
    std::uint64_t seed = 0;
    app.add_option("command", command, "entropy | region | decouple | dephasing | classcheck | code | list-examples")
        ->required();
    auto* m = app.add_option("--manifest", manifest, "JSON run manifest");
    auto* o = app.add_option("--out", out_dir, "output directory");
    auto* s = app.add_option("--seed", seed, "overrides the manifest seed");
    app.add_option("--write", write_dir, "list-examples: also write each manifest here");
    CLI11_PARSE(app, argc, argv);

    apply_dim_cap_env();
    if (command == "list-examples") return list_examples(write_dir);

    const auto& cmds = qmask::cli::commands();
    if (std::find(cmds.begin(), cmds.end(), command) == cmds.end()) {
        std::cerr << qmask::cli::error_json("validation", "UsageError", "command", "unknown command '" + command + "'")
                         .dump()
                  << "\n";
        return qmask::cli::kValidation;
    }
    if (!*m) {
        std::cerr << qmask::cli::error_json("validation", "UsageError", "manifest", "--manifest is required").dump()
                  << "\n";
        return qmask::cli::kValidation;
    }
    std::ifstream in(manifest, std::ios::binary);
    if (!in) {
        std::cerr << qmask::cli::error_json("validation", "UsageError", "manifest", "cannot read " + manifest).dump()
                  << "\n";
        return qmask::cli::kValidation;
    }
    std::stringstream buf;
    buf << in.rdbuf();

    qmask::cli::RunOptions opt;
    opt.command = command;
    if (*o) opt.out_dir = out_dir;
    if (*s) opt.seed = seed;
    const auto outcome = qmask::cli::run_manifest_text(buf.str(), opt);
    if (outcome.exit_code != qmask::cli::kOk) {
        std::cerr << outcome.error.dump() << "\n";
        return outcome.exit_code;
    }
    for (const auto& p : outcome.written) std::cout << p.string() << "\n";
    return qmask::cli::kOk;
}
