// Batch front-end: run, sweep and validate scenario manifests.
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "invopt/batch.hpp"

namespace {

constexpr int exit_usage = 2;

std::vector<std::string> split_values(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inverse-optimal boundary feedback: closed-loop runs and cost ledgers"};
    app.require_subcommand(1);

    std::string manifest_path;
    invopt::BatchOptions opt;
    std::string out_dir;
    std::string param;
    std::string values;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("manifest", manifest_path, "Manifest JSON file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides the manifest)");
        sub->add_option("--jobs", opt.jobs, "Concurrent scenario runs (0 = all cores)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--strict", opt.strict, "Treat certificate warnings as failures");
    };

    auto* run = app.add_subcommand("run", "Run every scenario and write CSV/JSON artifacts");
    add_common(run);
    auto* sweep = app.add_subcommand("sweep", "Run every scenario once per parameter value");
    add_common(sweep);
    sweep->add_option("--param", param, "m | eps | n | delta")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    auto* validate = app.add_subcommand("validate", "Parse and validate a manifest");
    validate->add_option("manifest", manifest_path, "Manifest JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }
    if (!out_dir.empty()) opt.out_dir = out_dir;

    try {
        const invopt::RunManifest m = invopt::parse_manifest(manifest_path);
        if (*validate) {
            std::cout << "OK: " << m.scenarios.size() << " scenario(s)\n" << invopt::serialize_manifest(m);
            return 0;
        }
        if (*run) return invopt::cmd_run(m, opt, std::cout);
        return invopt::cmd_sweep(m, param, split_values(values), opt, std::cout);
    } catch (const invopt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
}
