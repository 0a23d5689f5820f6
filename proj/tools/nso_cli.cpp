#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nso/analysis.hpp"
#include "nso/config.hpp"
#include "nso/experiments.hpp"
#include "nso/kernels.hpp"
#include "nso/trajectory_io.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kVerdictFailed = 1;
constexpr int kConfigError = 2;

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool json = false;
    bool full = false;
};

int thread_setting(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("NSO_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid NSO_THREADS='" << env << "'\n";
    }
    return 0;
}

int run(const std::string& name, const RunArgs& args) {
    nso::Config cfg = args.config.empty() ? nso::Config::parse("", "<defaults>") : nso::Config::load(args.config);
    const std::string declared = cfg.get_string("experiment", name);
    std::string a = declared;
    std::string b = name;
    std::replace(a.begin(), a.end(), '_', '-');
    std::replace(b.begin(), b.end(), '_', '-');
    if (a != b) cfg.fail("experiment", "config is for '" + declared + "', not '" + name + "'");
    nso::ExperimentRequest req;
    req.seed = args.seed ? *args.seed : cfg.get_uint("seed", 0);
    req.full = args.full;

    const nso::RunReport report = nso::run_experiment(name, cfg, req);
    if (!args.out.empty()) report.write_csv(args.out);
    if (args.json)
        std::cout << report.to_json().dump(2) << '\n';
    else
        report.write_summary(std::cout);
    return report.passed() ? kOk : kVerdictFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise stability optimization experiments"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default NSO_THREADS, then OpenMP)")
        ->check(CLI::NonNegativeNumber);

    RunArgs args;
    std::string selected;
    for (const auto& name : nso::experiment_names()) {
        CLI::App* sub = app.add_subcommand(name, "Run the " + name + " experiment");
        sub->add_option("--config", args.config, "TOML config")->check(CLI::ExistingFile);
        sub->add_option("--seed", args.seed, "Master seed (overrides the config)");
        sub->add_option("--out", args.out, "CSV output path");
        sub->add_flag("--json", args.json, "Print the report as JSON");
        sub->add_flag("--full", args.full, "Larger problem sizes (sensing)");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);
        sub->callback([&selected, name] { selected = name; });
    }

    nso::BoundInputs b;
    double radius = 1.0;
    double gbound = 1.0;
    CLI::App* bounds = app.add_subcommand("bounds", "Print the closed-form bounds");
    bounds->add_option("--C", b.c, "Smoothness constant")->check(CLI::PositiveNumber);
    bounds->add_option("--D", b.d, "Initial suboptimality scale")->check(CLI::NonNegativeNumber);
    bounds->add_option("--sigma", b.sigma, "Oracle noise level")->check(CLI::NonNegativeNumber);
    bounds->add_option("--H", b.h, "Perturbation second moment")->check(CLI::NonNegativeNumber);
    bounds->add_option("--k", b.k, "Perturbation pairs per step")->check(CLI::PositiveNumber);
    bounds->add_option("--T", b.t, "Steps")->check(CLI::PositiveNumber);
    bounds->add_option("--R", radius, "Convex radius")->check(CLI::PositiveNumber);
    bounds->add_option("--G", gbound, "Convex gradient bound")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    if (const int n = thread_setting(threads); n > 0) nso::kernels::set_thread_count(n);

    if (bounds->parsed()) {
        const auto cb = nso::convex_bound(radius, gbound, b.t);
        std::cout << "theorem1_rhs " << nso::format_real(nso::theorem1_rhs(b)) << '\n'
                  << "theorem2_rhs " << nso::format_real(nso::theorem2_rhs(b)) << '\n'
                  << "optimal_eta " << nso::format_real(nso::optimal_eta(b)) << '\n'
                  << "convex_eta " << nso::format_real(cb.eta) << '\n'
                  << "convex_bound " << nso::format_real(cb.bound) << '\n';
        return kOk;
    }

    try {
        return run(selected, args);
    } catch (const nso::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kVerdictFailed;
    }
}
