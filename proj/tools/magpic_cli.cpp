#include "magpic/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <exception>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"Particle-in-cell toolkit for strongly magnetized 2D Vlasov-Poisson"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the experiment described by a configuration file");
    std::string config_path;
    std::vector<double> epsilons;
    std::vector<double> dts;
    std::vector<int> orders;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    run->add_option("config", config_path, "Configuration file (key = value lines)")->required();
    run->add_option("--epsilon", epsilons, "Override epsilon list (comma separated)")->delimiter(',');
    run->add_option("--dt", dts, "Override time step list (comma separated)")->delimiter(',');
    run->add_option("--order", orders, "Override scheme orders (comma separated)")->delimiter(',');
    run->add_option("--out", out_dir, "Override output directory");
    run->add_option("--seed", seed, "Override random seed");
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        magpic::ExperimentConfig cfg = magpic::parse_config(config_path);
        if (!epsilons.empty()) cfg.epsilons = epsilons;
        if (!dts.empty()) cfg.dts = dts;
        if (!orders.empty()) cfg.orders = orders;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.seed = *seed;
        if (workers) cfg.workers = *workers;
        try {
            cfg.validate();
        } catch (const magpic::ConfigError& e) {
            throw magpic::ConfigError(fmt::format("command line: {}", e.what()));
        }

        if (cfg.family == magpic::Family::VlasovPoisson) {
            for (const auto& s : magpic::run_vlasov_poisson(cfg)) {
                fmt::print("eps={} energy drift {:.3e} adiabatic drift {:.3e} max escaped fraction {:.3e} -> {}\n",
                           s.epsilon, s.energy_drift, s.adiabatic_drift, s.max_escaped_fraction,
                           s.directory.string());
            }
        } else {
            const auto rows = magpic::run_single_particle_sweep(cfg);
            std::size_t failed = 0;
            for (const auto& r : rows) failed += r.ok ? 0 : 1;
            fmt::print("{} cells ({} failed) -> {}\n", rows.size(), failed, (cfg.out_dir / "errors.csv").string());
        }
    } catch (const magpic::ConfigError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
