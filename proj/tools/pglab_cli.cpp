#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pglab/harness.hpp"

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Policy-gradient lab: seeded PPO / GRPO / Hybrid comparisons"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_csv, target_dir;
    int parallel = 1;

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--seeds", seeds_csv, "comma-separated seed list override");
    run->add_option("--out", out_dir, "output root override");
    run->add_option("--parallel", parallel, "max concurrent (algorithm x seed) cells");

    auto* report = app.add_subcommand("report", "aggregate metrics into a report");
    report->add_option("dir", target_dir, "experiment output directory")->required();

    auto* plot = app.add_subcommand("plot", "regenerate learning-curve SVGs");
    plot->add_option("dir", target_dir, "experiment output directory")->required();

    app.add_subcommand("selftest", "run the built-in invariant suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto config = pglab::load_experiment_config(config_path);
            if (!seeds_csv.empty()) config.seeds = parse_seed_list(seeds_csv);
            if (!out_dir.empty()) {
                config.output_dir = out_dir;
            } else if (const char* env_root = std::getenv("PGLAB_OUT_ROOT")) {
                config.output_dir = std::string(env_root) + "/" + config.output_dir;
            }
            config.validate();
            const int failures = pglab::run_experiment(config, parallel);
            if (failures > 0) {
                std::cerr << failures << " cell(s) failed\n";
                return 1;
            }
            std::cout << "experiment complete: " << pglab::experiment_dir(config)
                      << "\n";
            return 0;
        }
        if (report->parsed()) {
            const auto rep = pglab::generate_report(target_dir);
            std::cout << rep.to_text();
            return 0;
        }
        if (plot->parsed()) {
            for (const auto& f : pglab::plot_curves(target_dir))
                std::cout << "wrote " << f << "\n";
            return 0;
        }
        return pglab::run_selftest() == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
