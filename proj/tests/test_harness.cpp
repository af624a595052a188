#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pglab/harness.hpp"
#include "pglab/rng.hpp"

using namespace pglab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("pglab_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

const char* kMinimalConfig = R"({
  "version": 1,
  "name": "smoke",
  "environment": {"name": "sparse_chain", "params": {"horizon": 12}},
  "algorithms": [
    {"name": "ppo", "algorithm": "ppo", "epochs": 1, "minibatch": 32,
     "macro_steps_per_batch": 24},
    {"name": "hybrid", "algorithm": "hybrid", "group_size": 2, "epochs": 1,
     "minibatch": 32, "macro_steps_per_batch": 24}
  ],
  "seeds": [1, 2],
  "batches": 2
})";

}  // namespace

TEST_CASE("config parsing: fields, defaults, and overrides") {
    const auto dir = temp_dir("config");
    spit(dir / "exp.json", kMinimalConfig);
    const auto cfg = load_experiment_config((dir / "exp.json").string());
    CHECK(cfg.name == "smoke");
    CHECK(cfg.env_name == "sparse_chain");
    CHECK(cfg.env_params.at("horizon") == 12);
    REQUIRE(cfg.algorithms.size() == 2);
    CHECK(cfg.algorithms[0].name == "ppo");
    CHECK(cfg.algorithms[0].opt.algorithm == Algorithm::Ppo);
    CHECK(cfg.algorithms[1].opt.group_size == 2);
    CHECK(cfg.algorithms[1].opt.macro_steps_per_batch == 24);
    CHECK(cfg.seeds == std::vector<uint64_t>{1, 2});
    CHECK(cfg.batches == 2);
    CHECK(cfg.stop_on_success);  // default
    fs::remove_all(dir);
}

TEST_CASE("config parsing: malformed JSON reports the offending line") {
    const auto dir = temp_dir("badjson");
    spit(dir / "exp.json", "{\n  \"name\": \"x\",\n  \"oops\"\n}\n");
    try {
        load_experiment_config((dir / "exp.json").string());
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        CHECK(what.find("exp.json:") != std::string::npos);
        CHECK(what.find(":4") != std::string::npos);  // error surfaces on line 4
    }
    fs::remove_all(dir);
}

TEST_CASE("config validation rejects structural mistakes") {
    nlohmann::json j = nlohmann::json::parse(kMinimalConfig);

    auto dup = j;
    dup["algorithms"][1]["name"] = "ppo";
    CHECK_THROWS(parse_experiment_config(dup));

    auto noseeds = j;
    noseeds["seeds"] = nlohmann::json::array();
    CHECK_THROWS(parse_experiment_config(noseeds));

    auto badver = j;
    badver["version"] = 2;
    CHECK_THROWS(parse_experiment_config(badver));

    // Zero batches is a valid (no-op) experiment.
    auto zero = j;
    zero["batches"] = 0;
    CHECK(parse_experiment_config(zero).batches == 0);
}

TEST_CASE("metrics record: JSONL round trip is lossless") {
    RngStream rng(3);
    for (int i = 0; i < 50; ++i) {
        MetricsRecord rec;
        rec.experiment = "exp";
        rec.algorithm = "hybrid";
        rec.seed = rng.next_u64();
        rec.stats.batch = static_cast<int>(rng.below(1000));
        rec.stats.macro_steps = static_cast<long long>(rng.below(1 << 20));
        rec.stats.raw_steps = 4 * rec.stats.macro_steps;
        rec.stats.mean_return = rng.uniform(-10.0, 10.0) / 3.0;
        rec.stats.policy_loss = rng.normal();
        rec.stats.value_loss = rng.uniform();
        rec.stats.adv_mean = rng.normal() * 1e-7;
        rec.stats.adv_variance = rng.uniform() * 1e9;
        rec.stats.mean_ratio = 1.0 + rng.normal() * 0.01;
        rec.stats.clip_fraction = rng.uniform();
        rec.stats.entropy = rng.uniform() * 2.0;
        rec.stats.grad_norm = rng.uniform() * 100.0;

        const std::string line = rec.to_json().dump();
        const auto back = MetricsRecord::from_json(nlohmann::json::parse(line));
        CHECK(back.seed == rec.seed);
        CHECK(back.stats.mean_return == rec.stats.mean_return);  // bit-exact
        CHECK(back.stats.policy_loss == rec.stats.policy_loss);
        CHECK(back.stats.adv_mean == rec.stats.adv_mean);
        CHECK(back.stats.adv_variance == rec.stats.adv_variance);
        CHECK(back.stats.grad_norm == rec.stats.grad_norm);

        // CSV row survives a text round trip too (%.17g).
        std::stringstream ss(rec.csv_row());
        std::string field;
        for (int skip = 0; skip < 6; ++skip) std::getline(ss, field, ',');
        std::getline(ss, field, ',');
        CHECK(std::stod(field) == rec.stats.mean_return);
    }
}

TEST_CASE("run_experiment: artifacts, idempotence, and deterministic plots") {
    const auto out_root = temp_dir("run");
    auto cfg = parse_experiment_config(nlohmann::json::parse(kMinimalConfig));
    cfg.output_dir = out_root.string();

    REQUIRE(run_experiment(cfg, 2) == 0);
    const fs::path dir = experiment_dir(cfg);
    for (const char* algo : {"ppo", "hybrid"}) {
        for (uint64_t seed : {1ull, 2ull}) {
            const auto stem = cell_stem(algo, seed);
            CHECK(fs::exists(dir / (stem + ".metrics.jsonl")));
            CHECK(fs::exists(dir / (stem + ".done")));
        }
    }
    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "report.txt"));
    CHECK(fs::exists(dir / "return_vs_macro_steps.svg"));
    CHECK(fs::exists(dir / "return_vs_raw_steps.svg"));

    // Ratio invariant straight off the persisted metrics: raw = N * macro.
    for (const auto& rec : {std::pair<std::string, long long>{"ppo", 1},
                            std::pair<std::string, long long>{"hybrid", 2}}) {
        std::ifstream in(dir / (cell_stem(rec.first, 1) + ".metrics.jsonl"));
        std::string line;
        while (std::getline(in, line)) {
            const auto m = MetricsRecord::from_json(nlohmann::json::parse(line));
            CHECK(m.stats.raw_steps == rec.second * m.stats.macro_steps);
        }
    }

    // Second run skips completed cells and leaves the metrics bytes untouched.
    const std::string before = slurp(dir / (cell_stem("ppo", 1) + ".metrics.jsonl"));
    REQUIRE(run_experiment(cfg, 1) == 0);
    CHECK(slurp(dir / (cell_stem("ppo", 1) + ".metrics.jsonl")) == before);

    // Plotting is a pure function of the CSV: byte-identical on re-run.
    const std::string svg1 = slurp(dir / "return_vs_macro_steps.svg");
    plot_curves(dir.string());
    CHECK(slurp(dir / "return_vs_macro_steps.svg") == svg1);

    fs::remove_all(out_root);
}

TEST_CASE("generate_report: medians over seeds and unreached thresholds") {
    const auto dir = temp_dir("report");
    nlohmann::ordered_json meta;
    meta["version"] = 1;
    meta["name"] = "medians";
    meta["environment"] = {{"name", "sparse_chain"}, {"params", nlohmann::json::object()}};
    meta["success_threshold"] = 0.5;
    meta["algorithms"] = {"fast", "never"};
    meta["seeds"] = {1, 2, 3};
    spit(dir / "experiment.json", meta.dump(2));

    // "fast" crosses 0.5 at macro-step 30 / 40 / 50 across the three seeds.
    const int cross_at[] = {3, 4, 5};
    for (int s = 1; s <= 3; ++s) {
        std::ostringstream jsonl;
        for (int b = 0; b < 6; ++b) {
            MetricsRecord rec;
            rec.experiment = "medians";
            rec.algorithm = "fast";
            rec.seed = static_cast<uint64_t>(s);
            rec.stats.batch = b;
            rec.stats.macro_steps = 10 * (b + 1) - 10 + 10;  // 10, 20, ...
            rec.stats.raw_steps = 2 * rec.stats.macro_steps;
            rec.stats.mean_return = b >= cross_at[s - 1] - 1 ? 0.9 : 0.1;
            rec.stats.adv_variance = 1.0 * s;
            jsonl << rec.to_json().dump() << "\n";
        }
        spit(dir / (cell_stem("fast", s) + ".metrics.jsonl"), jsonl.str());
        // "never" stays flat below the threshold.
        std::ostringstream flat;
        for (int b = 0; b < 6; ++b) {
            MetricsRecord rec;
            rec.experiment = "medians";
            rec.algorithm = "never";
            rec.seed = static_cast<uint64_t>(s);
            rec.stats.batch = b;
            rec.stats.macro_steps = 10 * (b + 1);
            rec.stats.raw_steps = 40 * (b + 1);
            rec.stats.mean_return = 0.2;
            rec.stats.adv_variance = 7.0;
            flat << rec.to_json().dump() << "\n";
        }
        spit(dir / (cell_stem("never", s) + ".metrics.jsonl"), flat.str());
    }

    const auto report = generate_report(dir.string());
    REQUIRE(report.algorithms.size() == 2);
    const auto& fast = report.algorithms[0];
    CHECK(fast.algorithm == "fast");
    REQUIRE(fast.macro_steps_to_threshold.has_value());
    CHECK(*fast.macro_steps_to_threshold == doctest::Approx(40.0));
    REQUIRE(fast.batches_to_threshold.has_value());
    CHECK(*fast.batches_to_threshold == doctest::Approx(3.0));  // batch index 3
    CHECK(fast.final_return_mean == doctest::Approx(0.9));
    CHECK(fast.seeds_reported == 3);
    CHECK(fast.median_adv_variance == doctest::Approx(2.0));

    const auto& never = report.algorithms[1];
    CHECK_FALSE(never.batches_to_threshold.has_value());
    CHECK_FALSE(never.macro_steps_to_threshold.has_value());
    CHECK(never.final_return_mean == doctest::Approx(0.2));

    // Missing cells are listed, not fatal.
    fs::remove(dir / (cell_stem("fast", 2) + ".metrics.jsonl"));
    const auto partial = generate_report(dir.string());
    CHECK(partial.algorithms[0].seeds_reported == 2);
    CHECK(partial.algorithms[0].missing_cells.size() == 1);

    fs::remove_all(dir);
}

TEST_CASE("plot_curves: header-only CSV still yields valid SVG files") {
    const auto dir = temp_dir("emptyplot");
    spit(dir / "metrics.csv", MetricsRecord::csv_header() + "\n");
    const auto written = plot_curves(dir.string());
    CHECK(written.size() == 2);
    for (const auto& p : written) {
        const auto svg = slurp(p);
        CHECK(svg.find("<svg") != std::string::npos);
        CHECK(svg.find("</svg>") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("selftest passes") { CHECK(run_selftest() == 0); }
