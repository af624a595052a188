#include "pglab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "pglab/oracles.hpp"

namespace fs = std::filesystem;

namespace pglab {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int line_of_byte(const std::string& text, size_t byte) {
    int line = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

void apply_optimizer_overrides(OptimizerConfig& opt, const nlohmann::json& j) {
    if (j.contains("gamma")) opt.gamma = j.at("gamma").get<double>();
    if (j.contains("clip_epsilon")) opt.clip_epsilon = j.at("clip_epsilon").get<double>();
    if (j.contains("group_size")) opt.group_size = j.at("group_size").get<int>();
    if (j.contains("n_step")) opt.n_step = j.at("n_step").get<int>();
    if (j.contains("nstep_exhaustive"))
        opt.nstep_exhaustive = j.at("nstep_exhaustive").get<bool>();
    if (j.contains("entropy_coef")) opt.entropy_coef = j.at("entropy_coef").get<double>();
    if (j.contains("guidance_beta")) opt.guidance_beta = j.at("guidance_beta").get<double>();
    if (j.contains("guidance_candidates"))
        opt.guidance_candidates = j.at("guidance_candidates").get<int>();
    if (j.contains("policy_lr")) opt.policy_lr = j.at("policy_lr").get<double>();
    if (j.contains("value_lr")) opt.value_lr = j.at("value_lr").get<double>();
    if (j.contains("epochs")) opt.epochs = j.at("epochs").get<int>();
    if (j.contains("minibatch")) opt.minibatch = j.at("minibatch").get<int>();
    if (j.contains("macro_steps_per_batch"))
        opt.macro_steps_per_batch = j.at("macro_steps_per_batch").get<int>();
    if (j.contains("transform"))
        opt.transform = reward_transform_from_string(j.at("transform").get<std::string>());
    if (j.contains("normalizer_window"))
        opt.normalizer_window = j.at("normalizer_window").get<int>();
    if (j.contains("grpo_std_normalize"))
        opt.grpo_std_normalize = j.at("grpo_std_normalize").get<bool>();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (name.empty()) throw std::invalid_argument("experiment name must not be empty");
    if (seeds.empty()) throw std::invalid_argument("seed list must not be empty");
    if (algorithms.empty()) throw std::invalid_argument("algorithm list must not be empty");
    std::set<std::string> names;
    for (const auto& a : algorithms)
        if (!names.insert(a.name).second)
            throw std::invalid_argument("duplicate algorithm name: " + a.name);
    if (batches < 0) throw std::invalid_argument("batches must be >= 0");
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.version = j.value("version", 1);
    if (cfg.version != 1)
        throw std::invalid_argument("unsupported config schema version");
    cfg.name = j.at("name").get<std::string>();
    const auto& env = j.at("environment");
    cfg.env_name = env.at("name").get<std::string>();
    cfg.env_params = env.value("params", nlohmann::json::object());
    for (const auto& aj : j.at("algorithms")) {
        AlgorithmConfig ac;
        ac.opt.algorithm =
            algorithm_from_string(aj.at("algorithm").get<std::string>());
        ac.name = aj.value("name", to_string(ac.opt.algorithm));
        apply_optimizer_overrides(ac.opt, aj);
        cfg.algorithms.push_back(std::move(ac));
    }
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<uint64_t>());
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.batches = j.value("batches", 100);
    cfg.checkpoint_interval = j.value("checkpoint_interval", 0);
    if (j.contains("success_threshold"))
        cfg.success_threshold = j.at("success_threshold").get<double>();
    cfg.patience = j.value("patience", 5);
    cfg.stop_on_success = j.value("stop_on_success", true);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ":" + std::to_string(line_of_byte(text, e.byte)) +
                                 ": " + e.what());
    }
    try {
        return parse_experiment_config(j);
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

nlohmann::ordered_json MetricsRecord::to_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    j["algorithm"] = algorithm;
    j["seed"] = seed;
    j["batch"] = stats.batch;
    j["macro_steps"] = stats.macro_steps;
    j["raw_steps"] = stats.raw_steps;
    j["mean_return"] = stats.mean_return;
    j["policy_loss"] = stats.policy_loss;
    j["value_loss"] = stats.value_loss;
    j["adv_mean"] = stats.adv_mean;
    j["adv_variance"] = stats.adv_variance;
    j["mean_ratio"] = stats.mean_ratio;
    j["clip_fraction"] = stats.clip_fraction;
    j["entropy"] = stats.entropy;
    j["grad_norm"] = stats.grad_norm;
    return j;
}

MetricsRecord MetricsRecord::from_json(const nlohmann::json& j) {
    MetricsRecord r;
    r.experiment = j.at("experiment").get<std::string>();
    r.algorithm = j.at("algorithm").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.stats.batch = j.at("batch").get<int>();
    r.stats.macro_steps = j.at("macro_steps").get<long long>();
    r.stats.raw_steps = j.at("raw_steps").get<long long>();
    r.stats.mean_return = j.at("mean_return").get<double>();
    r.stats.policy_loss = j.at("policy_loss").get<double>();
    r.stats.value_loss = j.at("value_loss").get<double>();
    r.stats.adv_mean = j.at("adv_mean").get<double>();
    r.stats.adv_variance = j.at("adv_variance").get<double>();
    r.stats.mean_ratio = j.at("mean_ratio").get<double>();
    r.stats.clip_fraction = j.at("clip_fraction").get<double>();
    r.stats.entropy = j.at("entropy").get<double>();
    r.stats.grad_norm = j.at("grad_norm").get<double>();
    return r;
}

std::string MetricsRecord::csv_header() {
    return "experiment,algorithm,seed,batch,macro_steps,raw_steps,mean_return,"
           "policy_loss,value_loss,adv_mean,adv_variance,mean_ratio,"
           "clip_fraction,entropy,grad_norm";
}

std::string MetricsRecord::csv_row() const {
    std::ostringstream oss;
    oss << experiment << ',' << algorithm << ',' << seed << ',' << stats.batch << ','
        << stats.macro_steps << ',' << stats.raw_steps << ','
        << fmt_double(stats.mean_return) << ',' << fmt_double(stats.policy_loss) << ','
        << fmt_double(stats.value_loss) << ',' << fmt_double(stats.adv_mean) << ','
        << fmt_double(stats.adv_variance) << ',' << fmt_double(stats.mean_ratio) << ','
        << fmt_double(stats.clip_fraction) << ',' << fmt_double(stats.entropy) << ','
        << fmt_double(stats.grad_norm);
    return oss.str();
}

std::string experiment_dir(const ExperimentConfig& config) {
    return (fs::path(config.output_dir) / config.name).string();
}

std::string cell_stem(const std::string& algorithm, uint64_t seed) {
    return algorithm + "__seed" + std::to_string(seed);
}

namespace {

struct Cell {
    AlgorithmConfig algo;
    uint64_t seed;
};

// Runs one (algorithm, seed) cell; returns empty string on success, the
// failure message otherwise.
std::string run_cell(const ExperimentConfig& config, const Cell& cell,
                     const std::string& dir) {
    const std::string stem = cell_stem(cell.algo.name, cell.seed);
    const fs::path jsonl = fs::path(dir) / (stem + ".metrics.jsonl");
    const fs::path done = fs::path(dir) / (stem + ".done");
    const fs::path failed = fs::path(dir) / (stem + ".failed");

    OptimizerConfig opt = cell.algo.opt;
    opt.seed = cell.seed;
    opt.batches = config.batches;
    opt.checkpoint_interval = config.checkpoint_interval;
    opt.checkpoint_path = (fs::path(dir) / stem).string();
    if (config.stop_on_success && std::isfinite(config.success_threshold)) {
        opt.success_threshold = config.success_threshold;
        opt.patience = config.patience;
    }

    try {
        auto env = make_env(config.env_name, config.env_params);
        Trainer trainer(opt, *env);
        std::ofstream out(jsonl, std::ios::trunc);
        if (!out) return "cannot open " + jsonl.string();
        trainer.train([&](const UpdateStats& stats) {
            MetricsRecord rec;
            rec.experiment = config.name;
            rec.algorithm = cell.algo.name;
            rec.seed = cell.seed;
            rec.stats = stats;
            out << rec.to_json().dump() << '\n';
        });
        out.close();
        std::ofstream marker(done);
        marker << "ok\n";
        fs::remove(failed);
        return "";
    } catch (const std::exception& e) {
        std::ofstream marker(failed);
        marker << e.what() << '\n';
        return e.what();
    }
}

void write_experiment_metadata(const ExperimentConfig& config, const std::string& dir) {
    nlohmann::ordered_json j;
    j["version"] = config.version;
    j["name"] = config.name;
    j["environment"] = {{"name", config.env_name}, {"params", config.env_params}};
    j["success_threshold"] = config.success_threshold;
    nlohmann::json algos = nlohmann::json::array();
    for (const auto& a : config.algorithms) algos.push_back(a.name);
    j["algorithms"] = algos;
    j["seeds"] = config.seeds;
    std::ofstream out(fs::path(dir) / "experiment.json");
    out << j.dump(2) << "\n";
}

std::vector<MetricsRecord> read_cell_metrics(const fs::path& jsonl) {
    std::ifstream in(jsonl);
    if (!in) throw std::runtime_error("missing metrics file: " + jsonl.string());
    std::vector<MetricsRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(MetricsRecord::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("corrupt metrics at " + jsonl.string() + ":" +
                                     std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void write_merged_csv(const ExperimentConfig& config, const std::string& dir) {
    std::ofstream out(fs::path(dir) / "metrics.csv", std::ios::trunc);
    out << MetricsRecord::csv_header() << '\n';
    for (const auto& algo : config.algorithms) {
        for (uint64_t seed : config.seeds) {
            const fs::path jsonl =
                fs::path(dir) / (cell_stem(algo.name, seed) + ".metrics.jsonl");
            if (!fs::exists(jsonl)) continue;
            for (const auto& rec : read_cell_metrics(jsonl)) out << rec.csv_row() << '\n';
        }
    }
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int run_experiment(const ExperimentConfig& config, int parallel) {
    config.validate();
    const std::string dir = experiment_dir(config);
    fs::create_directories(dir);
    write_experiment_metadata(config, dir);

    std::vector<Cell> cells;
    for (const auto& algo : config.algorithms)
        for (uint64_t seed : config.seeds) cells.push_back({algo, seed});

    std::atomic<size_t> next{0};
    std::atomic<int> failures{0};
    std::mutex io_mutex;
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            const Cell& cell = cells[i];
            const std::string stem = cell_stem(cell.algo.name, cell.seed);
            if (fs::exists(fs::path(dir) / (stem + ".done"))) {
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cout << "[skip] " << stem << " (complete)\n";
                continue;
            }
            const std::string err = run_cell(config, cell, dir);
            std::lock_guard<std::mutex> lock(io_mutex);
            if (err.empty()) {
                std::cout << "[done] " << stem << "\n";
            } else {
                std::cout << "[fail] " << stem << ": " << err << "\n";
                ++failures;
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(parallel, static_cast<int>(cells.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    write_merged_csv(config, dir);
    const auto report = generate_report(dir);
    {
        std::ofstream out(fs::path(dir) / "report.json");
        out << report.to_json().dump(2) << "\n";
        std::ofstream txt(fs::path(dir) / "report.txt");
        txt << report.to_text();
    }
    plot_curves(dir);
    return failures.load();
}

nlohmann::ordered_json ComparisonReport::to_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    if (std::isfinite(threshold))
        j["success_threshold"] = threshold;
    else
        j["success_threshold"] = nullptr;
    nlohmann::ordered_json algos = nlohmann::ordered_json::array();
    for (const auto& a : algorithms) {
        nlohmann::ordered_json aj;
        aj["algorithm"] = a.algorithm;
        auto opt_field = [](const std::optional<double>& v) -> nlohmann::ordered_json {
            if (v.has_value()) return *v;
            return nullptr;  // threshold never reached
        };
        aj["batches_to_threshold"] = opt_field(a.batches_to_threshold);
        aj["macro_steps_to_threshold"] = opt_field(a.macro_steps_to_threshold);
        aj["raw_steps_to_threshold"] = opt_field(a.raw_steps_to_threshold);
        aj["final_return_mean"] = a.final_return_mean;
        aj["final_return_std"] = a.final_return_std;
        aj["median_adv_variance"] = a.median_adv_variance;
        aj["seeds_reported"] = a.seeds_reported;
        aj["missing_cells"] = a.missing_cells;
        algos.push_back(aj);
    }
    j["algorithms"] = algos;
    return j;
}

std::string ComparisonReport::to_text() const {
    std::ostringstream oss;
    oss << "experiment: " << experiment << "\n";
    oss << "threshold: ";
    if (std::isfinite(threshold))
        oss << threshold;
    else
        oss << "(none)";
    oss << "\n\n";
    auto fmt_opt = [](const std::optional<double>& v) {
        return v.has_value() ? fmt_double(*v) : std::string("inf");
    };
    for (const auto& a : algorithms) {
        oss << a.algorithm << ":\n";
        oss << "  batches_to_threshold (median): " << fmt_opt(a.batches_to_threshold) << "\n";
        oss << "  macro_steps_to_threshold (median): "
            << fmt_opt(a.macro_steps_to_threshold) << "\n";
        oss << "  raw_steps_to_threshold (median): " << fmt_opt(a.raw_steps_to_threshold)
            << "\n";
        oss << "  final_return: " << fmt_double(a.final_return_mean) << " +- "
            << fmt_double(a.final_return_std) << "\n";
        oss << "  median_adv_variance: " << fmt_double(a.median_adv_variance) << "\n";
        oss << "  seeds_reported: " << a.seeds_reported << "\n";
        for (const auto& m : a.missing_cells) oss << "  missing: " << m << "\n";
        oss << "\n";
    }
    return oss.str();
}

ComparisonReport generate_report(const std::string& dir) {
    std::ifstream meta_in(fs::path(dir) / "experiment.json");
    if (!meta_in)
        throw std::runtime_error("missing experiment metadata: " + dir +
                                 "/experiment.json");
    const nlohmann::json meta = nlohmann::json::parse(meta_in);

    ComparisonReport report;
    report.experiment = meta.at("name").get<std::string>();
    if (meta.contains("success_threshold") && !meta.at("success_threshold").is_null())
        report.threshold = meta.at("success_threshold").get<double>();

    const auto seeds = meta.at("seeds").get<std::vector<uint64_t>>();
    for (const auto& aj : meta.at("algorithms")) {
        const std::string algo = aj.get<std::string>();
        AlgorithmSummary summary;
        summary.algorithm = algo;
        std::vector<double> batches_to, macro_to, raw_to, finals, adv_vars;
        for (uint64_t seed : seeds) {
            const std::string stem = cell_stem(algo, seed);
            const fs::path jsonl = fs::path(dir) / (stem + ".metrics.jsonl");
            std::vector<MetricsRecord> records;
            try {
                records = read_cell_metrics(jsonl);
            } catch (const std::exception& e) {
                summary.missing_cells.push_back(stem + ": " + e.what());
                continue;
            }
            if (records.empty()) {
                summary.missing_cells.push_back(stem + ": empty metrics");
                continue;
            }
            ++summary.seeds_reported;
            finals.push_back(records.back().stats.mean_return);
            double reached_b = std::numeric_limits<double>::infinity();
            double reached_m = std::numeric_limits<double>::infinity();
            double reached_r = std::numeric_limits<double>::infinity();
            if (std::isfinite(report.threshold)) {
                for (const auto& rec : records) {
                    if (rec.stats.mean_return >= report.threshold) {
                        reached_b = rec.stats.batch;
                        reached_m = static_cast<double>(rec.stats.macro_steps);
                        reached_r = static_cast<double>(rec.stats.raw_steps);
                        break;
                    }
                }
            }
            batches_to.push_back(reached_b);
            macro_to.push_back(reached_m);
            raw_to.push_back(reached_r);
            for (const auto& rec : records) adv_vars.push_back(rec.stats.adv_variance);
        }
        if (!finals.empty()) {
            double mean = 0.0;
            for (double f : finals) mean += f;
            mean /= static_cast<double>(finals.size());
            double var = 0.0;
            for (double f : finals) var += (f - mean) * (f - mean);
            var /= static_cast<double>(finals.size());
            summary.final_return_mean = mean;
            summary.final_return_std = std::sqrt(var);
        }
        if (!adv_vars.empty()) summary.median_adv_variance = median_of(adv_vars);
        auto to_opt = [](std::vector<double> v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            const double med = median_of(std::move(v));
            if (!std::isfinite(med)) return std::nullopt;
            return med;
        };
        summary.batches_to_threshold = to_opt(batches_to);
        summary.macro_steps_to_threshold = to_opt(macro_to);
        summary.raw_steps_to_threshold = to_opt(raw_to);
        report.algorithms.push_back(std::move(summary));
    }
    return report;
}

// ----------------------------------------------------------------------- SVG

namespace {

std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Curve {
    std::string label;
    std::vector<double> x, y, y_lo, y_hi;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

void write_svg(const fs::path& path, const std::string& title,
               const std::string& x_label, const std::vector<Curve>& curves) {
    constexpr double W = 860, H = 520, L = 70, R = 20, T = 40, B = 55;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& c : curves) {
        for (size_t i = 0; i < c.x.size(); ++i) {
            if (!any) {
                xmin = xmax = c.x[i];
                ymin = c.y_lo[i];
                ymax = c.y_hi[i];
                any = true;
            }
            xmin = std::min(xmin, c.x[i]);
            xmax = std::max(xmax, c.x[i]);
            ymin = std::min(ymin, c.y_lo[i]);
            ymax = std::max(ymax, c.y_hi[i]);
        }
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

    // Axes and ticks.
    svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
        << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
        << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double fy = ymin + (ymax - ymin) * i / 5.0;
        svg << "<line x1=\"" << fmt_coord(px(fx)) << "\" y1=\"" << H - B << "\" x2=\""
            << fmt_coord(px(fx)) << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt_coord(px(fx)) << "\" y=\"" << H - B + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(fx) << "</text>\n";
        svg << "<line x1=\"" << L - 5 << "\" y1=\"" << fmt_coord(py(fy)) << "\" x2=\""
            << L << "\" y2=\"" << fmt_coord(py(fy)) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << L - 8 << "\" y=\"" << fmt_coord(py(fy) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt_tick(fy) << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << x_label << "</text>\n";
    svg << "<text x=\"18\" y=\"" << (T + H - B) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">mean return</text>\n";

    for (size_t c = 0; c < curves.size(); ++c) {
        const Curve& curve = curves[c];
        const char* color = kPalette[c % 6];
        if (curve.x.size() > 1) {
            // Seed band: min/max envelope.
            std::ostringstream pts;
            for (size_t i = 0; i < curve.x.size(); ++i)
                pts << fmt_coord(px(curve.x[i])) << ',' << fmt_coord(py(curve.y_hi[i]))
                    << ' ';
            for (size_t i = curve.x.size(); i-- > 0;)
                pts << fmt_coord(px(curve.x[i])) << ',' << fmt_coord(py(curve.y_lo[i]))
                    << ' ';
            svg << "<polygon points=\"" << pts.str() << "\" fill=\"" << color
                << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        if (!curve.x.empty()) {
            std::ostringstream pts;
            for (size_t i = 0; i < curve.x.size(); ++i)
                pts << fmt_coord(px(curve.x[i])) << ',' << fmt_coord(py(curve.y[i]))
                    << ' ';
            svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
                << color << "\" stroke-width=\"1.5\"/>\n";
        }
        const double ly = T + 16 + 16 * static_cast<double>(c);
        svg << "<rect x=\"" << L + 10 << "\" y=\"" << ly - 9
            << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << L + 27 << "\" y=\"" << ly + 2
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << curve.label
            << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << svg.str();
}

struct CsvRow {
    std::string algorithm;
    uint64_t seed;
    int batch;
    double macro_steps, raw_steps, mean_return;
};

std::vector<CsvRow> read_csv_rows(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("missing metrics CSV: " + csv.string());
    std::vector<CsvRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 7) continue;
        CsvRow row;
        row.algorithm = fields[1];
        row.seed = std::stoull(fields[2]);
        row.batch = std::stoi(fields[3]);
        row.macro_steps = std::stod(fields[4]);
        row.raw_steps = std::stod(fields[5]);
        row.mean_return = std::stod(fields[6]);
        rows.push_back(row);
    }
    return rows;
}

Curve build_curve(const std::string& algo, const std::vector<CsvRow>& rows, bool raw_x) {
    // Align seeds by batch index; mean line with a min/max seed envelope.
    int max_batch = -1;
    for (const auto& r : rows)
        if (r.algorithm == algo) max_batch = std::max(max_batch, r.batch);
    Curve curve;
    curve.label = algo;
    for (int b = 0; b <= max_batch; ++b) {
        double x_acc = 0, y_acc = 0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        int count = 0;
        for (const auto& r : rows) {
            if (r.algorithm != algo || r.batch != b) continue;
            x_acc += raw_x ? r.raw_steps : r.macro_steps;
            y_acc += r.mean_return;
            lo = std::min(lo, r.mean_return);
            hi = std::max(hi, r.mean_return);
            ++count;
        }
        if (count == 0) continue;
        curve.x.push_back(x_acc / count);
        curve.y.push_back(y_acc / count);
        curve.y_lo.push_back(lo);
        curve.y_hi.push_back(hi);
    }
    return curve;
}

}  // namespace

std::vector<std::string> plot_curves(const std::string& dir) {
    const auto rows = read_csv_rows(fs::path(dir) / "metrics.csv");
    std::vector<std::string> algos;
    for (const auto& r : rows)
        if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end())
            algos.push_back(r.algorithm);

    std::string title = fs::path(dir).filename().string();
    std::vector<std::string> written;
    for (bool raw_x : {false, true}) {
        std::vector<Curve> curves;
        for (const auto& a : algos) curves.push_back(build_curve(a, rows, raw_x));
        const std::string fname =
            raw_x ? "return_vs_raw_steps.svg" : "return_vs_macro_steps.svg";
        write_svg(fs::path(dir) / fname, title,
                  raw_x ? "raw environment steps" : "macro-steps", curves);
        written.push_back((fs::path(dir) / fname).string());
    }
    return written;
}

// ------------------------------------------------------------------- selftest

namespace {

bool snapshot_fidelity(Env& env, int trials, uint64_t seed) {
    RngStream rng(seed);
    for (int trial = 0; trial < trials; ++trial) {
        env.reset(rng.next_u64());
        // Walk to a random state.
        const int walk = static_cast<int>(rng.below(8));
        for (int i = 0; i < walk; ++i) {
            Action a;
            if (env.discrete_actions())
                a.index = static_cast<int>(rng.below(env.action_count()));
            else
                a.values = {rng.uniform(-1.0, 1.0)};
            const auto sr = env.step(a);
            if (sr.terminal || sr.truncated) {
                env.reset(rng.next_u64());
            }
        }
        Action a;
        if (env.discrete_actions())
            a.index = static_cast<int>(rng.below(env.action_count()));
        else
            a.values = {rng.uniform(-1.0, 1.0)};
        const auto snap = env.snapshot();
        const auto first = env.step(a);
        env.restore(snap);
        const auto second = env.step(a);
        if (first.observation != second.observation || first.reward != second.reward ||
            first.terminal != second.terminal || first.truncated != second.truncated)
            return false;
        env.restore(snap);
    }
    return true;
}

}  // namespace

int run_selftest() {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    {
        SparseChain chain;
        NoisyGrid grid;
        PointMass1D mass;
        check("snapshot fidelity: sparse_chain (1000 triples)",
              snapshot_fidelity(chain, 1000, 11));
        check("snapshot fidelity: noisy_grid (1000 triples)",
              snapshot_fidelity(grid, 1000, 12));
        check("snapshot fidelity: point_mass_1d (1000 triples)",
              snapshot_fidelity(mass, 1000, 13));
    }

    {
        const auto mdp = sparse_chain_mdp(5, 0.9);
        const auto vi = value_iteration(mdp, 1e-12);
        check("value iteration: chain V(s0) = 0.729",
              std::abs(vi.values[0] - 0.729) < 1e-9);
    }

    {
        // Quick gradient check: clipped surrogate on a random categorical batch.
        NetworkSpec spec{4, {8}, 3, Activation::Tanh, Head::CategoricalLogits};
        auto params = init_params(spec, 99);
        RngStream rng(7);
        std::vector<std::vector<double>> obs(6);
        std::vector<Action> actions(6);
        std::vector<PolicySample> samples(6);
        for (int i = 0; i < 6; ++i) {
            obs[i].resize(4);
            for (auto& v : obs[i]) v = rng.uniform(-1.0, 1.0);
            actions[i].index = static_cast<int>(rng.below(3));
            samples[i].observation = &obs[i];
            samples[i].action = &actions[i];
            samples[i].old_log_prob = -1.0 - rng.uniform();
            samples[i].advantage = rng.uniform(-1.0, 1.0);
        }
        ParamVector grad(params.size(), 0.0);
        clipped_surrogate_loss(samples, spec, params, 0.2, 0.05, &grad);
        auto loss_fn = [&](const ParamVector& p) {
            return clipped_surrogate_loss(samples, spec, p, 0.2, 0.05, nullptr).loss;
        };
        const auto fd = oracles::fd_gradient(loss_fn, params);
        check("policy loss gradient vs finite differences",
              oracles::max_relative_error(grad, fd) < 1e-4);
    }

    {
        RngStream rng(21);
        bool ok = true;
        for (int i = 0; i < 1000 && ok; ++i) {
            MacroStepRecord record;
            const int n = 2 + static_cast<int>(rng.below(7));
            record.branches.resize(n);
            for (auto& b : record.branches)
                b.transformed_reward = rng.uniform(-1.0, 1.0);
            double sum = 0.0;
            for (const auto& e : grpo_advantages(record)) sum += e.advantage;
            ok = std::abs(sum) < 1e-9;
        }
        check("GRPO group advantages sum to zero", ok);
    }

    {
        RewardNormalizerState state(64, 1e-8);
        RngStream rng(5);
        for (int i = 0; i < 64; ++i) state.push(rng.uniform(-3.0, 7.0));
        const double mu = state.mean();
        const double sd = state.stddev();
        double norm_mean = 0.0, norm_sq = 0.0;
        for (double r : state.window) {
            const double z = (r - mu) / (sd + state.epsilon);
            norm_mean += z / 64.0;
            norm_sq += z * z / 64.0;
        }
        check("rolling normalizer window: mean 0, std 1",
              std::abs(norm_mean) < 1e-9 &&
                  std::abs(std::sqrt(norm_sq - norm_mean * norm_mean) - 1.0) < 1e-6);
    }

    std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return failures;
}

}  // namespace pglab
