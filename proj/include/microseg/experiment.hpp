// Experiment orchestration: run directories with config snapshots, training
// curves, checkpoints, metrics and plots, plus run comparison. Every CSV is
// written with fixed formatting so identical configs reproduce identical
// bytes; wall-clock timings live in a separate file.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "microseg/baselines.hpp"
#include "microseg/common.hpp"
#include "microseg/diffusion.hpp"
#include "microseg/llm_client.hpp"
#include "microseg/maintenance.hpp"
#include "microseg/metrics.hpp"
#include "microseg/scenario.hpp"
#include "microseg/svg_plot.hpp"

namespace microseg {

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open file for writing: " + path);
    f << content;
    require(f.good(), "write failed: " + path);
}

inline std::string segmentation_to_json(const Segmentation& seg) {
    nlohmann::ordered_json j;
    j["m"] = seg.m();
    j["selected"] = nlohmann::ordered_json::array();
    for (int i = 0; i < seg.m(); ++i)
        for (int k = i + 1; k < seg.m(); ++k)
            if (seg.selected(i, k)) j["selected"].push_back({i, k});
    return j.dump(2) + "\n";
}

inline Segmentation segmentation_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("segmentation is not valid JSON: ") + e.what());
    }
    Segmentation seg(j.at("m").get<int>());
    for (const auto& pair : j.at("selected"))
        seg.set(pair.at(0).get<int>(), pair.at(1).get<int>(), EdgeState::Selected);
    return seg;
}

// training_log.csv holds only the deterministic columns; per-epoch wall time
// goes to epoch_timing.csv so reruns stay byte-identical.
inline std::string training_log_csv(const TrainLog& log, bool with_ged,
                                    std::optional<int> epochs_saved = std::nullopt) {
    std::ostringstream os;
    os << "epoch,avg_reward,reward_std,feasible_fraction";
    if (with_ged) os << ",ged_to_reference";
    if (epochs_saved) os << ",epochs_saved_vs_scratch";
    os << "\n";
    for (const auto& e : log.epochs) {
        os << e.epoch << "," << fmt_double(e.avg_reward) << "," << fmt_double(e.reward_std)
           << "," << fmt_double(e.feasible_fraction);
        if (with_ged) os << "," << fmt_double(e.avg_ged);
        if (epochs_saved) os << "," << *epochs_saved;
        os << "\n";
    }
    return os.str();
}

inline std::string timing_csv(const TrainLog& log) {
    std::ostringstream os;
    os << "epoch,wall_seconds\n";
    for (const auto& e : log.epochs)
        os << e.epoch << "," << fmt_double(e.wall_seconds) << "\n";
    return os.str();
}

inline double trailing_mean_reward(const TrainLog& log, int window) {
    require(!log.epochs.empty(), "empty training log");
    const int n = static_cast<int>(log.epochs.size());
    const int k = std::min(window, n);
    double acc = 0.0;
    for (int i = n - k; i < n; ++i) acc += log.epochs[static_cast<std::size_t>(i)].avg_reward;
    return acc / k;
}

inline std::vector<double> reward_curve(const TrainLog& log) {
    std::vector<double> y;
    y.reserve(log.epochs.size());
    for (const auto& e : log.epochs) y.push_back(e.avg_reward);
    return y;
}

// Trailing-window moving average.
inline std::vector<double> smooth_curve(const std::vector<double>& y, int window) {
    std::vector<double> out(y.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc += y[i];
        if (i >= static_cast<std::size_t>(window)) acc -= y[i - static_cast<std::size_t>(window)];
        out[i] = acc / std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    }
    return out;
}

// Converged level of a curve: mean of its last `window` smoothed points.
inline double converged_level(const std::vector<double>& y, int window = 20,
                              int smooth_w = 10) {
    require(!y.empty(), "empty curve");
    const auto s = smooth_curve(y, smooth_w);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(window), s.size());
    double acc = 0.0;
    for (std::size_t i = s.size() - k; i < s.size(); ++i) acc += s[i];
    return acc / static_cast<double>(k);
}

// First epoch (1-based) whose smoothed value reaches `level`; -1 if never.
inline int epochs_to_reach(const std::vector<double>& y, double level, int smooth_w = 10) {
    const auto s = smooth_curve(y, smooth_w);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] >= level) return static_cast<int>(i) + 1;
    return -1;
}

inline std::vector<double> parse_training_log_rewards(const std::string& csv_text) {
    std::istringstream is(csv_text);
    std::string line;
    std::getline(is, line);  // header
    std::vector<double> y;
    while (std::getline(is, line)) {
        int epoch = 0;
        double avg = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf", &epoch, &avg) == 2) y.push_back(avg);
    }
    return y;
}

struct ExperimentConfig {
    Scenario scenario;
    std::string scenario_text;  // exact bytes the scenario was loaded from
    std::string algorithm;      // legd | legd-noLLM | drl | greedy-trust |
                                // greedy-resource | random | noseg
    TrainConfig train;
    DenoiserConfig net;
    int parts = 4;              // random/greedy part count
    int draws = 200;            // random-baseline repetitions
    std::string out_dir;
    LlmConfig llm;              // endpoint empty = rule backend
    int repetitions = 1;
};

inline bool algorithm_is_trained(const std::string& algo) {
    return algo == "legd" || algo == "legd-noLLM" || algo == "drl";
}

inline void validate_algorithm(const std::string& algo) {
    static const char* names[] = {"legd",   "legd-noLLM",      "drl",   "greedy-trust",
                                  "greedy-resource", "random", "noseg"};
    for (const char* n : names)
        if (algo == n) return;
    throw ValidationError("unknown algorithm selector: " + algo);
}

inline nlohmann::ordered_json config_snapshot(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["algorithm"] = cfg.algorithm;
    j["scenario_name"] = cfg.scenario.name;
    j["scenario_hash"] = content_hash(cfg.scenario_text);
    j["seed"] = cfg.train.seed;
    j["epochs"] = cfg.train.epochs;
    j["batch_size"] = cfg.train.batch_size;
    j["timestep_samples"] = cfg.train.timestep_samples;
    j["diffusion_steps"] = cfg.train.diffusion_steps;
    j["learning_rate"] = cfg.train.learning_rate;
    j["temperature"] = cfg.train.temperature;
    j["noise_kind"] = cfg.train.noise_kind == NoiseKind::Uniform ? "uniform" : "marginal";
    j["net"] = {{"layers", cfg.net.layers},     {"heads", cfg.net.heads},
                {"head_dim", cfg.net.head_dim}, {"node_dim", cfg.net.node_dim},
                {"edge_dim", cfg.net.edge_dim}, {"time_dim", cfg.net.time_dim}};
    j["parts"] = cfg.parts;
    j["draws"] = cfg.draws;
    j["llm_endpoint"] = cfg.llm.endpoint;
    return j;
}

struct RunResult {
    std::string dir;
    std::string algorithm;
    double final_avg_reward = 0.0;  // trailing-window mean for trained runs
    TrainLog log;
    Segmentation segmentation;
};

constexpr int kFinalRewardWindow = 25;

// Executes one algorithm on one scenario and writes the run directory.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    validate_algorithm(cfg.algorithm);
    require(!cfg.out_dir.empty(), "output directory required");
    std::filesystem::create_directories(cfg.out_dir);
    const Env env = make_env(cfg.scenario);
    const auto dir = [&](const std::string& name) { return cfg.out_dir + "/" + name; };

    write_file(dir("config.json"), config_snapshot(cfg).dump(2) + "\n");
    write_file(dir("scenario.json"), cfg.scenario_text);

    RunResult res;
    res.dir = cfg.out_dir;
    res.algorithm = cfg.algorithm;

    if (algorithm_is_trained(cfg.algorithm)) {
        FilterSet eval_filters;
        if (cfg.algorithm == "drl") {
            DrlResult drl = drl_baseline(env, cfg.net, cfg.train);
            res.log = drl.log;
            res.segmentation = drl_argmax_segmentation(drl.net, env);
            drl.net.save(dir("checkpoint.bin"), env.trust.node_count());
        } else {
            DenoiseNet net = DenoiseNet::init(cfg.net, cfg.train.seed);
            TrainHooks hooks;
            if (cfg.algorithm == "legd") {
                FilterAgent agent(cfg.llm);
                agent.temperature = cfg.train.temperature;
                agent.rule_trust_threshold = cfg.scenario.filter_trust_threshold;
                // Online agent: filters re-evaluated each epoch.
                eval_filters = agent.generate(env);
                hooks.filters = [agent](const Env& e, int) { return agent.generate(e); };
            }
            res.log = train(env, cfg.train, net, hooks);
            res.segmentation =
                generate_segmentation(net, env, eval_filters, cfg.train.diffusion_steps,
                                      cfg.train.noise_kind, cfg.train.seed);
            net.save(dir("checkpoint.bin"), env.trust.node_count());
        }
        res.final_avg_reward = res.log.epochs.empty()
                                   ? 0.0
                                   : trailing_mean_reward(res.log, kFinalRewardWindow);
        write_file(dir("training_log.csv"), training_log_csv(res.log, false));
        write_file(dir("epoch_timing.csv"), timing_csv(res.log));
        PlotSeries s;
        s.label = cfg.algorithm;
        for (const auto& e : res.log.epochs) {
            s.x.push_back(e.epoch);
            s.y.push_back(e.avg_reward);
        }
        write_line_chart(dir("training_curve.svg"), "Training curve: " + cfg.algorithm,
                         "epoch", "AvgReward", {s});
    } else if (cfg.algorithm == "noseg") {
        res.segmentation = no_segmentation(env);
        res.final_avg_reward = reward(res.segmentation, env);
    } else if (cfg.algorithm == "random") {
        require(cfg.parts >= 1, "random baseline needs parts >= 1");
        double acc = 0.0;
        double best = -1.0;
        Segmentation best_seg(env.trust.node_count());
        for (int d = 0; d < cfg.draws; ++d) {
            Rng rng = Rng::stream(cfg.train.seed, 0xa2d, static_cast<std::uint64_t>(d));
            const Segmentation seg = random_segmentation(env, rng, cfg.parts);
            const double r = reward(seg, env);
            acc += r;
            if (r > best) {
                best = r;
                best_seg = seg;
            }
        }
        res.final_avg_reward = acc / cfg.draws;
        res.segmentation = best_seg;
    } else {
        const GreedyCost cost =
            cfg.algorithm == "greedy-trust" ? GreedyCost::Trust : GreedyCost::Resource;
        res.segmentation = greedy_partition(env, cost, cfg.parts);
        res.final_avg_reward = reward(res.segmentation, env);
    }

    write_file(dir("final_segmentation.json"), segmentation_to_json(res.segmentation));
    const MetricsReport rep = compute_metrics(res.segmentation, env);
    write_file(dir("metrics.csv"), MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");

    nlohmann::ordered_json summary;
    summary["algorithm"] = cfg.algorithm;
    summary["scenario_hash"] = content_hash(cfg.scenario_text);
    summary["seed"] = cfg.train.seed;
    summary["epochs"] = static_cast<int>(res.log.epochs.size());
    summary["final_avg_reward"] = res.final_avg_reward;
    summary["final_segmentation_reward"] = rep.reward;
    write_file(dir("summary.json"), summary.dump(2) + "\n");
    return res;
}

// Aligns several runs of the same scenario: final-AvgReward table, overlay
// plot and a pairwise ordering report.
inline void compare_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    require(run_dirs.size() >= 2, "comparison needs at least two runs");
    std::filesystem::create_directories(out_dir);

    struct Entry {
        std::string algorithm;
        std::string hash;
        double final_avg_reward = 0.0;
        int epochs = 0;
        TrainLog log;
    };
    std::vector<Entry> entries;
    for (const auto& dir : run_dirs) {
        Entry e;
        const auto summary = nlohmann::json::parse(read_file(dir + "/summary.json"));
        e.algorithm = summary.at("algorithm").get<std::string>();
        e.hash = summary.at("scenario_hash").get<std::string>();
        e.final_avg_reward = summary.at("final_avg_reward").get<double>();
        e.epochs = summary.at("epochs").get<int>();
        const std::string log_path = dir + "/training_log.csv";
        if (std::filesystem::exists(log_path)) {
            std::istringstream is(read_file(log_path));
            std::string line;
            std::getline(is, line);  // header
            while (std::getline(is, line)) {
                EpochStats st;
                std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &st.epoch, &st.avg_reward,
                            &st.reward_std, &st.feasible_fraction);
                e.log.epochs.push_back(st);
            }
        }
        entries.push_back(std::move(e));
    }
    for (const auto& e : entries)
        require(e.hash == entries.front().hash, "runs compare different scenarios");

    std::ostringstream table;
    table << "algorithm,final_avg_reward,epochs\n";
    for (const auto& e : entries)
        table << e.algorithm << "," << fmt_double(e.final_avg_reward) << "," << e.epochs
              << "\n";
    write_file(out_dir + "/comparison.csv", table.str());

    std::vector<PlotSeries> series;
    for (const auto& e : entries) {
        if (e.log.epochs.empty()) continue;
        PlotSeries s;
        s.label = e.algorithm;
        for (const auto& st : e.log.epochs) {
            s.x.push_back(st.epoch);
            s.y.push_back(st.avg_reward);
        }
        series.push_back(std::move(s));
    }
    if (!series.empty())
        write_line_chart(out_dir + "/overlay.svg", "AvgReward comparison", "epoch",
                         "AvgReward", series);

    nlohmann::ordered_json report;
    report["ordering"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t j = i + 1; j < entries.size(); ++j) {
            nlohmann::ordered_json cmp;
            cmp["a"] = entries[i].algorithm;
            cmp["b"] = entries[j].algorithm;
            cmp["a_minus_b"] = entries[i].final_avg_reward - entries[j].final_avg_reward;
            report["ordering"].push_back(cmp);
        }
    }
    write_file(out_dir + "/ordering_report.json", report.dump(2) + "\n");
}

} // namespace microseg
