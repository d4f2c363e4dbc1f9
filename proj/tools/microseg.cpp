// Command-line front end: scenario generation, training, fine-tuning,
// baselines, evaluation and run comparison.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "microseg/experiment.hpp"

namespace {

using namespace microseg;

struct CommonTrainFlags {
    std::string scenario_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int epochs = 200;
    int batch = 16;
    int diffusion_steps = 30;
    int timestep_samples = 4;
    double lr = 1e-4;
    double temperature = 1.0;
    std::string noise = "uniform";
    int net_layers = 3;
    int net_heads = 4;
    int net_head_dim = 16;
    int net_edge_dim = 16;

    void attach(CLI::App* cmd, bool with_out = true) {
        cmd->add_option("--scenario", scenario_path, "Scenario file")->required();
        if (with_out) cmd->add_option("--out", out_dir, "Run directory")->required();
        cmd->add_option("--seed", seed, "Random seed");
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--batch", batch, "Trajectories per epoch");
        cmd->add_option("--diffusion-steps", diffusion_steps, "Denoising steps T");
        cmd->add_option("--timestep-samples", timestep_samples,
                        "Prediction timesteps per trajectory");
        cmd->add_option("--lr", lr, "Learning rate");
        cmd->add_option("--temperature", temperature, "Filter temperature phi in [0,1]");
        cmd->add_option("--noise", noise, "Noise kind: uniform | marginal")
            ->check(CLI::IsMember({"uniform", "marginal"}));
        cmd->add_option("--net-layers", net_layers, "Transformer layers");
        cmd->add_option("--net-heads", net_heads, "Attention heads");
        cmd->add_option("--net-head-dim", net_head_dim, "Per-head width");
        cmd->add_option("--net-edge-dim", net_edge_dim, "Edge embedding width");
    }

    TrainConfig train_config() const {
        TrainConfig tc;
        tc.seed = seed;
        tc.epochs = epochs;
        tc.batch_size = batch;
        tc.diffusion_steps = diffusion_steps;
        tc.timestep_samples = timestep_samples;
        tc.learning_rate = lr;
        tc.temperature = temperature;
        tc.noise_kind = noise == "marginal" ? NoiseKind::Marginal : NoiseKind::Uniform;
        return tc;
    }

    DenoiserConfig net_config() const {
        DenoiserConfig nc;
        nc.layers = net_layers;
        nc.heads = net_heads;
        nc.head_dim = net_head_dim;
        nc.node_dim = net_heads * net_head_dim;
        nc.edge_dim = net_edge_dim;
        return nc;
    }
};

int fail(const std::string& stage, const std::exception& e) {
    nlohmann::ordered_json err;
    err["error"] = e.what();
    err["stage"] = stage;
    std::cerr << err.dump() << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-trust micro-segmentation generator and simulator"};
    app.require_subcommand(1);

    // generate-scenario
    auto* gen = app.add_subcommand("generate-scenario", "Emit a scenario file");
    std::string gen_profile = "nine_node_aigc";
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    int gen_m = 9, gen_types = 4;
    double gen_density = 0.6;
    gen->add_option("--profile", gen_profile, "nine_node_aigc | random")
        ->check(CLI::IsMember({"nine_node_aigc", "random"}));
    gen->add_option("--out", gen_out, "Output path")->required();
    gen->add_option("--seed", gen_seed, "Random seed (random profile)");
    gen->add_option("--m", gen_m, "Node count (random profile)");
    gen->add_option("--types", gen_types, "Provider type count (random profile)");
    gen->add_option("--density", gen_density, "Trust edge density (random profile)");

    // train
    auto* tr = app.add_subcommand("train", "Train a generation policy");
    CommonTrainFlags tr_flags;
    std::string tr_algo = "legd";
    std::string tr_llm_endpoint;
    std::string tr_llm_model = "gpt-4";
    tr_flags.attach(tr);
    tr->add_option("--algo", tr_algo, "legd | legd-noLLM | drl")
        ->check(CLI::IsMember({"legd", "legd-noLLM", "drl"}));
    tr->add_option("--llm-endpoint", tr_llm_endpoint,
                   "Chat-completion endpoint for the filter agent (empty = rule backend)");
    tr->add_option("--llm-model", tr_llm_model, "Model name for the endpoint");

    // baseline
    auto* bl = app.add_subcommand("baseline", "Run a non-learning baseline");
    std::string bl_scenario, bl_out;
    std::string bl_algo = "noseg";
    std::uint64_t bl_seed = 0;
    int bl_parts = 4, bl_draws = 200;
    bl->add_option("--scenario", bl_scenario, "Scenario file")->required();
    bl->add_option("--out", bl_out, "Run directory")->required();
    bl->add_option("--algo", bl_algo, "noseg | random | greedy-trust | greedy-resource")
        ->check(CLI::IsMember({"noseg", "random", "greedy-trust", "greedy-resource"}));
    bl->add_option("--seed", bl_seed, "Random seed");
    bl->add_option("--parts", bl_parts, "Partition count");
    bl->add_option("--draws", bl_draws, "Random-baseline repetitions");

    // finetune
    auto* ft = app.add_subcommand("finetune", "Fine-tune a checkpoint for a changed network");
    CommonTrainFlags ft_flags;
    std::string ft_checkpoint, ft_reference, ft_required, ft_scratch_log;
    int ft_epsilon = 1;
    double ft_alpha4 = 0.1, ft_mask_temperature = 1.0;
    ft_flags.attach(ft);
    ft_flags.epochs = 100;
    ft->add_option("--checkpoint", ft_checkpoint, "Trained checkpoint")->required();
    ft->add_option("--reference", ft_reference, "Reference segmentation JSON")->required();
    ft->add_option("--required-types", ft_required,
                   "Comma-separated types seeding the interest zone")
        ->required();
    ft->add_option("--epsilon", ft_epsilon, "Interest-zone radius");
    ft->add_option("--alpha4", ft_alpha4, "Re-configuration cost weight");
    ft->add_option("--mask-temperature", ft_mask_temperature, "Mask strictness (1 = hard)");
    ft->add_option("--scratch-log", ft_scratch_log,
                   "training_log.csv of a scratch run, for epochs_saved_vs_scratch");

    // eval
    auto* ev = app.add_subcommand("eval", "Compute metrics for a segmentation");
    std::string ev_scenario, ev_segmentation, ev_out;
    bool ev_mc = false;
    int ev_samples = 100000;
    std::uint64_t ev_seed = 1;
    ev->add_option("--scenario", ev_scenario, "Scenario file")->required();
    ev->add_option("--segmentation", ev_segmentation, "Segmentation JSON")->required();
    ev->add_option("--out", ev_out, "Output directory (writes metrics.csv)");
    ev->add_flag("--monte-carlo", ev_mc, "Sample the stochastic model instead of expectations");
    ev->add_option("--samples", ev_samples, "Monte-Carlo samples");
    ev->add_option("--seed", ev_seed, "Monte-Carlo seed");

    // compare
    auto* cp = app.add_subcommand("compare", "Compare run directories");
    std::vector<std::string> cp_runs;
    std::string cp_out;
    cp->add_option("--runs", cp_runs, "Run directories")->required()->expected(-2);
    cp->add_option("--out", cp_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const Scenario sc = gen_profile == "nine_node_aigc"
                                    ? nine_node_aigc()
                                    : random_scenario(gen_seed, gen_m, gen_types, gen_density);
            make_env(sc);  // validate before writing
            write_file(gen_out, serialize_scenario(sc));
            std::cout << "wrote " << gen_out << "\n";
            return 0;
        }
        if (*tr) {
            ExperimentConfig cfg;
            cfg.scenario_text = read_file(tr_flags.scenario_path);
            cfg.scenario = parse_scenario(cfg.scenario_text);
            cfg.algorithm = tr_algo;
            cfg.train = tr_flags.train_config();
            cfg.net = tr_flags.net_config();
            cfg.out_dir = tr_flags.out_dir;
            cfg.llm.endpoint = tr_llm_endpoint;
            cfg.llm.model = tr_llm_model;
            const RunResult res = run_experiment(cfg);
            std::cout << "final_avg_reward " << fmt_double(res.final_avg_reward) << "\n";
            return 0;
        }
        if (*bl) {
            ExperimentConfig cfg;
            cfg.scenario_text = read_file(bl_scenario);
            cfg.scenario = parse_scenario(cfg.scenario_text);
            cfg.algorithm = bl_algo;
            cfg.train.seed = bl_seed;
            cfg.train.epochs = 0;
            cfg.parts = bl_parts;
            cfg.draws = bl_draws;
            cfg.out_dir = bl_out;
            const RunResult res = run_experiment(cfg);
            std::cout << "avg_reward " << fmt_double(res.final_avg_reward) << "\n";
            return 0;
        }
        if (*ft) {
            const std::string scenario_text = read_file(ft_flags.scenario_path);
            const Scenario sc = parse_scenario(scenario_text);
            const Env env = make_env(sc);
            DenoiseNet net = DenoiseNet::load(ft_checkpoint);
            const Segmentation reference =
                segmentation_from_json(read_file(ft_reference));

            FinetuneConfig fc;
            fc.learning_rate = ft_flags.lr;
            fc.epochs = ft_flags.epochs;
            fc.epsilon = ft_epsilon;
            fc.alpha4 = ft_alpha4;
            fc.mask_temperature = ft_mask_temperature;
            fc.base = ft_flags.train_config();
            std::stringstream types(ft_required);
            for (std::string tok; std::getline(types, tok, ',');)
                if (!tok.empty()) fc.required_types.insert(std::stoi(tok));
            require(!fc.required_types.empty(), "required-types must name at least one type");

            const FinetuneResult res = finetune(net, env, fc, reference);

            std::filesystem::create_directories(ft_flags.out_dir);
            const auto dir = [&](const std::string& n) { return ft_flags.out_dir + "/" + n; };
            write_file(dir("scenario.json"), scenario_text);
            std::optional<int> epochs_saved;
            if (!ft_scratch_log.empty()) {
                const auto scratch = parse_training_log_rewards(read_file(ft_scratch_log));
                const double level = 0.95 * converged_level(scratch);
                const int e_scratch = epochs_to_reach(scratch, level);
                const int e_ft = epochs_to_reach(reward_curve(res.log), level);
                if (e_scratch > 0 && e_ft > 0) epochs_saved = e_scratch - e_ft;
            }
            write_file(dir("training_log.csv"), training_log_csv(res.log, true, epochs_saved));
            write_file(dir("epoch_timing.csv"), timing_csv(res.log));
            net.save(dir("checkpoint.bin"), env.trust.node_count());

            FilterSet none;
            const Segmentation updated = generate_segmentation(
                net, env, none, fc.base.diffusion_steps, fc.base.noise_kind, fc.base.seed,
                &res.mask, fc.mask_temperature);
            write_file(dir("final_segmentation.json"), segmentation_to_json(updated));
            const MetricsReport rep = compute_metrics(updated, env);
            write_file(dir("metrics.csv"),
                       MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");
            std::cout << "ged_to_reference " << graph_edit_distance(updated, reference) << "\n";
            return 0;
        }
        if (*ev) {
            const Env env = make_env(parse_scenario(read_file(ev_scenario)));
            const Segmentation seg = segmentation_from_json(read_file(ev_segmentation));
            MetricsOptions opt;
            opt.monte_carlo = ev_mc;
            opt.samples = ev_samples;
            opt.seed = ev_seed;
            const MetricsReport rep = compute_metrics(seg, env, opt);
            const std::string csv = MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n";
            if (!ev_out.empty()) {
                std::filesystem::create_directories(ev_out);
                write_file(ev_out + "/metrics.csv", csv);
            }
            std::cout << csv;
            return 0;
        }
        if (*cp) {
            compare_runs(cp_runs, cp_out);
            std::cout << "wrote " << cp_out << "/comparison.csv\n";
            return 0;
        }
    } catch (const std::exception& e) {
        return fail(app.get_subcommands().front()->get_name(), e);
    }
    return 0;
}
