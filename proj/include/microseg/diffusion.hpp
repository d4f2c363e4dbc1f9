// Trajectory sampling and eager policy-gradient training of the denoiser.
//
// One trajectory runs the reverse chain from a filtered random graph down to
// a terminal segmentation, whose reward is the only nonzero reward along the
// way. The gradient weights the clean-graph prediction log-likelihood at a
// few uniformly sampled timesteps by the batch-standardized terminal reward.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "microseg/common.hpp"
#include "microseg/denoiser.hpp"
#include "microseg/filters.hpp"
#include "microseg/metrics.hpp"
#include "microseg/rng.hpp"
#include "microseg/schedule.hpp"

namespace microseg {

struct TrainConfig {
    double learning_rate = 1e-4;  // eta
    int epochs = 200;             // N_t
    int batch_size = 16;          // |D|
    int timestep_samples = 4;     // |T|
    int diffusion_steps = 30;     // T
    double temperature = 1.0;     // phi for the filter set
    std::uint64_t seed = 0;
    double grad_eps = 1e-8;       // reward-standardization guard
    // Cap on |standardized reward|; keeps the noise amplification bounded
    // when the batch reward spread collapses near convergence. 0 disables.
    double advantage_clip = 3.0;
    // Training-time exploration floor: each categorical draw along a rollout
    // mixes this much uniform noise, so a saturated policy can still reach
    // rewarding states. The gradient always uses the model's own
    // probabilities; evaluation rollouts never mix.
    double explore_floor = 0.02;
    // L2 weight decay applied with the ascent step; bounds the logits so the
    // per-edge distributions never saturate to exact point masses.
    double weight_decay = 1e-3;
    // Adam moment coefficients for the ascent step (beta1 = 0 and beta2 = 0
    // degrade to plain gradient ascent).
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    NoiseKind noise_kind = NoiseKind::Uniform;

    void validate() const {
        require(learning_rate > 0.0, "learning rate must be positive");
        require(epochs >= 0, "epoch count must be non-negative");
        require(batch_size >= 1 && timestep_samples >= 1 && diffusion_steps >= 1,
                "trajectory counts must be positive");
        require(temperature >= 0.0 && temperature <= 1.0, "temperature must lie in [0,1]");
    }
};

struct RewardOutcome {
    double value = 0.0;
    bool feasible = false;
};
using RewardFn = std::function<RewardOutcome(const Segmentation&)>;

inline RewardFn default_reward(const Env& env) {
    return [&env](const Segmentation& seg) {
        const MetricsReport rep = compute_metrics(seg, env);
        return RewardOutcome{rep.reward, rep.t_s >= 1 && rep.l_s <= env.spec.deadline_s};
    };
}

struct Trajectory {
    // states[k] holds the segmentation at timesteps[k]; timesteps run from T
    // down to 0.
    std::vector<Segmentation> states;
    std::vector<int> timesteps;
    std::vector<std::uint8_t> active;  // live candidate pairs for this rollout
    double reward = 0.0;
    bool feasible = false;
    std::vector<int> sampled_timesteps;         // prediction points in [1, T]
    std::vector<double> logp;                   // recorded log p(G0 | G_t) per sample
    std::vector<EdgeDistribution> predictions;  // clean predictions at those points

    const Segmentation& terminal() const { return states.back(); }
    const Segmentation& state_at(int t) const {
        return states.at(static_cast<std::size_t>(timesteps.front() - t));
    }
};

enum class SampleMode { Train, Eval };

struct TrajectoryOptions {
    SampleMode mode = SampleMode::Train;
    int timestep_samples = 4;  // |T|
    double explore_floor = 0.0;
    // Extra constraint mask (1 = marked), e.g. an adaptive mask. Marked
    // pairs are forced Unselected with probability mask_temperature; 1 is a
    // hard constraint.
    const std::vector<std::uint8_t>* mask = nullptr;
    double mask_temperature = 1.0;
    const RewardFn* reward_fn = nullptr;
};

inline Trajectory sample_trajectory(const DenoiseNet& net, const ConditionTensor& cond,
                                    const FilterSet& filters, const NoiseSchedule& sched,
                                    const Env& env, Rng& rng,
                                    const TrajectoryOptions& opt = {}) {
    const int m = env.trust.node_count();
    require(cond.m == m, "condition tensor has wrong node count");
    const int steps = sched.steps();

    Trajectory traj;
    traj.active = candidate_mask(env.trust);
    const auto marked = mark_edges(filters, env.trust, env.physical);
    const auto removed = draw_removals(marked, m, filters.temperature, rng);
    for (std::size_t k = 0; k < traj.active.size(); ++k)
        if (removed[k]) traj.active[k] = 0;
    if (opt.mask) {
        const auto mask_removed = draw_removals(*opt.mask, m, opt.mask_temperature, rng);
        for (std::size_t k = 0; k < traj.active.size(); ++k)
            if (mask_removed[k]) traj.active[k] = 0;
    }

    // Random terminal state over the live pairs.
    const auto term = sched.terminal_distribution();
    Segmentation g(m);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (traj.active[static_cast<std::size_t>(i) * m + j])
                g.set(i, j, static_cast<EdgeState>(rng.categorical(term.data(), 2)));

    // Distinct prediction timesteps, uniform over [1, T] (partial shuffle).
    {
        std::vector<int> pool(static_cast<std::size_t>(steps));
        for (int t = 1; t <= steps; ++t) pool[static_cast<std::size_t>(t - 1)] = t;
        const int k = std::min(steps, std::max(1, opt.timestep_samples));
        for (int i = 0; i < k; ++i) {
            const int j = i + static_cast<int>(rng.uniform_int(
                                  static_cast<std::uint64_t>(steps - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        traj.sampled_timesteps.assign(pool.begin(), pool.begin() + k);
        std::sort(traj.sampled_timesteps.begin(), traj.sampled_timesteps.end(),
                  std::greater<int>());
    }

    traj.states.push_back(g);
    traj.timesteps.push_back(steps);
    traj.predictions.resize(traj.sampled_timesteps.size());

    for (int t = steps; t >= 1; --t) {
        const EdgeDistribution p_clean = net.predict_clean(g, t, cond, traj.active);
        for (std::size_t s = 0; s < traj.sampled_timesteps.size(); ++s)
            if (traj.sampled_timesteps[s] == t) traj.predictions[s] = p_clean;
        const EdgeDistribution post = denoise_posterior(g, p_clean, t, sched, traj.active);

        Segmentation next(m);
        const bool argmax_step = opt.mode == SampleMode::Eval && t == 1;
        const double floor = opt.mode == SampleMode::Train ? opt.explore_floor : 0.0;
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                if (!traj.active[static_cast<std::size_t>(i) * m + j]) continue;
                const double row[2] = {(1.0 - floor) * post.at(i, j, 0) + 0.5 * floor,
                                       (1.0 - floor) * post.at(i, j, 1) + 0.5 * floor};
                const int cat = argmax_step ? (row[1] > row[0] ? 1 : 0)
                                            : rng.categorical(row, 2);
                next.set(i, j, static_cast<EdgeState>(cat));
            }
        }
        g = next;
        traj.states.push_back(g);
        traj.timesteps.push_back(t - 1);
    }

    // Recorded log-likelihood of the realized terminal graph at each
    // prediction point, over the live unordered pairs.
    const Segmentation& g0 = traj.terminal();
    traj.logp.resize(traj.sampled_timesteps.size(), 0.0);
    for (std::size_t s = 0; s < traj.sampled_timesteps.size(); ++s) {
        double lp = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                if (traj.active[static_cast<std::size_t>(i) * m + j])
                    lp += std::log(traj.predictions[s].at(i, j, static_cast<int>(g0.at(i, j))));
        traj.logp[s] = lp;
    }

    const RewardFn fallback = default_reward(env);
    const RewardFn& rf = opt.reward_fn ? *opt.reward_fn : fallback;
    const RewardOutcome out = rf(traj.terminal());
    traj.reward = out.value;
    traj.feasible = out.feasible;
    return traj;
}

struct GradientStats {
    std::vector<double> grad;
    double reward_mean = 0.0;
    double reward_std = 0.0;
};

// Adam-style ascent with decoupled weight decay. With both betas zero the
// step reduces to eta * (g - lambda * theta).
class AscentOptimizer {
public:
    AscentOptimizer(std::size_t n, double lr, double weight_decay, double beta1, double beta2)
        : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), m_(n, 0.0), v_(n, 0.0) {}

    void step(DenoiseNet& net, const std::vector<double>& grad) {
        ++t_;
        const auto& theta = net.params().flat;
        std::vector<double> update(grad.size());
        const bool adaptive = b1_ > 0.0 || b2_ > 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            double step_i;
            if (adaptive) {
                m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
                v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
                const double mhat = m_[i] / (1.0 - std::pow(b1_, t_));
                const double vhat = v_[i] / (1.0 - std::pow(b2_, t_));
                step_i = mhat / (std::sqrt(vhat) + 1e-8);
            } else {
                step_i = grad[i];
            }
            update[i] = lr_ * (step_i - wd_ * theta[i]);
        }
        net.apply_update(update);
    }

private:
    double lr_, wd_, b1_, b2_;
    int t_ = 0;
    std::vector<double> m_, v_;
};

// g(theta) = T/(|D|*|T|) * sum_traj sum_t rhat * grad log p(G0 | Gt), with
// rhat the batch-standardized terminal reward. Ascent direction.
inline GradientStats eager_policy_gradient(const std::vector<Trajectory>& batch,
                                           const DenoiseNet& net, const ConditionTensor& cond,
                                           double eps = 1e-8, double advantage_clip = 0.0) {
    require(batch.size() >= 2, "reward standardization needs at least two trajectories");
    GradientStats out;
    out.grad.assign(net.param_count(), 0.0);

    double mean = 0.0;
    for (const auto& tr : batch) mean += tr.reward;
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (const auto& tr : batch) var += (tr.reward - mean) * (tr.reward - mean);
    var /= static_cast<double>(batch.size() - 1);
    out.reward_mean = mean;
    out.reward_std = std::sqrt(var);

    const int steps = batch.front().timesteps.front();
    for (const auto& tr : batch) {
        double rhat = (tr.reward - mean) / (out.reward_std + eps);
        if (advantage_clip > 0.0) rhat = std::clamp(rhat, -advantage_clip, advantage_clip);
        if (rhat == 0.0) continue;
        const double coeff = rhat * steps /
                             (static_cast<double>(batch.size()) *
                              static_cast<double>(tr.sampled_timesteps.size()));
        for (int t : tr.sampled_timesteps) {
            net.logprob_backward(tr.state_at(t), t, cond, tr.active, tr.terminal(), coeff,
                                 out.grad);
        }
    }
    return out;
}

// Value of the surrogate objective whose parameter gradient is the eager
// policy gradient, for fixed trajectories and fixed standardized rewards.
// Used by the finite-difference checks.
inline double eager_surrogate_value(const std::vector<Trajectory>& batch, const DenoiseNet& net,
                                    const ConditionTensor& cond, double eps = 1e-8,
                                    double advantage_clip = 0.0) {
    require(batch.size() >= 2, "reward standardization needs at least two trajectories");
    double mean = 0.0;
    for (const auto& tr : batch) mean += tr.reward;
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (const auto& tr : batch) var += (tr.reward - mean) * (tr.reward - mean);
    var /= static_cast<double>(batch.size() - 1);
    const double stddev = std::sqrt(var);

    const int steps = batch.front().timesteps.front();
    double value = 0.0;
    for (const auto& tr : batch) {
        double rhat = (tr.reward - mean) / (stddev + eps);
        if (advantage_clip > 0.0) rhat = std::clamp(rhat, -advantage_clip, advantage_clip);
        const double coeff = rhat * steps /
                             (static_cast<double>(batch.size()) *
                              static_cast<double>(tr.sampled_timesteps.size()));
        for (int t : tr.sampled_timesteps)
            value += coeff * net.logprob(tr.state_at(t), t, cond, tr.active, tr.terminal());
    }
    return value;
}

struct EpochStats {
    int epoch = 0;
    double avg_reward = 0.0;
    double reward_std = 0.0;
    double feasible_fraction = 0.0;
    double avg_ged = 0.0;  // used by fine-tuning logs
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
};

// Composition points for fine-tuning and experiments.
struct TrainHooks {
    // Re-evaluated once per epoch (the agent works online).
    std::function<FilterSet(const Env&, int epoch)> filters;
    const std::vector<std::uint8_t>* mask = nullptr;
    double mask_temperature = 1.0;
    RewardFn reward_fn;
    // Mean auxiliary statistic per epoch (e.g. edit distance to a reference).
    std::function<double(const Segmentation&)> aux_stat;
    std::function<void(int, const std::vector<Trajectory>&)> on_batch;
};

// Algorithm: per epoch, sample a batch of trajectories with per-trajectory
// random streams, compute the eager policy gradient and take one ascent
// step. Deterministic given the seed.
inline TrainLog train(const Env& env, const TrainConfig& config, DenoiseNet& net,
                      const TrainHooks& hooks = {}) {
    config.validate();
    env.spec.validate();
    TrainLog log;
    if (config.epochs == 0) return log;
    require(config.batch_size >= 2, "training needs a batch of at least two trajectories");

    const ConditionTensor cond = fuse_layers(env.physical, env.trust);
    const NoiseSchedule sched =
        make_noise_schedule(config.diffusion_steps, config.noise_kind,
                            empirical_selected_marginal(env.trust));
    const RewardFn reward_fn = hooks.reward_fn ? hooks.reward_fn : default_reward(env);
    AscentOptimizer optimizer(net.param_count(), config.learning_rate, config.weight_decay,
                              config.adam_beta1, config.adam_beta2);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        FilterSet filters;
        filters.temperature = config.temperature;
        if (hooks.filters) filters = hooks.filters(env, epoch);

        TrajectoryOptions opt;
        opt.mode = SampleMode::Train;
        opt.timestep_samples = config.timestep_samples;
        opt.explore_floor = config.explore_floor;
        opt.mask = hooks.mask;
        opt.mask_temperature = hooks.mask_temperature;
        opt.reward_fn = &reward_fn;

        std::vector<Trajectory> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int d = 0; d < config.batch_size; ++d) {
            Rng rng = Rng::stream(config.seed, 0x7261, static_cast<std::uint64_t>(epoch),
                                  static_cast<std::uint64_t>(d));
            batch.push_back(sample_trajectory(net, cond, filters, sched, env, rng, opt));
        }
        if (hooks.on_batch) hooks.on_batch(epoch, batch);

        GradientStats g = eager_policy_gradient(batch, net, cond, config.grad_eps,
                                                config.advantage_clip);
        for (double x : g.grad)
            if (!is_finite(x))
                throw ValidationError("non-finite gradient at epoch " + std::to_string(epoch));
        optimizer.step(net, g.grad);

        EpochStats st;
        st.epoch = epoch;
        st.avg_reward = g.reward_mean;
        st.reward_std = g.reward_std;
        int feasible = 0;
        double ged = 0.0;
        for (const auto& tr : batch) {
            if (tr.feasible) ++feasible;
            if (hooks.aux_stat) ged += hooks.aux_stat(tr.terminal());
        }
        st.feasible_fraction = static_cast<double>(feasible) / config.batch_size;
        st.avg_ged = hooks.aux_stat ? ged / config.batch_size : 0.0;
        st.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(st);
    }
    return log;
}

// Evaluation rollout: argmax terminal step, fixed stream from the seed.
inline Segmentation generate_segmentation(const DenoiseNet& net, const Env& env,
                                          const FilterSet& filters, int diffusion_steps,
                                          NoiseKind kind, std::uint64_t seed,
                                          const std::vector<std::uint8_t>* mask = nullptr,
                                          double mask_temperature = 1.0) {
    const ConditionTensor cond = fuse_layers(env.physical, env.trust);
    const NoiseSchedule sched =
        make_noise_schedule(diffusion_steps, kind, empirical_selected_marginal(env.trust));
    Rng rng = Rng::stream(seed, 0xe7a1);
    TrajectoryOptions opt;
    opt.mode = SampleMode::Eval;
    opt.mask = mask;
    opt.mask_temperature = mask_temperature;
    return sample_trajectory(net, cond, filters, sched, env, rng, opt).terminal();
}

} // namespace microseg
