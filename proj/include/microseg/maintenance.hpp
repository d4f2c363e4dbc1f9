// Adaptive maintenance of a deployed segmentation: epsilon-interest zones,
// hard adaptive masks, edit-distance-penalized rewards and the fine-tuning
// loop that resumes from a trained checkpoint.
#pragma once

#include <deque>
#include <set>
#include <vector>

#include "microseg/common.hpp"
#include "microseg/diffusion.hpp"
#include "microseg/metrics.hpp"
#include "microseg/network.hpp"
#include "microseg/segmentation.hpp"

namespace microseg {

struct InterestZone {
    int epsilon = 0;
    std::vector<std::uint8_t> member;  // size m, 1 = inside the zone

    int size() const {
        int c = 0;
        for (auto b : member) c += b;
        return c;
    }
};

// BFS closure of radius epsilon over the trust edges, seeded at every node
// whose role is one of the required service types.
inline InterestZone interest_zone(const TrustGraph& trust, const std::set<int>& required_types,
                                  int epsilon) {
    require(epsilon >= 0, "zone radius must be non-negative");
    const int m = trust.node_count();
    InterestZone zone;
    zone.epsilon = epsilon;
    zone.member.assign(static_cast<std::size_t>(m), 0);
    std::vector<int> depth(static_cast<std::size_t>(m), -1);
    std::deque<int> frontier;
    for (int i = 0; i < m; ++i) {
        if (required_types.count(trust.role(i))) {
            depth[static_cast<std::size_t>(i)] = 0;
            zone.member[static_cast<std::size_t>(i)] = 1;
            frontier.push_back(i);
        }
    }
    require(!frontier.empty(), "no node of a required type exists; maintenance impossible");
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop_front();
        if (depth[static_cast<std::size_t>(v)] >= epsilon) continue;
        for (int u : trust.neighbors(v)) {
            if (depth[static_cast<std::size_t>(u)] >= 0) continue;
            depth[static_cast<std::size_t>(u)] = depth[static_cast<std::size_t>(v)] + 1;
            zone.member[static_cast<std::size_t>(u)] = 1;
            frontier.push_back(u);
        }
    }
    return zone;
}

// Symmetric binary mask: an entry is masked (1) iff either endpoint lies
// outside the zone. Masked entries are forced Unselected during denoising.
inline std::vector<std::uint8_t> adaptive_mask(const InterestZone& zone, int m) {
    require(static_cast<int>(zone.member.size()) == m, "zone size does not match graph");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(m) * m, 0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (!zone.member[static_cast<std::size_t>(i)] ||
                !zone.member[static_cast<std::size_t>(j)])
                mask[static_cast<std::size_t>(i) * m + j] = 1;
    return mask;
}

// Number of unordered pairs whose category differs. Equals the graph edit
// distance under an identical labeled node set with unit edge-edit cost.
inline int graph_edit_distance(const Segmentation& a, const Segmentation& b) {
    require(a.m() == b.m(), "edit distance needs a shared node index space");
    int d = 0;
    for (int i = 0; i < a.m(); ++i)
        for (int j = i + 1; j < a.m(); ++j)
            if (a.at(i, j) != b.at(i, j)) ++d;
    return d;
}

// Two-term fine-tuning reward: gated utility minus the re-configuration
// cost. Infeasible candidates keep the drift penalty so topology changes
// stay discouraged even before feasibility is reached.
inline double finetune_reward(const Segmentation& candidate, const Segmentation& reference,
                              const Env& env, double alpha4) {
    require(alpha4 >= 0.0, "cost weight must be non-negative");
    const double drift = alpha4 * graph_edit_distance(candidate, reference);
    return reward(candidate, env) - drift;
}

struct FinetuneConfig {
    double learning_rate = 1e-4;  // eta_f
    int epochs = 100;
    int epsilon = 1;
    double alpha4 = 0.1;
    double mask_temperature = 1.0;  // 1 = hard mask
    std::set<int> required_types;
    TrainConfig base;  // batch/timestep/diffusion-step settings
};

struct FinetuneResult {
    TrainLog log;
    std::vector<std::uint8_t> mask;
    InterestZone zone;
};

// Fine-tunes a trained checkpoint in place for a changed environment. The
// adaptive mask joins the filter pipeline as a hard constraint and the
// edit-distance penalty replaces the plain reward.
inline FinetuneResult finetune(DenoiseNet& net, const Env& new_env, const FinetuneConfig& cfg,
                               const Segmentation& reference,
                               const std::function<FilterSet(const Env&, int)>& filters = {}) {
    require(reference.m() == new_env.trust.node_count(),
            "reference segmentation does not match the new environment");
    FinetuneResult res;
    res.zone = interest_zone(new_env.trust, cfg.required_types, cfg.epsilon);
    res.mask = adaptive_mask(res.zone, new_env.trust.node_count());

    TrainConfig tc = cfg.base;
    tc.learning_rate = cfg.learning_rate;
    tc.epochs = cfg.epochs;
    tc.temperature = cfg.base.temperature;

    TrainHooks hooks;
    hooks.mask = &res.mask;
    hooks.mask_temperature = cfg.mask_temperature;
    hooks.filters = filters;
    hooks.reward_fn = [&new_env, &reference, alpha4 = cfg.alpha4](const Segmentation& seg) {
        const MetricsReport rep = compute_metrics(seg, new_env);
        const bool feasible = rep.t_s >= 1 && rep.l_s <= new_env.spec.deadline_s;
        const double drift = alpha4 * graph_edit_distance(seg, reference);
        return RewardOutcome{rep.reward - drift, feasible};
    };
    hooks.aux_stat = [&reference](const Segmentation& seg) {
        return static_cast<double>(graph_edit_distance(seg, reference));
    };
    // Hard-mask guarantee: with a hard mask, no state in any trajectory may
    // select a masked pair.
    if (cfg.mask_temperature >= 1.0) {
        hooks.on_batch = [&res](int, const std::vector<Trajectory>& batch) {
            const auto& mask = res.mask;
            for (const auto& tr : batch) {
                for (const auto& st : tr.states) {
                    for (int i = 0; i < st.m(); ++i)
                        for (int j = i + 1; j < st.m(); ++j)
                            if (mask[static_cast<std::size_t>(i) * st.m() + j])
                                require(!st.selected(i, j),
                                        "masked pair selected during fine-tuning");
                }
            }
        };
    }

    res.log = train(new_env, tc, net, hooks);
    return res;
}

} // namespace microseg
