// Comparison policies: single segmentation (no partitioning), random
// partition, greedy balanced partitioning via Kernighan-Lin swaps, and a
// one-shot policy-gradient agent sharing the denoiser backbone.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "microseg/common.hpp"
#include "microseg/denoiser.hpp"
#include "microseg/diffusion.hpp"
#include "microseg/metrics.hpp"
#include "microseg/rng.hpp"
#include "microseg/segmentation.hpp"

namespace microseg {

// The whole trust layer as one segmentation: every trust edge Selected.
inline Segmentation no_segmentation(const Env& env) {
    const int m = env.trust.node_count();
    Segmentation seg(m);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (env.trust.has_edge(i, j)) seg.set(i, j, EdgeState::Selected);
    return seg;
}

// Balanced random partition into `parts` (shuffled nodes dealt round-robin,
// so part sizes differ by at most one); evaluates one uniformly chosen part,
// whose internal trust edges form the segmentation.
inline Segmentation random_segmentation(const Env& env, Rng& rng, int parts) {
    require(parts >= 1, "need at least one part");
    const int m = env.trust.node_count();
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    for (int i = m - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<int> part(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) part[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k % parts;
    const int chosen = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(parts)));
    Segmentation seg(m);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (part[static_cast<std::size_t>(i)] == chosen &&
                part[static_cast<std::size_t>(j)] == chosen && env.trust.has_edge(i, j))
                seg.set(i, j, EdgeState::Selected);
    return seg;
}

namespace detail {

// Balanced bipartition of `nodes` by pairwise swaps. Minimizes the weight of
// cut edges subject to the node-weight balance staying within tolerance.
// Applied swaps always have positive gain, so the cut cost is non-increasing
// across iterations.
struct Bipartition {
    std::vector<int> side_a, side_b;
};

inline Bipartition kernighan_lin_bisect(const std::vector<int>& nodes,
                                        const std::vector<double>& edge_w, int m,
                                        const std::vector<double>& node_w, double frac_a,
                                        double balance_tol) {
    auto w = [&](int i, int j) { return edge_w[static_cast<std::size_t>(i) * m + j]; };

    // Initial assignment: heaviest first toward whichever side is furthest
    // below its weight target.
    double total_w = 0.0;
    for (int v : nodes) total_w += node_w[static_cast<std::size_t>(v)];
    const double target_a = frac_a * total_w;
    std::vector<int> order = nodes;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return node_w[static_cast<std::size_t>(a)] > node_w[static_cast<std::size_t>(b)];
    });
    std::vector<char> in_a(static_cast<std::size_t>(m), 0);
    double weight_a = 0.0;
    int count_a = 0;
    const int want_a = static_cast<int>(std::lround(frac_a * static_cast<double>(nodes.size())));
    for (int v : order) {
        const bool pick_a =
            (weight_a + node_w[static_cast<std::size_t>(v)] / 2.0 < target_a) &&
            count_a < std::max(1, want_a);
        if (pick_a) {
            in_a[static_cast<std::size_t>(v)] = 1;
            weight_a += node_w[static_cast<std::size_t>(v)];
            ++count_a;
        }
    }
    // Guarantee both sides non-empty when possible.
    if (count_a == 0 && !order.empty()) {
        in_a[static_cast<std::size_t>(order.front())] = 1;
        weight_a += node_w[static_cast<std::size_t>(order.front())];
        ++count_a;
    }
    if (count_a == static_cast<int>(nodes.size()) && nodes.size() > 1) {
        in_a[static_cast<std::size_t>(order.back())] = 0;
        weight_a -= node_w[static_cast<std::size_t>(order.back())];
        --count_a;
    }

    auto imbalance = [&](double wa) { return std::abs(wa - target_a); };

    // Swap refinement.
    bool improved = true;
    int guard = 0;
    while (improved && guard++ < 200) {
        improved = false;
        double best_gain = 1e-12;
        int best_a = -1, best_b = -1;
        for (int a : nodes) {
            if (!in_a[static_cast<std::size_t>(a)]) continue;
            double da = 0.0;
            for (int u : nodes)
                if (u != a) da += in_a[static_cast<std::size_t>(u)] ? -w(a, u) : w(a, u);
            for (int b : nodes) {
                if (in_a[static_cast<std::size_t>(b)]) continue;
                double db = 0.0;
                for (int u : nodes)
                    if (u != b) db += in_a[static_cast<std::size_t>(u)] ? w(b, u) : -w(b, u);
                const double gain = da + db - 2.0 * w(a, b);
                if (gain <= best_gain) continue;
                const double new_wa = weight_a - node_w[static_cast<std::size_t>(a)] +
                                      node_w[static_cast<std::size_t>(b)];
                if (imbalance(new_wa) > std::max(imbalance(weight_a), balance_tol * total_w))
                    continue;
                best_gain = gain;
                best_a = a;
                best_b = b;
            }
        }
        if (best_a >= 0) {
            in_a[static_cast<std::size_t>(best_a)] = 0;
            in_a[static_cast<std::size_t>(best_b)] = 1;
            weight_a += node_w[static_cast<std::size_t>(best_b)] -
                        node_w[static_cast<std::size_t>(best_a)];
            improved = true;
        }
    }

    Bipartition out;
    for (int v : nodes)
        (in_a[static_cast<std::size_t>(v)] ? out.side_a : out.side_b).push_back(v);
    return out;
}

inline void partition_recursive(const std::vector<int>& nodes, int parts,
                                const std::vector<double>& edge_w, int m,
                                const std::vector<double>& node_w, double balance_tol,
                                int first_label, std::vector<int>& labels) {
    if (parts == 1 || nodes.size() <= 1) {
        for (int v : nodes) labels[static_cast<std::size_t>(v)] = first_label;
        return;
    }
    const int parts_a = parts / 2;
    const int parts_b = parts - parts_a;
    const double frac_a = static_cast<double>(parts_a) / parts;
    const Bipartition bi =
        kernighan_lin_bisect(nodes, edge_w, m, node_w, frac_a, balance_tol);
    partition_recursive(bi.side_a, parts_a, edge_w, m, node_w, balance_tol, first_label, labels);
    partition_recursive(bi.side_b, parts_b, edge_w, m, node_w, balance_tol,
                        first_label + parts_a, labels);
}

} // namespace detail

enum class GreedyCost { Trust, Resource };

// Balanced multi-way partition of the trust layer; returns the per-node part
// labels. Trust cost keeps high-trust pairs internal (edge weight = omega);
// resource cost balances node resources across parts while minimizing the
// edge-count cut. Isolated nodes are spread round-robin.
inline std::vector<int> greedy_partition_labels(const Env& env, GreedyCost cost, int parts,
                                                double balance_tol = 0.1) {
    require(parts >= 2, "greedy partitioning needs at least two parts");
    const int m = env.trust.node_count();
    std::vector<double> edge_w(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (env.trust.has_edge(i, j))
                edge_w[static_cast<std::size_t>(i) * m + j] =
                    cost == GreedyCost::Trust ? env.trust.omega(i, j) : 1.0;

    std::vector<double> node_w(static_cast<std::size_t>(m), 1.0);
    if (cost == GreedyCost::Resource) {
        double max_c = 0.0, max_t = 0.0;
        for (int i = 0; i < m; ++i) {
            const auto& nd = env.physical.node(env.trust.physical_id(i));
            max_c = std::max(max_c, nd.compute_gflops);
            max_t = std::max(max_t, nd.transmit_watt);
        }
        for (int i = 0; i < m; ++i) {
            const auto& nd = env.physical.node(env.trust.physical_id(i));
            node_w[static_cast<std::size_t>(i)] =
                nd.compute_gflops / max_c + nd.transmit_watt / max_t;
        }
    }

    std::vector<int> connected, isolated;
    for (int i = 0; i < m; ++i)
        (env.trust.neighbors(i).empty() ? isolated : connected).push_back(i);

    std::vector<int> labels(static_cast<std::size_t>(m), 0);
    detail::partition_recursive(connected, parts, edge_w, m, node_w, balance_tol, 0, labels);
    int next = 0;
    for (int v : isolated) labels[static_cast<std::size_t>(v)] = next++ % parts;
    return labels;
}

// Partitions the network and returns the part with the highest reward as a
// segmentation.
inline Segmentation greedy_partition(const Env& env, GreedyCost cost, int parts) {
    const auto labels = greedy_partition_labels(env, cost, parts);
    const int m = env.trust.node_count();
    Segmentation best(m);
    double best_reward = -1.0;
    for (int p = 0; p < parts; ++p) {
        Segmentation seg(m);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                if (labels[static_cast<std::size_t>(i)] == p &&
                    labels[static_cast<std::size_t>(j)] == p && env.trust.has_edge(i, j))
                    seg.set(i, j, EdgeState::Selected);
        const double r = reward(seg, env);
        if (r > best_reward) {
            best_reward = r;
            best = seg;
        }
    }
    return best;
}

// One-shot policy-gradient agent: the shared graph-transformer backbone
// emits independent per-edge Bernoulli logits (read from the clean-graph
// head at t = 0 on the empty state); training uses the standardized
// score-function gradient on the same reward.
struct DrlResult {
    DenoiseNet net;
    TrainLog log;
};

inline Segmentation drl_argmax_segmentation(const DenoiseNet& net, const Env& env) {
    const int m = env.trust.node_count();
    const ConditionTensor cond = fuse_layers(env.physical, env.trust);
    const auto candidates = candidate_mask(env.trust);
    const EdgeDistribution probs =
        net.predict_clean(Segmentation(m), 0, cond, candidates);
    Segmentation seg(m);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (candidates[static_cast<std::size_t>(i) * m + j] && probs.at(i, j, 1) > 0.5)
                seg.set(i, j, EdgeState::Selected);
    return seg;
}

inline DrlResult drl_baseline(const Env& env, const DenoiserConfig& net_cfg,
                              const TrainConfig& config) {
    config.validate();
    DrlResult res{DenoiseNet::init(net_cfg, config.seed), {}};
    if (config.epochs == 0) return res;
    require(config.batch_size >= 2, "training needs a batch of at least two samples");

    const int m = env.trust.node_count();
    const ConditionTensor cond = fuse_layers(env.physical, env.trust);
    const auto candidates = candidate_mask(env.trust);
    const Segmentation empty(m);
    AscentOptimizer optimizer(res.net.param_count(), config.learning_rate,
                              config.weight_decay, config.adam_beta1, config.adam_beta2);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const EdgeDistribution probs = res.net.predict_clean(empty, 0, cond, candidates);

        std::vector<Segmentation> samples;
        std::vector<double> rewards(static_cast<std::size_t>(config.batch_size));
        std::vector<bool> feasible(static_cast<std::size_t>(config.batch_size));
        samples.reserve(static_cast<std::size_t>(config.batch_size));
        for (int d = 0; d < config.batch_size; ++d) {
            Rng rng = Rng::stream(config.seed, 0xd71, static_cast<std::uint64_t>(epoch),
                                  static_cast<std::uint64_t>(d));
            Segmentation seg(m);
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j)
                    if (candidates[static_cast<std::size_t>(i) * m + j] &&
                        rng.bernoulli((1.0 - config.explore_floor) * probs.at(i, j, 1) +
                                      0.5 * config.explore_floor))
                        seg.set(i, j, EdgeState::Selected);
            const MetricsReport rep = compute_metrics(seg, env);
            rewards[static_cast<std::size_t>(d)] = rep.reward;
            feasible[static_cast<std::size_t>(d)] = rep.t_s >= 1 &&
                                                    rep.l_s <= env.spec.deadline_s;
            samples.push_back(std::move(seg));
        }

        double mean = 0.0;
        for (double r : rewards) mean += r;
        mean /= config.batch_size;
        double var = 0.0;
        for (double r : rewards) var += (r - mean) * (r - mean);
        var /= std::max(1, config.batch_size - 1);
        const double stddev = std::sqrt(var);

        std::vector<double> grad(res.net.param_count(), 0.0);
        for (int d = 0; d < config.batch_size; ++d) {
            double rhat = (rewards[static_cast<std::size_t>(d)] - mean) /
                          (stddev + config.grad_eps);
            if (config.advantage_clip > 0.0)
                rhat = std::clamp(rhat, -config.advantage_clip, config.advantage_clip);
            if (rhat == 0.0) continue;
            res.net.logprob_backward(empty, 0, cond, candidates,
                                     samples[static_cast<std::size_t>(d)],
                                     rhat / config.batch_size, grad);
        }
        for (double x : grad)
            if (!is_finite(x))
                throw ValidationError("non-finite gradient at epoch " + std::to_string(epoch));
        optimizer.step(res.net, grad);

        EpochStats st;
        st.epoch = epoch;
        st.avg_reward = mean;
        st.reward_std = stddev;
        int nf = 0;
        for (bool f : feasible) nf += f ? 1 : 0;
        st.feasible_fraction = static_cast<double>(nf) / config.batch_size;
        st.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.log.epochs.push_back(st);
    }
    return res;
}

} // namespace microseg
