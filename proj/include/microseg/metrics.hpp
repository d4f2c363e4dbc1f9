// Performance indicators of a candidate micro-segmentation: SFC extraction,
// computation/transmission latency, throughput, execution success
// probability, trustworthiness equilibrium, user utility and the training
// reward. All functions are pure; Monte-Carlo mode draws from an explicit
// seeded stream.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "microseg/common.hpp"
#include "microseg/network.hpp"
#include "microseg/rng.hpp"
#include "microseg/segmentation.hpp"
#include "microseg/service.hpp"

namespace microseg {

struct Env {
    PhysicalGraph physical;
    TrustGraph trust;
    ServiceSpec spec;
};

// One service function chain: local node indices, one per service step.
struct SfcChain {
    std::vector<int> nodes;
};

struct SfcSet {
    std::vector<SfcChain> chains;
    int chain_count() const { return static_cast<int>(chains.size()); }
    bool empty() const { return chains.empty(); }
};

struct MetricsOptions {
    bool monte_carlo = false;
    int samples = 100000;
    std::uint64_t seed = 1;
    // Which stochastic model components the Monte-Carlo mode samples.
    bool sample_complexity = true;
    bool sample_thresholds = true;
    bool sample_fading = false;
    bool sample_arrivals = true;
};

struct MetricsReport {
    double l_c = 0.0;
    double l_t = 0.0;
    double l_s = 0.0;
    int t_s = 0;
    double p_s = 0.0;
    double e_s = 0.0;
    double u_u = 0.0;
    double reward = 0.0;

    static std::string csv_header() { return "l_c,l_t,l_s,t_s,p_s,e_s,u_u,reward"; }
    std::string csv_row() const {
        return fmt_double(l_c) + "," + fmt_double(l_t) + "," + fmt_double(l_s) + "," +
               std::to_string(t_s) + "," + fmt_double(p_s) + "," + fmt_double(e_s) + "," +
               fmt_double(u_u) + "," + fmt_double(reward);
    }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

// All chains whose node roles match the service type sequence and whose
// consecutive pairs are Selected edges; nodes within a chain are distinct.
// Enumeration order is lexicographic in node indices, which makes the
// downstream selection deterministic.
inline std::vector<SfcChain> enumerate_chains(const Segmentation& seg, const TrustGraph& trust,
                                              const std::vector<int>& types) {
    const int m = seg.m();
    const int n = static_cast<int>(types.size());
    std::vector<SfcChain> out;
    std::vector<int> cur;
    std::vector<char> used(m, 0);
    auto dfs = [&](auto&& self, int depth) -> void {
        if (depth == n) {
            out.push_back({cur});
            return;
        }
        for (int v = 0; v < m; ++v) {
            if (used[v] || trust.role(v) != types[depth]) continue;
            if (depth > 0 && !seg.selected(cur.back(), v)) continue;
            used[v] = 1;
            cur.push_back(v);
            self(self, depth + 1);
            cur.pop_back();
            used[v] = 0;
        }
    };
    dfs(dfs, 0);
    return out;
}

// Maximum-cardinality node-disjoint subset of `chains`; ties broken toward
// the lexicographically first chain-index list. Branch and bound.
inline std::vector<int> max_disjoint_exhaustive(const std::vector<SfcChain>& chains, int m) {
    std::vector<std::uint32_t> masks(chains.size(), 0);
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (int v : chains[c].nodes) masks[c] |= (1u << v);

    std::vector<int> best, cur;
    // Include-first DFS keeps the first maximum found, i.e. the
    // lexicographically smallest chain-index set of maximum cardinality.
    auto dfs = [&](auto&& self, std::size_t idx, std::uint32_t used) -> void {
        if (cur.size() + (chains.size() - idx) <= best.size()) return;
        if (idx == chains.size()) {
            best = cur;
            return;
        }
        if ((masks[idx] & used) == 0) {
            cur.push_back(static_cast<int>(idx));
            self(self, idx + 1, used | masks[idx]);
            cur.pop_back();
        }
        self(self, idx + 1, used);
    };
    dfs(dfs, 0, 0);
    (void)m;
    return best;
}

inline std::vector<int> max_disjoint_greedy(const std::vector<SfcChain>& chains, int m) {
    std::vector<char> used(m, 0);
    std::vector<int> picked;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        bool free = true;
        for (int v : chains[c].nodes)
            if (used[v]) { free = false; break; }
        if (!free) continue;
        for (int v : chains[c].nodes) used[v] = 1;
        picked.push_back(static_cast<int>(c));
    }
    return picked;
}

// Chains through each node; equals 1 for every chain node under
// disjointness but kept general for shared devices.
inline std::vector<int> chain_load(const SfcSet& sfcs, int m) {
    std::vector<int> tau(m, 0);
    for (const auto& c : sfcs.chains)
        for (int v : c.nodes) ++tau[v];
    return tau;
}

inline double sample_truncated_normal(Rng& rng, double mean, double stddev) {
    if (stddev <= 0.0) return mean;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double x = rng.normal(mean, stddev);
        if (x >= 0.0) return x;
    }
    return 0.0;
}

} // namespace detail

// Decomposes a segmentation into a maximal set of node-disjoint chains that
// realize the service's type sequence. Exhaustive search up to 12 nodes,
// greedy first-fit beyond.
inline SfcSet extract_sfcs(const Segmentation& seg, const TrustGraph& trust,
                           const ServiceSpec& spec) {
    require(seg.m() == trust.node_count(), "segmentation and trust graph disagree on node count");
    const auto chains = detail::enumerate_chains(seg, trust, spec.type_sequence());
    const int m = seg.m();
    const auto picked = m <= 12 ? detail::max_disjoint_exhaustive(chains, m)
                                : detail::max_disjoint_greedy(chains, m);
    SfcSet out;
    out.chains.reserve(picked.size());
    for (int idx : picked) out.chains.push_back(chains[idx]);
    return out;
}

// One-hop transmission bandwidth in bit/s between two physical nodes, with
// the sender's transmit power and an explicit fading power |h0|^2.
inline double link_bandwidth(int sender, int receiver, const PhysicalGraph& physical,
                             const ServiceSpec& spec, double fading) {
    require(sender != receiver, "no link from a node to itself");
    require(fading >= 0.0, "fading power must be non-negative");
    const double d = physical.distance(sender, receiver);
    const auto& ch = spec.channel;
    require(d > 0.0 || ch.path_loss_exponent == 0.0,
            "co-located distinct nodes unsupported with positive path loss");
    const double gain = std::pow(d, -ch.path_loss_exponent);
    const double snr = physical.node(sender).transmit_watt * gain * fading / ch.noise_power;
    return ch.bandwidth_hz * std::log2(1.0 + snr);
}

// Expected per-task computation latency. Each device's computing power is
// shared equally among the chains it serves, so a device carrying tau chains
// works each step at c/tau.
inline double computation_latency(const SfcSet& sfcs, const PhysicalGraph& physical,
                                  const TrustGraph& trust, const ServiceSpec& spec,
                                  const MetricsOptions& opt = {}) {
    require(!sfcs.empty(), "computation latency undefined for an empty SFC set");
    const int q_count = sfcs.chain_count();
    const auto tau = detail::chain_load(sfcs, trust.node_count());
    const int n = spec.step_count();

    auto per_task = [&](const std::vector<double>& complexity) {
        double total = 0.0;
        for (const auto& chain : sfcs.chains) {
            for (int j = 0; j < n; ++j) {
                const int dev = chain.nodes[j];
                const double power =
                    physical.node(trust.physical_id(dev)).compute_gflops / tau[dev];
                total += complexity[j] / power;
            }
        }
        return total / q_count;
    };

    std::vector<double> mean_complexity(n);
    for (int j = 0; j < n; ++j) mean_complexity[j] = spec.steps[j].complexity_mean;
    if (!opt.monte_carlo) return per_task(mean_complexity);

    Rng rng = Rng::stream(opt.seed, 0x10ca1);
    double acc = 0.0;
    std::vector<double> c(n);
    for (int s = 0; s < opt.samples; ++s) {
        if (opt.sample_arrivals) (void)rng.exponential();  // Poisson inter-arrival gap
        for (int j = 0; j < n; ++j) {
            c[j] = opt.sample_complexity
                       ? detail::sample_truncated_normal(rng, spec.steps[j].complexity_mean,
                                                         spec.steps[j].complexity_std)
                       : spec.steps[j].complexity_mean;
        }
        acc += per_task(c);
    }
    return acc / opt.samples;
}

// Expected per-task transmission latency over the chain hops (hop count is 1
// everywhere: providers exchange results directly). The 1/tau factor on the
// sending device is applied as stated by the model.
inline double transmission_latency(const SfcSet& sfcs, const PhysicalGraph& physical,
                                   const TrustGraph& trust, const ServiceSpec& spec,
                                   const MetricsOptions& opt = {}) {
    require(!sfcs.empty(), "transmission latency undefined for an empty SFC set");
    const int q_count = sfcs.chain_count();
    const int n = spec.step_count();
    if (n == 1) return 0.0;
    const auto tau = detail::chain_load(sfcs, trust.node_count());

    auto per_task = [&](Rng* rng) {
        double total = 0.0;
        for (const auto& chain : sfcs.chains) {
            for (int j = 0; j + 1 < n; ++j) {
                const int sender = chain.nodes[j];
                const int receiver = chain.nodes[j + 1];
                const double fading = rng && opt.sample_fading ? rng->exponential() : 1.0;
                const double bw = link_bandwidth(trust.physical_id(sender),
                                                 trust.physical_id(receiver), physical, spec,
                                                 fading);
                total += spec.steps[j].bandwidth_bits / (tau[sender] * bw);
            }
        }
        return total / q_count;
    };

    if (!opt.monte_carlo) return per_task(nullptr);
    Rng rng = Rng::stream(opt.seed, 0x7ca45);
    double acc = 0.0;
    for (int s = 0; s < opt.samples; ++s) {
        if (opt.sample_arrivals) (void)rng.exponential();
        acc += per_task(&rng);
    }
    return acc / opt.samples;
}

// Probability that a uniformly assigned request executes its whole chain:
// each hop passes iff the sampled threshold does not exceed the stored
// mutual trust. Zero-variance thresholds degenerate to indicators.
inline double success_probability(const SfcSet& sfcs, const TrustGraph& trust,
                                  const ServiceSpec& spec, const MetricsOptions& opt = {}) {
    if (sfcs.empty()) return 0.0;
    const int q_count = sfcs.chain_count();
    const int n = spec.step_count();

    if (!opt.monte_carlo) {
        double p = 0.0;
        for (const auto& chain : sfcs.chains) {
            double prod = 1.0;
            for (int i = 0; i + 1 < n; ++i) {
                const double w = trust.omega(chain.nodes[i], chain.nodes[i + 1]);
                const auto& st = spec.steps[i];
                prod *= st.threshold_std > 0.0
                            ? normal_cdf((w - st.threshold_mean) / st.threshold_std)
                            : (w >= st.threshold_mean ? 1.0 : 0.0);
            }
            p += prod / q_count;
        }
        return p;
    }

    Rng rng = Rng::stream(opt.seed, 0x5acce55);
    int hits = 0;
    for (int s = 0; s < opt.samples; ++s) {
        const auto& chain = sfcs.chains[rng.uniform_int(q_count)].nodes;
        bool ok = true;
        for (int i = 0; i + 1 < n && ok; ++i) {
            const auto& st = spec.steps[i];
            double t = opt.sample_thresholds ? rng.normal(st.threshold_mean, st.threshold_std)
                                             : st.threshold_mean;
            t = std::clamp(t, 0.0, 1.0);
            ok = t <= trust.omega(chain[i], chain[i + 1]);
        }
        if (ok) ++hits;
    }
    return static_cast<double>(hits) / opt.samples;
}

// Trustworthiness equilibrium: mean absolute trust discrepancy seen by each
// in-segmentation node toward its Selected neighbors, normalized by the
// per-node pair count and by n*Q. Nodes with fewer than two Selected
// neighbors contribute nothing.
inline double trust_equilibrium(const Segmentation& seg, const TrustGraph& trust, int n_steps,
                                int q_chains) {
    require(seg.m() == trust.node_count(), "segmentation and trust graph disagree on node count");
    require(n_steps >= 1 && q_chains >= 1, "equilibrium normalization needs n >= 1 and Q >= 1");
    const int m = seg.m();
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        std::vector<double> w;
        for (int j = 0; j < m; ++j)
            if (j != i && seg.selected(i, j)) w.push_back(trust.omega(i, j));
        const int k = static_cast<int>(w.size());
        if (k < 2) continue;
        double pairsum = 0.0;
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) pairsum += std::abs(w[a] - w[b]);
        total += pairsum / (0.5 * k * (k - 1));
    }
    return total / (static_cast<double>(n_steps) * q_chains);
}

// Weber-Fechner user utility. The success probability is clamped away from
// {0,1} where the log base degenerates.
inline double utility(double l_s, int t_s, double p_s, double e_s, const ServiceSpec& spec) {
    require(l_s > 0.0, "latency must be positive");
    require(t_s >= 1, "utility defined only for segmentations hosting a chain");
    require(l_s <= spec.deadline_s, "utility defined only within the deadline");
    const double p = std::clamp(p_s, 1e-6, 1.0 - 1e-6);
    const double log_term = std::log(l_s / spec.deadline_s) / std::log(p);
    const auto& a = spec.weights;
    return p * (a.alpha1 * log_term + a.alpha2 * t_s + a.alpha3 * (1.0 - e_s));
}

// Full metrics for a segmentation. Latency, success and equilibrium figures
// are reported whenever at least one chain exists; utility and reward apply
// the feasibility indicators (at least one chain, deadline met).
inline MetricsReport compute_metrics(const Segmentation& seg, const Env& env,
                                     const MetricsOptions& opt = {}) {
    MetricsReport rep;
    const SfcSet sfcs = extract_sfcs(seg, env.trust, env.spec);
    rep.t_s = sfcs.chain_count();
    if (sfcs.empty()) return rep;

    rep.l_c = computation_latency(sfcs, env.physical, env.trust, env.spec, opt);
    rep.l_t = transmission_latency(sfcs, env.physical, env.trust, env.spec, opt);
    rep.l_s = rep.l_c + rep.l_t;
    rep.p_s = success_probability(sfcs, env.trust, env.spec, opt);
    rep.e_s = trust_equilibrium(seg, env.trust, env.spec.step_count(), rep.t_s);
    if (rep.l_s <= env.spec.deadline_s) {
        rep.u_u = utility(rep.l_s, rep.t_s, rep.p_s, rep.e_s, env.spec);
        rep.reward = rep.u_u;
    }
    return rep;
}

// Penalty-constrained training reward: utility gated by the feasibility
// indicators; exactly zero when no chain exists or the deadline is missed.
inline double reward(const Segmentation& seg, const Env& env) {
    return compute_metrics(seg, env).reward;
}

} // namespace microseg
