// Heuristic filters that prune the candidate graph before denoising, plus
// the structured agent decision they are parsed from. Rules only ever mark
// edges for removal; the temperature mechanism decides how strictly the
// marks are enforced.
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "microseg/common.hpp"
#include "microseg/network.hpp"
#include "microseg/rng.hpp"
#include "microseg/segmentation.hpp"
#include "microseg/service.hpp"

namespace microseg {

// Removes every edge incident to a node of an excluded type.
struct FunctionalFilter {
    std::set<int> excluded_types;
};
// Removes edges whose mutual trustworthiness falls below the threshold.
struct TrustThresholdFilter {
    double min_omega = 0.0;
};
// Removes edges incident to under-resourced nodes.
struct ResourceThresholdFilter {
    double min_compute_gflops = 0.0;
    double min_transmit_watt = 0.0;
};
// Removes edges whose endpoint types never appear consecutively in the
// allowed chain.
struct ChainFilter {
    std::vector<int> allowed_sequence;
};

using FilterRule =
    std::variant<FunctionalFilter, TrustThresholdFilter, ResourceThresholdFilter, ChainFilter>;

struct FilterSet {
    std::vector<FilterRule> rules;
    double temperature = 1.0;  // phi: probability that a marked edge is removed
};

// Deterministic marking pass: the union of all rules' marks, as an m*m mask.
inline std::vector<std::uint8_t> mark_edges(const FilterSet& filters, const TrustGraph& trust,
                                            const PhysicalGraph& physical) {
    const int m = trust.node_count();
    std::vector<std::uint8_t> marked(static_cast<std::size_t>(m) * m, 0);
    auto mark = [&](int i, int j) {
        marked[static_cast<std::size_t>(i) * m + j] = 1;
        marked[static_cast<std::size_t>(j) * m + i] = 1;
    };
    for (const auto& rule : filters.rules) {
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                if (!trust.has_edge(i, j)) continue;
                if (const auto* f = std::get_if<FunctionalFilter>(&rule)) {
                    if (f->excluded_types.count(trust.role(i)) ||
                        f->excluded_types.count(trust.role(j)))
                        mark(i, j);
                } else if (const auto* tr = std::get_if<TrustThresholdFilter>(&rule)) {
                    if (trust.omega(i, j) < tr->min_omega) mark(i, j);
                } else if (const auto* rs = std::get_if<ResourceThresholdFilter>(&rule)) {
                    auto poor = [&](int v) {
                        const auto& nd = physical.node(trust.physical_id(v));
                        return nd.compute_gflops < rs->min_compute_gflops ||
                               nd.transmit_watt < rs->min_transmit_watt;
                    };
                    if (poor(i) || poor(j)) mark(i, j);
                } else if (const auto* cf = std::get_if<ChainFilter>(&rule)) {
                    bool allowed = false;
                    for (std::size_t k = 0; k + 1 < cf->allowed_sequence.size(); ++k) {
                        const int a = cf->allowed_sequence[k];
                        const int b = cf->allowed_sequence[k + 1];
                        const int ri = trust.role(i), rj = trust.role(j);
                        if ((ri == a && rj == b) || (ri == b && rj == a)) {
                            allowed = true;
                            break;
                        }
                    }
                    if (!allowed) mark(i, j);
                }
            }
        }
    }
    return marked;
}

// Temperature draw: each marked edge is independently removed with
// probability phi. Returns the removal mask for one trajectory.
inline std::vector<std::uint8_t> draw_removals(const std::vector<std::uint8_t>& marked, int m,
                                               double phi, Rng& rng) {
    std::vector<std::uint8_t> removed(static_cast<std::size_t>(m) * m, 0);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (!marked[static_cast<std::size_t>(i) * m + j]) continue;
            if (phi >= 1.0 || (phi > 0.0 && rng.bernoulli(phi))) {
                removed[static_cast<std::size_t>(i) * m + j] = 1;
                removed[static_cast<std::size_t>(j) * m + i] = 1;
            }
        }
    }
    return removed;
}

// Forces removed edges to Unselected. Never adds Selected edges.
inline Segmentation apply_filters(const Segmentation& gt, const FilterSet& filters,
                                  const TrustGraph& trust, const PhysicalGraph& physical,
                                  Rng& rng) {
    require(gt.m() == trust.node_count(), "segmentation and trust graph disagree on node count");
    const auto marked = mark_edges(filters, trust, physical);
    const auto removed = draw_removals(marked, gt.m(), filters.temperature, rng);
    Segmentation out = gt;
    for (int i = 0; i < gt.m(); ++i)
        for (int j = i + 1; j < gt.m(); ++j)
            if (removed[static_cast<std::size_t>(i) * gt.m() + j])
                out.set(i, j, EdgeState::Unselected);
    return out;
}

// Structured agent decision. Keys: Function (type list), Trust (threshold
// list), Resource (pairs of [compute, transmit]), Chain (type sequence).
struct AgentDecision {
    std::vector<int> function_types;
    std::vector<double> trust_thresholds;
    std::vector<std::pair<double, double>> resource_thresholds;
    std::vector<int> chain;
    std::string raw;

    FilterSet to_filters(double temperature) const {
        FilterSet fs;
        fs.temperature = temperature;
        if (!function_types.empty())
            fs.rules.push_back(
                FunctionalFilter{std::set<int>(function_types.begin(), function_types.end())});
        for (double t : trust_thresholds) fs.rules.push_back(TrustThresholdFilter{t});
        for (const auto& [c, w] : resource_thresholds)
            fs.rules.push_back(ResourceThresholdFilter{c, w});
        if (!chain.empty()) fs.rules.push_back(ChainFilter{chain});
        return fs;
    }
};

class DecisionParseError : public std::runtime_error {
public:
    DecisionParseError(const std::string& msg, std::string raw)
        : std::runtime_error(msg), raw_text(std::move(raw)) {}
    std::string raw_text;
};

// Strict schema validation of an agent reply. Unknown keys and out-of-range
// thresholds reject the whole decision.
inline AgentDecision parse_decision(const std::string& raw) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
        throw DecisionParseError(std::string("decision is not valid JSON: ") + e.what(), raw);
    }
    if (!j.is_object()) throw DecisionParseError("decision must be a JSON object", raw);
    AgentDecision d;
    d.raw = raw;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "Function") {
                for (const auto& v : value) {
                    const int t = v.get<int>();
                    if (t < 1) throw DecisionParseError("type index must be >= 1", raw);
                    d.function_types.push_back(t);
                }
            } else if (key == "Trust") {
                for (const auto& v : value) {
                    const double t = v.get<double>();
                    if (t < 0.0 || t > 1.0)
                        throw DecisionParseError("trust threshold outside [0,1]", raw);
                    d.trust_thresholds.push_back(t);
                }
            } else if (key == "Resource") {
                for (const auto& v : value) {
                    if (!v.is_array() || v.size() != 2)
                        throw DecisionParseError("resource entries are [compute, transmit]", raw);
                    const double c = v[0].get<double>();
                    const double w = v[1].get<double>();
                    if (c < 0.0 || w < 0.0)
                        throw DecisionParseError("resource thresholds must be >= 0", raw);
                    d.resource_thresholds.emplace_back(c, w);
                }
            } else if (key == "Chain") {
                for (const auto& v : value) {
                    const int t = v.get<int>();
                    if (t < 1) throw DecisionParseError("type index must be >= 1", raw);
                    d.chain.push_back(t);
                }
            } else {
                throw DecisionParseError("unknown decision key: " + key, raw);
            }
        } catch (const nlohmann::json::exception& e) {
            throw DecisionParseError(std::string("malformed value for ") + key + ": " + e.what(),
                                     raw);
        }
    }
    return d;
}

// Deterministic rule-based filter generation: exclude types the service
// never uses, keep only consecutive chain pairs, and drop low-trust edges.
inline FilterSet generate_rule_filters(const TrustGraph& trust, const ServiceSpec& spec,
                                       double trust_threshold, double temperature) {
    std::set<int> present, used;
    for (int i = 0; i < trust.node_count(); ++i) present.insert(trust.role(i));
    for (const auto& s : spec.steps) used.insert(s.type);
    std::set<int> excluded;
    for (int t : present)
        if (!used.count(t)) excluded.insert(t);
    FilterSet fs;
    fs.temperature = temperature;
    fs.rules.push_back(FunctionalFilter{excluded});
    fs.rules.push_back(ChainFilter{spec.type_sequence()});
    fs.rules.push_back(TrustThresholdFilter{trust_threshold});
    return fs;
}

} // namespace microseg
