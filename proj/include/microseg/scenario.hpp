// Scenario files: the serializable description of a zero-trust network plus
// its service request. Ships one pinned nine-node four-type network and a
// seeded random profile; serialization is byte-deterministic.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "microseg/common.hpp"
#include "microseg/metrics.hpp"
#include "microseg/network.hpp"
#include "microseg/rng.hpp"
#include "microseg/service.hpp"

namespace microseg {

struct ScenarioNode {
    int id = 0;
    double x = 0.0, y = 0.0;
    double compute = 0.0, transmit = 0.0;
    int role = 1;
};

struct Scenario {
    std::string name;
    std::vector<ScenarioNode> nodes;
    std::vector<int> trust_nodes;            // empty = all nodes participate
    std::vector<TrustGraph::Edge> trust_edges;
    ServiceSpec service;
    double filter_trust_threshold = 0.2;     // rule-backend trust filter
};

inline Env make_env(const Scenario& sc) {
    std::vector<PhysicalNode> pn;
    pn.reserve(sc.nodes.size());
    for (const auto& nd : sc.nodes) {
        require(nd.id == static_cast<int>(pn.size()),
                "scenario node ids must be 0..n-1 in order");
        pn.push_back({nd.x, nd.y, nd.compute, nd.transmit});
    }
    PhysicalGraph physical = PhysicalGraph::build(std::move(pn));

    std::vector<int> ids = sc.trust_nodes;
    if (ids.empty())
        for (const auto& nd : sc.nodes) ids.push_back(nd.id);
    std::vector<int> roles;
    roles.reserve(ids.size());
    for (int id : ids) roles.push_back(sc.nodes.at(static_cast<std::size_t>(id)).role);
    TrustGraph trust = TrustGraph::build(std::move(ids), std::move(roles), sc.trust_edges);
    sc.service.validate();
    return Env{std::move(physical), std::move(trust), sc.service};
}

inline std::string serialize_scenario(const Scenario& sc) {
    nlohmann::ordered_json j;
    j["name"] = sc.name;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& nd : sc.nodes) {
        j["nodes"].push_back({{"id", nd.id},
                              {"x", nd.x},
                              {"y", nd.y},
                              {"compute", nd.compute},
                              {"transmit", nd.transmit},
                              {"role", nd.role}});
    }
    if (!sc.trust_nodes.empty()) j["trust_nodes"] = sc.trust_nodes;
    j["trust_edges"] = nlohmann::ordered_json::array();
    for (const auto& e : sc.trust_edges)
        j["trust_edges"].push_back({{"a", e.a}, {"b", e.b}, {"omega", e.omega}});
    j["service"] = {{"deadline_s", sc.service.deadline_s},
                    {"arrival_rate", sc.service.arrival_rate},
                    {"steps", nlohmann::ordered_json::array()}};
    for (const auto& st : sc.service.steps) {
        j["service"]["steps"].push_back({{"type", st.type},
                                         {"complexity_mean", st.complexity_mean},
                                         {"complexity_std", st.complexity_std},
                                         {"bandwidth_bits", st.bandwidth_bits},
                                         {"threshold_mean", st.threshold_mean},
                                         {"threshold_std", st.threshold_std}});
    }
    j["channel"] = {{"bandwidth_hz", sc.service.channel.bandwidth_hz},
                    {"path_loss_exponent", sc.service.channel.path_loss_exponent},
                    {"noise_power", sc.service.channel.noise_power}};
    j["weights"] = {{"alpha1", sc.service.weights.alpha1},
                    {"alpha2", sc.service.weights.alpha2},
                    {"alpha3", sc.service.weights.alpha3}};
    j["filter_trust_threshold"] = sc.filter_trust_threshold;
    return j.dump(2) + "\n";
}

inline Scenario parse_scenario(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
    }
    Scenario sc;
    try {
        sc.name = j.value("name", "scenario");
        for (const auto& nd : j.at("nodes")) {
            sc.nodes.push_back({nd.at("id").get<int>(), nd.at("x").get<double>(),
                                nd.at("y").get<double>(), nd.at("compute").get<double>(),
                                nd.at("transmit").get<double>(), nd.at("role").get<int>()});
        }
        if (j.contains("trust_nodes"))
            sc.trust_nodes = j.at("trust_nodes").get<std::vector<int>>();
        for (const auto& e : j.at("trust_edges")) {
            sc.trust_edges.push_back({e.at("a").get<int>(), e.at("b").get<int>(),
                                      e.at("omega").get<double>()});
        }
        const auto& sv = j.at("service");
        sc.service.deadline_s = sv.at("deadline_s").get<double>();
        sc.service.arrival_rate = sv.value("arrival_rate", 1.0);
        for (const auto& st : sv.at("steps")) {
            sc.service.steps.push_back({st.at("type").get<int>(),
                                        st.at("complexity_mean").get<double>(),
                                        st.at("complexity_std").get<double>(),
                                        st.at("bandwidth_bits").get<double>(),
                                        st.at("threshold_mean").get<double>(),
                                        st.at("threshold_std").get<double>()});
        }
        const auto& ch = j.at("channel");
        sc.service.channel = {ch.at("bandwidth_hz").get<double>(),
                              ch.at("path_loss_exponent").get<double>(),
                              ch.at("noise_power").get<double>()};
        const auto& w = j.at("weights");
        sc.service.weights = {w.at("alpha1").get<double>(), w.at("alpha2").get<double>(),
                              w.at("alpha3").get<double>()};
        sc.filter_trust_threshold = j.value("filter_trust_threshold", 0.2);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("scenario field missing or mistyped: ") + e.what());
    }
    sc.service.validate();
    return sc;
}

// The canonical desk-scale network: nine nodes covering four provider types
// (text generation, text-to-image, image-to-video, interactive enhancement),
// requesting the three-step video-creation service. All numbers are
// synthetic but chosen so every baseline can find feasible chains.
inline Scenario nine_node_aigc() {
    Scenario sc;
    sc.name = "nine_node_aigc";
    sc.nodes = {
        {0, 120.0, 180.0, 80.0, 30.0, 1}, {1, 640.0, 90.0, 75.0, 28.0, 1},
        {2, 300.0, 420.0, 85.0, 35.0, 2}, {3, 520.0, 360.0, 80.0, 30.0, 2},
        {4, 820.0, 300.0, 30.0, 15.0, 2}, {5, 260.0, 700.0, 95.0, 40.0, 3},
        {6, 700.0, 640.0, 35.0, 18.0, 3}, {7, 140.0, 520.0, 70.0, 30.0, 4},
        {8, 860.0, 560.0, 45.0, 20.0, 4},
    };
    sc.trust_edges = {
        {0, 2, 0.90}, {2, 5, 0.85},                                  // prime chain
        {1, 2, 0.45}, {0, 3, 0.72}, {3, 5, 0.72}, {1, 3, 0.75},      // alternates
        {1, 4, 0.60}, {4, 5, 0.40}, {2, 6, 0.60}, {3, 6, 0.70},
        {4, 6, 0.25},
        {0, 1, 0.55}, {0, 5, 0.35}, {0, 6, 0.20}, {1, 5, 0.30},      // cross noise
        {1, 6, 0.15}, {2, 3, 0.50}, {3, 4, 0.30}, {5, 6, 0.62},
        {0, 7, 0.72}, {2, 7, 0.20}, {3, 7, 0.35}, {5, 7, 0.65},      // type-4 noise
        {1, 8, 0.70}, {2, 8, 0.62}, {3, 8, 0.60}, {4, 8, 0.30},
        {6, 8, 0.20}, {7, 8, 0.50},
    };
    sc.service.steps = {
        {1, 60.0, 6.0, 2e6, 0.50, 0.15},
        {2, 120.0, 12.0, 8e6, 0.55, 0.15},
        {3, 200.0, 20.0, 1.2e7, 0.50, 0.15},
    };
    sc.service.deadline_s = 6.0;
    sc.service.arrival_rate = 2.0;
    sc.service.channel = {1e6, 2.5, 1e-10};
    sc.service.weights = {1.0, 1.0, 4.0};
    sc.filter_trust_threshold = 0.2;
    return sc;
}

// Seeded random scenario: m nodes over K types (round-robin roles so every
// type exists), trust edges drawn with the given density, and a service
// spanning types 1..min(K,3).
inline Scenario random_scenario(std::uint64_t seed, int m, int types, double density) {
    require(m >= 1 && types >= 1, "need at least one node and one type");
    require(density >= 0.0 && density <= 1.0, "density must lie in [0,1]");
    Rng rng = Rng::stream(seed, 0x5ce6a);
    Scenario sc;
    sc.name = "random_m" + std::to_string(m) + "_k" + std::to_string(types);
    for (int i = 0; i < m; ++i) {
        ScenarioNode nd;
        nd.id = i;
        nd.x = rng.uniform() * 500.0;
        nd.y = rng.uniform() * 500.0;
        nd.compute = 40.0 + rng.uniform() * 60.0;
        nd.transmit = 15.0 + rng.uniform() * 25.0;
        nd.role = 1 + i % types;
        sc.nodes.push_back(nd);
    }
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (rng.uniform() < density)
                sc.trust_edges.push_back({i, j, 0.2 + 0.75 * rng.uniform()});

    const int n_steps = std::min(types, 3);
    require(m >= n_steps, "scenario too small for the service");
    double expected_compute = 0.0;
    for (int t = 1; t <= n_steps; ++t) {
        ServiceStep st;
        st.type = t;
        st.complexity_mean = 50.0 + 40.0 * (t - 1);
        st.complexity_std = st.complexity_mean * 0.1;
        st.bandwidth_bits = 4e6;
        st.threshold_mean = 0.5;
        st.threshold_std = 0.15;
        sc.service.steps.push_back(st);
        expected_compute += st.complexity_mean;
    }
    // Generous deadline: pessimistic compute power plus transfer slack.
    sc.service.deadline_s = expected_compute / 40.0 + 1.0 * n_steps;
    sc.service.arrival_rate = 2.0;
    sc.service.channel = {1e6, 2.5, 1e-10};
    sc.service.weights = {1.0, 1.0, 4.0};
    return sc;
}

// Trustworthiness-update event at the scenario level: the node stays in the
// index space (so checkpoints and references still line up) but loses every
// trust edge, exactly as if the policy engine had expelled it.
inline Scenario isolate_node(Scenario sc, int node_id) {
    bool found = false;
    for (const auto& nd : sc.nodes) found = found || nd.id == node_id;
    require(found, "unknown node id " + std::to_string(node_id));
    std::vector<TrustGraph::Edge> kept;
    for (const auto& e : sc.trust_edges)
        if (e.a != node_id && e.b != node_id) kept.push_back(e);
    sc.trust_edges = std::move(kept);
    sc.name += "_trust_update";
    return sc;
}

// Service-upgrade event: append a step handled by a new provider type.
inline Scenario upgrade_service(Scenario sc, const ServiceStep& extra) {
    sc.service.steps.push_back(extra);
    sc.name += "_upgrade";
    return sc;
}

// The canonical upgrade used by the experiments: extend the three-step
// service with an interactive-enhancement (type-4) step.
inline ServiceStep type4_upgrade_step() { return {4, 80.0, 8.0, 6e6, 0.40, 0.15}; }

} // namespace microseg
