#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "microseg/filters.hpp"
#include "microseg/llm_client.hpp"
#include "microseg/scenario.hpp"

using namespace microseg;

namespace {

Env four_type_env() { return make_env(nine_node_aigc()); }

} // namespace

TEST(RuleFilters, ExcludesUnusedTypes) {
    const Env env = four_type_env();
    const FilterSet fs = generate_rule_filters(env.trust, env.spec, 0.2, 1.0);
    ASSERT_GE(fs.rules.size(), 3u);
    const auto* fn = std::get_if<FunctionalFilter>(&fs.rules[0]);
    ASSERT_NE(fn, nullptr);
    EXPECT_EQ(fn->excluded_types, std::set<int>{4});
    const auto* chain = std::get_if<ChainFilter>(&fs.rules[1]);
    ASSERT_NE(chain, nullptr);
    EXPECT_EQ(chain->allowed_sequence, (std::vector<int>{1, 2, 3}));
}

TEST(RuleFilters, NoExclusionWhenAllTypesUsed) {
    Env env = four_type_env();
    env.spec.steps.push_back({4, 50, 5, 1e6, 0.4, 0.1});
    const FilterSet fs = generate_rule_filters(env.trust, env.spec, 0.2, 1.0);
    const auto* fn = std::get_if<FunctionalFilter>(&fs.rules[0]);
    ASSERT_NE(fn, nullptr);
    EXPECT_TRUE(fn->excluded_types.empty());
}

TEST(ParseDecision, AcceptsCanonicalExample) {
    const auto d = parse_decision(R"({"Function": [4], "Trust": [0.2], "Chain": [1, 2, 3]})");
    EXPECT_EQ(d.function_types, std::vector<int>{4});
    EXPECT_EQ(d.trust_thresholds, std::vector<double>{0.2});
    EXPECT_EQ(d.chain, (std::vector<int>{1, 2, 3}));
    const FilterSet fs = d.to_filters(1.0);
    EXPECT_EQ(fs.rules.size(), 3u);
}

TEST(ParseDecision, RejectsBadInput) {
    EXPECT_THROW(parse_decision(R"({"Trust":[1.5]})"), DecisionParseError);
    EXPECT_THROW(parse_decision(""), DecisionParseError);
    EXPECT_THROW(parse_decision(R"({"Firewall":[1]})"), DecisionParseError);
    EXPECT_THROW(parse_decision(R"({"Resource":[[1]]})"), DecisionParseError);
    EXPECT_THROW(parse_decision(R"([1,2,3])"), DecisionParseError);
    try {
        parse_decision("not json at all");
        FAIL();
    } catch (const DecisionParseError& e) {
        EXPECT_EQ(e.raw_text, "not json at all");
    }
}

TEST(ParseDecision, ResourcePairs) {
    const auto d = parse_decision(R"({"Resource": [[50, 20], [90, 40]]})");
    ASSERT_EQ(d.resource_thresholds.size(), 2u);
    EXPECT_DOUBLE_EQ(d.resource_thresholds[0].first, 50.0);
    EXPECT_DOUBLE_EQ(d.resource_thresholds[1].second, 40.0);
}

TEST(ApplyFilters, HardTrustThresholdRemovesEdge) {
    const Env env = four_type_env();
    Segmentation seg(env.trust.node_count());
    const int a = 0, b = 7;  // omega(0,7) = 0.2
    ASSERT_TRUE(env.trust.has_edge(a, b));
    seg.set(a, b, EdgeState::Selected);
    FilterSet fs;
    fs.temperature = 1.0;
    fs.rules.push_back(TrustThresholdFilter{0.5});
    Rng rng(1);
    const auto out = apply_filters(seg, fs, env.trust, env.physical, rng);
    EXPECT_FALSE(out.selected(a, b));
}

TEST(ApplyFilters, ZeroTemperatureIsIdentity) {
    const Env env = four_type_env();
    Segmentation seg = [&] {
        Segmentation s(env.trust.node_count());
        for (int i = 0; i < s.m(); ++i)
            for (int j = i + 1; j < s.m(); ++j)
                if (env.trust.has_edge(i, j)) s.set(i, j, EdgeState::Selected);
        return s;
    }();
    FilterSet fs;
    fs.temperature = 0.0;
    fs.rules.push_back(TrustThresholdFilter{1.0});
    Rng rng(2);
    const auto out = apply_filters(seg, fs, env.trust, env.physical, rng);
    EXPECT_TRUE(out == seg);
}

TEST(ApplyFilters, TemperatureBinomialFrequency) {
    const Env env = four_type_env();
    Segmentation seg(env.trust.node_count());
    seg.set(0, 7, EdgeState::Selected);
    FilterSet fs;
    fs.temperature = 0.5;
    fs.rules.push_back(TrustThresholdFilter{0.25});  // marks the 0.2 edge only
    Rng rng(3);
    int removed = 0;
    const int trials = 10000;
    for (int s = 0; s < trials; ++s) {
        const auto out = apply_filters(seg, fs, env.trust, env.physical, rng);
        if (!out.selected(0, 7)) ++removed;
    }
    const double freq = removed / static_cast<double>(trials);
    const double sigma = std::sqrt(0.25 / trials);
    EXPECT_NEAR(freq, 0.5, 3 * sigma);
}

TEST(ApplyFilters, MonotonePruning) {
    const Env env = four_type_env();
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Segmentation seg(env.trust.node_count());
        for (int i = 0; i < seg.m(); ++i)
            for (int j = i + 1; j < seg.m(); ++j)
                if (env.trust.has_edge(i, j) && rng.bernoulli(0.6))
                    seg.set(i, j, EdgeState::Selected);
        FilterSet fs;
        fs.temperature = rng.uniform();
        fs.rules.push_back(TrustThresholdFilter{rng.uniform()});
        fs.rules.push_back(FunctionalFilter{{4}});
        fs.rules.push_back(ResourceThresholdFilter{50.0, 20.0});
        fs.rules.push_back(ChainFilter{{1, 2, 3}});
        const auto out = apply_filters(seg, fs, env.trust, env.physical, rng);
        for (int i = 0; i < seg.m(); ++i)
            for (int j = i + 1; j < seg.m(); ++j)
                if (out.selected(i, j)) EXPECT_TRUE(seg.selected(i, j));
    }
}

TEST(MarkEdges, RuleSemantics) {
    const Env env = four_type_env();
    const int m = env.trust.node_count();

    FilterSet functional;
    functional.rules.push_back(FunctionalFilter{{4}});
    const auto marks_fn = mark_edges(functional, env.trust, env.physical);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (env.trust.has_edge(i, j))
                EXPECT_EQ(static_cast<bool>(marks_fn[static_cast<std::size_t>(i) * m + j]),
                          env.trust.role(i) == 4 || env.trust.role(j) == 4);

    FilterSet chain;
    chain.rules.push_back(ChainFilter{{1, 2, 3}});
    const auto marks_chain = mark_edges(chain, env.trust, env.physical);
    // Edge 0-2 is a (1,2) pair: allowed. Edge 0-5 is (1,3): not consecutive.
    EXPECT_FALSE(marks_chain[0 * static_cast<std::size_t>(m) + 2]);
    EXPECT_TRUE(marks_chain[0 * static_cast<std::size_t>(m) + 5]);

    // Marking is deterministic.
    EXPECT_EQ(marks_chain, mark_edges(chain, env.trust, env.physical));
}

TEST(FilterAgent, RuleBackendIsPure) {
    const Env env = four_type_env();
    FilterAgent agent;
    agent.rule_trust_threshold = env.spec.steps[0].threshold_mean;
    const FilterSet a = agent.generate(env);
    const FilterSet b = agent.generate(env);
    ASSERT_EQ(a.rules.size(), b.rules.size());
    EXPECT_EQ(mark_edges(a, env.trust, env.physical), mark_edges(b, env.trust, env.physical));
}

namespace {

struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit LocalServer(const std::string& reply_content, int status = 200) {
        server.Post("/v1/chat/completions",
                    [reply_content, status](const httplib::Request&, httplib::Response& res) {
                        if (status != 200) {
                            res.status = status;
                            return;
                        }
                        nlohmann::json body{
                            {"choices",
                             {{{"message", {{"role", "assistant"}, {"content", reply_content}}}}}}};
                        res.set_content(body.dump(), "application/json");
                    });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
};

} // namespace

TEST(FilterAgent, ParsesLlmDecision) {
    LocalServer srv(R"({"Function": [4], "Trust": [0.2], "Chain": [1, 2, 3]})");
    LlmConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(srv.port);
    FilterAgent agent(cfg);
    const Env env = four_type_env();
    const FilterSet fs = agent.generate(env);
    ASSERT_EQ(fs.rules.size(), 3u);
    EXPECT_NE(std::get_if<FunctionalFilter>(&fs.rules[0]), nullptr);
    EXPECT_NE(std::get_if<TrustThresholdFilter>(&fs.rules[1]), nullptr);
    EXPECT_NE(std::get_if<ChainFilter>(&fs.rules[2]), nullptr);
}

TEST(FilterAgent, FallsBackOnGarbageReply) {
    LocalServer srv("here are my filters: remove type 4!");
    LlmConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(srv.port);
    FilterAgent agent(cfg);
    const Env env = four_type_env();
    const FilterSet fs = agent.generate(env);
    // Rule backend shape: Functional + Chain + TrustThreshold.
    ASSERT_EQ(fs.rules.size(), 3u);
    const auto* fn = std::get_if<FunctionalFilter>(&fs.rules[0]);
    ASSERT_NE(fn, nullptr);
    EXPECT_EQ(fn->excluded_types, std::set<int>{4});
}

TEST(FilterAgent, FallsBackOnTransportFailure) {
    LlmConfig cfg;
    cfg.endpoint = "http://127.0.0.1:9";  // nothing listens here
    cfg.timeout_seconds = 1;
    FilterAgent agent(cfg);
    const Env env = four_type_env();
    const FilterSet fs = agent.generate(env);
    ASSERT_EQ(fs.rules.size(), 3u);
}
