// Chat-completion client for the filter agent. Serializes the network
// context to a prompt, asks for the strict decision schema, and falls back
// to the deterministic rule engine on any transport or parse failure.
#pragma once

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "microseg/filters.hpp"
#include "microseg/metrics.hpp"

namespace microseg {

struct LlmConfig {
    std::string endpoint;            // e.g. http://host:port (empty = disabled)
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4";
    std::string token_env = "MICROSEG_LLM_TOKEN";
    int timeout_seconds = 10;
    int attempts = 2;
};

// Compact textual description of the environment for the prompt: node
// features, trust adjacency, the service request and the utility shape.
inline std::string describe_context(const Env& env) {
    std::ostringstream os;
    const auto& tr = env.trust;
    os << "Nodes (id, type, compute GFLOPS, transmit W):\n";
    for (int i = 0; i < tr.node_count(); ++i) {
        const auto& nd = env.physical.node(tr.physical_id(i));
        os << "  " << tr.physical_id(i) << ": type-" << tr.role(i) << ", "
           << fmt_double(nd.compute_gflops) << ", " << fmt_double(nd.transmit_watt) << "\n";
    }
    os << "Trust edges (i, j, omega):\n";
    for (int i = 0; i < tr.node_count(); ++i)
        for (int j = i + 1; j < tr.node_count(); ++j)
            if (tr.has_edge(i, j))
                os << "  " << tr.physical_id(i) << "-" << tr.physical_id(j) << ": "
                   << fmt_double(tr.omega(i, j)) << "\n";
    os << "Service steps (type sequence): ";
    for (std::size_t k = 0; k < env.spec.steps.size(); ++k)
        os << (k ? ", " : "") << env.spec.steps[k].type;
    os << "\nDeadline: " << fmt_double(env.spec.deadline_s) << " s\n";
    os << "Utility: success-probability weighted sum of log-latency margin, "
          "chain throughput and trust stability.\n";
    return os.str();
}

inline std::string decision_prompt(const Env& env) {
    std::ostringstream os;
    os << "You prune a candidate graph before a generative model selects a "
          "micro-segmentation that hosts service chains.\n"
       << describe_context(env)
       << "Reply with ONLY a JSON object choosing pruning filters. Schema:\n"
          "{\"Function\": [types to exclude], \"Trust\": [min edge trust], "
          "\"Resource\": [[min compute, min transmit]], \"Chain\": [allowed type sequence]}\n"
          "Omit keys you do not want to activate.";
    return os.str();
}

// Filter generation with the LLM backend. Returns the parsed decision's
// filters, or the rule-based set if the endpoint is disabled or fails.
class FilterAgent {
public:
    FilterAgent() = default;
    explicit FilterAgent(LlmConfig cfg) : cfg_(std::move(cfg)) {}

    double temperature = 1.0;
    double rule_trust_threshold = 0.2;

    FilterSet generate(const Env& env) const {
        if (cfg_ && !cfg_->endpoint.empty()) {
            if (auto fs = try_llm(env)) return *fs;
        }
        return generate_rule_filters(env.trust, env.spec, rule_trust_threshold, temperature);
    }

private:
    std::optional<FilterSet> try_llm(const Env& env) const {
        nlohmann::json body{
            {"model", cfg_->model},
            {"messages",
             {{{"role", "system"},
               {"content", "You are a network planning assistant. Answer with JSON only."}},
              {{"role", "user"}, {"content", decision_prompt(env)}}}}};
        httplib::Client client(cfg_->endpoint);
        client.set_connection_timeout(cfg_->timeout_seconds);
        client.set_read_timeout(cfg_->timeout_seconds);
        httplib::Headers headers;
        if (const char* token = std::getenv(cfg_->token_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + token);

        for (int attempt = 0; attempt < cfg_->attempts; ++attempt) {
            auto res = client.Post(cfg_->path, headers, body.dump(), "application/json");
            if (!res || res->status != 200) {
                std::cerr << "[filter-agent] request failed (attempt " << attempt + 1 << "/"
                          << cfg_->attempts << ")\n";
                continue;
            }
            try {
                const auto reply = nlohmann::json::parse(res->body);
                const std::string content =
                    reply.at("choices").at(0).at("message").at("content").get<std::string>();
                return parse_decision(content).to_filters(temperature);
            } catch (const DecisionParseError& e) {
                std::cerr << "[filter-agent] undecodable decision, falling back to rules: "
                          << e.what() << "\n";
                return std::nullopt;
            } catch (const nlohmann::json::exception& e) {
                std::cerr << "[filter-agent] malformed completion body: " << e.what() << "\n";
                return std::nullopt;
            }
        }
        std::cerr << "[filter-agent] endpoint unreachable, falling back to rules\n";
        return std::nullopt;
    }

    std::optional<LlmConfig> cfg_;
};

} // namespace microseg
