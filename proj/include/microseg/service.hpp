// Service request description: the ordered step types with their complexity,
// bandwidth and trust-threshold statistics, plus channel and utility weights.
#pragma once

#include <vector>

#include "microseg/common.hpp"

namespace microseg {

struct ServiceStep {
    int type = 1;                   // service-provider type handling this step
    double complexity_mean = 0.0;   // GFLOP
    double complexity_std = 0.0;    // GFLOP
    double bandwidth_bits = 0.0;    // size of the step's output transfer
    double threshold_mean = 0.0;    // trust threshold location, in [0,1]
    double threshold_std = 0.0;
};

struct ChannelParams {
    double bandwidth_hz = 1e6;          // W
    double path_loss_exponent = 2.0;    // gamma
    double noise_power = 1e-10;         // N0
};

struct UtilityWeights {
    double alpha1 = 1.0;  // latency (Weber-Fechner) term
    double alpha2 = 1.0;  // throughput term
    double alpha3 = 1.0;  // trust-equilibrium term
};

struct ServiceSpec {
    std::vector<ServiceStep> steps;
    double deadline_s = 1.0;   // L_max
    double arrival_rate = 1.0; // tasks/second, Poisson (Monte-Carlo mode only)
    ChannelParams channel;
    UtilityWeights weights;

    int step_count() const { return static_cast<int>(steps.size()); }

    std::vector<int> type_sequence() const {
        std::vector<int> seq;
        seq.reserve(steps.size());
        for (const auto& s : steps) seq.push_back(s.type);
        return seq;
    }

    void validate() const {
        require(!steps.empty(), "service needs at least one step");
        require(deadline_s > 0.0, "deadline must be positive");
        require(arrival_rate > 0.0, "arrival rate must be positive");
        require(channel.bandwidth_hz > 0.0 && channel.noise_power > 0.0,
                "channel parameters must be positive");
        require(weights.alpha1 >= 0.0 && weights.alpha2 >= 0.0 && weights.alpha3 >= 0.0,
                "utility weights must be non-negative");
        for (const auto& s : steps) {
            require(s.type >= 1, "step type indices start at 1");
            require(s.complexity_mean > 0.0, "step complexity mean must be positive");
            require(s.complexity_std >= 0.0, "complexity std must be non-negative");
            require(s.bandwidth_bits >= 0.0, "step bandwidth must be non-negative");
            require(s.threshold_mean >= 0.0 && s.threshold_mean <= 1.0,
                    "threshold mean must lie in [0,1]");
            require(s.threshold_std >= 0.0, "threshold std must be non-negative");
        }
    }
};

} // namespace microseg
