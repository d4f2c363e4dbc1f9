// Hierarchical network model: physical layer, trust layer, layer fusion and
// trust events. Graph objects are immutable after construction; mutating
// operations return new instances so they can be shared across samplers.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "microseg/common.hpp"

namespace microseg {

struct PhysicalNode {
    double x = 0.0;               // meters
    double y = 0.0;               // meters
    double compute_gflops = 0.0;  // computing power c(v)
    double transmit_watt = 0.0;   // transmission power
};

// Directed physical layer. Distances are precomputed for all ordered pairs.
class PhysicalGraph {
public:
    static PhysicalGraph build(std::vector<PhysicalNode> nodes) {
        require(!nodes.empty(), "physical graph needs at least one node");
        for (const auto& nd : nodes) {
            require(is_finite(nd.x) && is_finite(nd.y), "node position must be finite");
            require(nd.compute_gflops > 0.0, "compute power must be positive");
            require(nd.transmit_watt > 0.0, "transmit power must be positive");
        }
        PhysicalGraph g;
        g.nodes_ = std::move(nodes);
        const int n = static_cast<int>(g.nodes_.size());
        g.dist_.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double dx = g.nodes_[i].x - g.nodes_[j].x;
                const double dy = g.nodes_[i].y - g.nodes_[j].y;
                g.dist_[static_cast<std::size_t>(i) * n + j] = std::sqrt(dx * dx + dy * dy);
            }
        }
        return g;
    }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const PhysicalNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    double distance(int i, int j) const {
        return dist_.at(static_cast<std::size_t>(i) * nodes_.size() + j);
    }

private:
    std::vector<PhysicalNode> nodes_;
    std::vector<double> dist_;
};

// Undirected trust layer over a subset of the physical nodes. Trust values
// are stored, never recomputed: whatever the scheme wrote is what is read.
class TrustGraph {
public:
    struct Edge {
        int a = 0;  // physical node id
        int b = 0;  // physical node id
        double omega = 0.0;
    };

    static TrustGraph build(std::vector<int> node_ids, std::vector<int> roles,
                            const std::vector<Edge>& edges) {
        require(node_ids.size() == roles.size(), "one role per trust node");
        TrustGraph g;
        g.node_ids_ = std::move(node_ids);
        g.roles_ = std::move(roles);
        for (std::size_t i = 0; i < g.node_ids_.size(); ++i) {
            require(g.roles_[i] >= 1, "role indices start at 1");
            g.index_[g.node_ids_[i]] = static_cast<int>(i);
        }
        require(g.index_.size() == g.node_ids_.size(), "duplicate trust node id");
        const int m = g.node_count();
        g.trust_.assign(static_cast<std::size_t>(m) * m, -1.0);
        for (const auto& e : edges) {
            require(e.a != e.b, "self trust edge not allowed");
            g.set_trust_by_id(e.a, e.b, e.omega);
        }
        return g;
    }

    int node_count() const { return static_cast<int>(node_ids_.size()); }
    int physical_id(int local) const { return node_ids_.at(static_cast<std::size_t>(local)); }
    int role(int local) const { return roles_.at(static_cast<std::size_t>(local)); }
    const std::vector<int>& node_ids() const { return node_ids_; }

    int local_index(int physical_id) const {
        auto it = index_.find(physical_id);
        require(it != index_.end(), "unknown trust node id " + std::to_string(physical_id));
        return it->second;
    }
    bool contains(int physical_id) const { return index_.count(physical_id) > 0; }

    bool has_edge(int i, int j) const {
        return i != j && trust_[flat(i, j)] >= 0.0;
    }
    double omega(int i, int j) const {
        const double w = trust_[flat(i, j)];
        require(w >= 0.0, "no trust edge between requested nodes");
        return w;
    }
    int edge_count() const {
        int c = 0;
        const int m = node_count();
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                if (has_edge(i, j)) ++c;
        return c;
    }

    // Local-index neighbor list over trust edges.
    std::vector<int> neighbors(int i) const {
        std::vector<int> out;
        for (int j = 0; j < node_count(); ++j)
            if (j != i && has_edge(i, j)) out.push_back(j);
        return out;
    }

    void set_trust_by_id(int id_a, int id_b, double omega) {
        const int i = local_index(id_a);
        const int j = local_index(id_b);
        require(omega >= 0.0 && omega <= 1.0, "trust value outside [0,1]");
        trust_[flat(i, j)] = omega;
        trust_[flat(j, i)] = omega;
    }

private:
    std::size_t flat(int i, int j) const {
        return static_cast<std::size_t>(i) * node_ids_.size() + j;
    }

    std::vector<int> node_ids_;
    std::vector<int> roles_;
    std::vector<double> trust_;  // m*m, negative where no edge
    std::map<int, int> index_;   // physical id -> local index
};

struct RemoveNode {
    int node_id = 0;  // physical id
};
struct TrustDelta {
    int a = 0;  // physical id
    int b = 0;  // physical id
    double delta = 0.0;
};
using TrustEvent = std::variant<RemoveNode, TrustDelta>;

// Returns a new graph with the event applied; deltas clamp to [0,1].
inline TrustGraph apply_trust_event(const TrustGraph& g, const TrustEvent& event) {
    if (const auto* rm = std::get_if<RemoveNode>(&event)) {
        const int gone = g.local_index(rm->node_id);
        std::vector<int> ids, roles;
        for (int i = 0; i < g.node_count(); ++i) {
            if (i == gone) continue;
            ids.push_back(g.physical_id(i));
            roles.push_back(g.role(i));
        }
        std::vector<TrustGraph::Edge> edges;
        for (int i = 0; i < g.node_count(); ++i) {
            if (i == gone) continue;
            for (int j = i + 1; j < g.node_count(); ++j) {
                if (j == gone || !g.has_edge(i, j)) continue;
                edges.push_back({g.physical_id(i), g.physical_id(j), g.omega(i, j)});
            }
        }
        return TrustGraph::build(std::move(ids), std::move(roles), edges);
    }
    const auto& d = std::get<TrustDelta>(event);
    const int i = g.local_index(d.a);
    const int j = g.local_index(d.b);
    require(g.has_edge(i, j), "trust delta on nonexistent edge");
    TrustGraph out = g;
    out.set_trust_by_id(d.a, d.b, std::clamp(g.omega(i, j) + d.delta, 0.0, 1.0));
    return out;
}

// Fused conditioning features for the denoiser (node channels: x, y, compute,
// transmit, role; edge channels: distance, trust). Min-max normalized per
// channel; constant channels map to zero.
struct ConditionTensor {
    static constexpr int kNodeChannels = 5;
    static constexpr int kEdgeChannels = 2;

    int m = 0;
    std::vector<double> node_features;  // m x 5
    std::vector<double> edge_features;  // m x m x 2

    double node_at(int i, int c) const { return node_features[i * kNodeChannels + c]; }
    double edge_at(int i, int j, int c) const {
        return edge_features[(static_cast<std::size_t>(i) * m + j) * kEdgeChannels + c];
    }
};

namespace detail {
inline void minmax_normalize(std::vector<double>& data, int stride, int channel) {
    double lo = data[channel], hi = data[channel];
    for (std::size_t k = channel; k < data.size(); k += stride) {
        lo = std::min(lo, data[k]);
        hi = std::max(hi, data[k]);
    }
    const double span = hi - lo;
    for (std::size_t k = channel; k < data.size(); k += stride) {
        data[k] = span > 0.0 ? (data[k] - lo) / span : 0.0;
    }
}
} // namespace detail

// Filters the physical layer down to the trust nodes and concatenates both
// layers' features into the conditioning tensor.
inline ConditionTensor fuse_layers(const PhysicalGraph& physical, const TrustGraph& trust) {
    const int m = trust.node_count();
    for (int i = 0; i < m; ++i) {
        require(trust.physical_id(i) >= 0 && trust.physical_id(i) < physical.node_count(),
                "trust node absent from physical layer");
    }
    ConditionTensor out;
    out.m = m;
    out.node_features.resize(static_cast<std::size_t>(m) * ConditionTensor::kNodeChannels);
    out.edge_features.assign(
        static_cast<std::size_t>(m) * m * ConditionTensor::kEdgeChannels, 0.0);
    for (int i = 0; i < m; ++i) {
        const auto& nd = physical.node(trust.physical_id(i));
        double* row = &out.node_features[static_cast<std::size_t>(i) * 5];
        row[0] = nd.x;
        row[1] = nd.y;
        row[2] = nd.compute_gflops;
        row[3] = nd.transmit_watt;
        row[4] = static_cast<double>(trust.role(i));
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const std::size_t base = (static_cast<std::size_t>(i) * m + j) * 2;
            out.edge_features[base] =
                physical.distance(trust.physical_id(i), trust.physical_id(j));
            out.edge_features[base + 1] = trust.has_edge(i, j) ? trust.omega(i, j) : 0.0;
        }
    }
    for (int c = 0; c < ConditionTensor::kNodeChannels; ++c)
        detail::minmax_normalize(out.node_features, ConditionTensor::kNodeChannels, c);
    for (int c = 0; c < ConditionTensor::kEdgeChannels; ++c)
        detail::minmax_normalize(out.edge_features, ConditionTensor::kEdgeChannels, c);
    return out;
}

// Pluggable mutual-trust scheme. The trust graph stores whatever the active
// scheme produced; swapping schemes never silently rewrites stored values.
class TrustScheme {
public:
    virtual ~TrustScheme() = default;
    // Mutual trust for a pair of physical node ids, in [0,1]; symmetric.
    virtual double evaluate(int a, int b) const = 0;
};

// Default scheme: a static table seeded from the scenario, with a
// reputation-style exponential update hook.
class StaticTrustTable : public TrustScheme {
public:
    explicit StaticTrustTable(double smoothing = 0.2) : smoothing_(smoothing) {}

    void seed(int a, int b, double omega) {
        require(omega >= 0.0 && omega <= 1.0, "trust value outside [0,1]");
        table_[key(a, b)] = omega;
    }

    double evaluate(int a, int b) const override {
        auto it = table_.find(key(a, b));
        require(it != table_.end(), "no trust record for node pair");
        return it->second;
    }

    // Reputation update: move the stored value toward the observed outcome.
    void record_interaction(int a, int b, double outcome) {
        require(outcome >= 0.0 && outcome <= 1.0, "interaction outcome outside [0,1]");
        auto it = table_.find(key(a, b));
        require(it != table_.end(), "no trust record for node pair");
        it->second = std::clamp((1.0 - smoothing_) * it->second + smoothing_ * outcome, 0.0, 1.0);
    }

private:
    static std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

    double smoothing_;
    std::map<std::pair<int, int>, double> table_;
};

} // namespace microseg
