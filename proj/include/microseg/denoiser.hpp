// Graph-transformer denoiser: predicts the clean segmentation's per-edge
// category distribution from a noisy state, a timestep and the fused
// condition tensor. Attention scores are FiLM-modulated by edge embeddings;
// node and edge streams are FiLM-conditioned on the environment features,
// with residual connections and layer normalization. The network is
// permutation equivariant and size-agnostic: parameters never depend on m.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "microseg/autodiff.hpp"
#include "microseg/common.hpp"
#include "microseg/network.hpp"
#include "microseg/rng.hpp"
#include "microseg/schedule.hpp"
#include "microseg/segmentation.hpp"

namespace microseg {

struct DenoiserConfig {
    int layers = 3;
    int heads = 4;
    int head_dim = 16;
    int node_dim = 64;  // must equal heads * head_dim for the residual add
    int edge_dim = 16;
    int time_dim = 8;   // even
    // Smooth bound on output logit magnitude; keeps the per-edge
    // distributions away from exact point masses so score-function
    // gradients never vanish. 0 disables.
    double logit_cap = 4.0;

    void validate() const {
        require(layers >= 1 && heads >= 1 && head_dim >= 1 && edge_dim >= 1,
                "network dimensions must be positive");
        require(node_dim == heads * head_dim,
                "node_dim must equal heads*head_dim (residual path)");
        require(time_dim >= 2 && time_dim % 2 == 0, "time_dim must be even");
        require(logit_cap >= 0.0, "logit cap must be non-negative");
    }
};

// Flat parameter vector with named matrix views. Flat storage makes the SGD
// update, gradient accumulation and finite-difference probing trivial.
class ParamStore {
public:
    struct Entry {
        std::string name;
        int offset = 0;
        int rows = 0;
        int cols = 0;
    };

    int add(const std::string& name, int rows, int cols) {
        Entry e{name, static_cast<int>(flat.size()), rows, cols};
        index_[name] = static_cast<int>(entries.size());
        entries.push_back(e);
        flat.resize(flat.size() + static_cast<std::size_t>(rows) * cols, 0.0);
        return static_cast<int>(entries.size()) - 1;
    }

    const Entry& entry(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "unknown parameter " + name);
        return entries[static_cast<std::size_t>(it->second)];
    }

    ad::Tensor tensor(const Entry& e) const {
        ad::Tensor t(e.rows, e.cols);
        std::copy(flat.begin() + e.offset,
                  flat.begin() + e.offset + static_cast<std::ptrdiff_t>(t.size()),
                  t.v.begin());
        return t;
    }

    std::size_t size() const { return flat.size(); }

    std::vector<double> flat;
    std::vector<Entry> entries;

private:
    std::map<std::string, int> index_;
};

class DenoiseNet {
public:
    static DenoiseNet init(const DenoiserConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        DenoiseNet net;
        net.cfg_ = cfg;
        net.seed_ = seed;
        auto& p = net.params_;
        const int dn = cfg.node_dim, de = cfg.edge_dim, dk = cfg.head_dim;

        p.add("node_enc.w1", 1 + cfg.time_dim, dn);
        p.add("node_enc.b1", 1, dn);
        p.add("node_enc.w2", dn, dn);
        p.add("node_enc.b2", 1, dn);
        p.add("edge_enc.w1", kEdgeCategories, de);
        p.add("edge_enc.b1", 1, de);
        p.add("edge_enc.w2", de, de);
        p.add("edge_enc.b2", 1, de);
        for (int l = 0; l < cfg.layers; ++l) {
            const std::string L = "L" + std::to_string(l) + ".";
            for (int h = 0; h < cfg.heads; ++h) {
                const std::string H = L + "h" + std::to_string(h) + ".";
                p.add(H + "wq", dn, dk);
                p.add(H + "wk", dn, dk);
                p.add(H + "wv", dn, dk);
                p.add(H + "we", de, dk);
                p.add(H + "attn_scale_w", dk, 1);
                p.add(H + "attn_scale_b", 1, 1);
                p.add(H + "attn_shift_w", dk, 1);
                p.add(H + "attn_shift_b", 1, 1);
            }
            p.add(L + "node_film_scale_w", ConditionTensor::kNodeChannels, dn);
            p.add(L + "node_film_scale_b", 1, dn);
            p.add(L + "node_film_shift_w", ConditionTensor::kNodeChannels, dn);
            p.add(L + "node_film_shift_b", 1, dn);
            p.add(L + "edge_proj_w", cfg.heads, de);
            p.add(L + "edge_proj_b", 1, de);
            p.add(L + "edge_film_scale_w", ConditionTensor::kEdgeChannels, de);
            p.add(L + "edge_film_scale_b", 1, de);
            p.add(L + "edge_film_shift_w", ConditionTensor::kEdgeChannels, de);
            p.add(L + "edge_film_shift_b", 1, de);
            p.add(L + "node_ln_gain", 1, dn);
            p.add(L + "node_ln_bias", 1, dn);
            p.add(L + "edge_ln_gain", 1, de);
            p.add(L + "edge_ln_bias", 1, de);
        }
        p.add("edge_dec.w1", de, de);
        p.add("edge_dec.b1", 1, de);
        p.add("edge_dec.w2", de, kEdgeCategories);
        p.add("edge_dec.b2", 1, kEdgeCategories);

        Rng rng = Rng::stream(seed, 0x9e7);
        for (const auto& e : p.entries) {
            const bool is_bias = e.name.ends_with("_b") || e.name.ends_with(".b1") ||
                                 e.name.ends_with(".b2") || e.name.ends_with("_bias");
            const bool is_gain = e.name.ends_with("_gain");
            double* dst = &p.flat[static_cast<std::size_t>(e.offset)];
            const std::size_t cnt = static_cast<std::size_t>(e.rows) * e.cols;
            if (is_gain) {
                for (std::size_t i = 0; i < cnt; ++i) dst[i] = 1.0;
            } else if (is_bias) {
                for (std::size_t i = 0; i < cnt; ++i) dst[i] = 0.0;
            } else {
                const double bound = 1.0 / std::sqrt(static_cast<double>(e.rows));
                for (std::size_t i = 0; i < cnt; ++i)
                    dst[i] = (2.0 * rng.uniform() - 1.0) * bound;
            }
        }
        return net;
    }

    const DenoiserConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    void apply_update(std::span<const double> step) {
        require(step.size() == params_.flat.size(), "update size mismatch");
        for (std::size_t i = 0; i < step.size(); ++i) params_.flat[i] += step[i];
    }

    // Clean-graph prediction without gradients. Pairs outside `candidates`
    // (including the diagonal) get a point mass on Unselected.
    EdgeDistribution predict_clean(const Segmentation& gt, int t, const ConditionTensor& cond,
                                   const std::vector<std::uint8_t>& candidates) const {
        const int m = gt.m();
        require(cond.m == m, "condition tensor has wrong node count");
        ad::Tape tape(false);
        const int logits = forward(tape, gt, t, cond, candidates);
        const ad::Tensor& lv = tape.val(logits);
        EdgeDistribution out = EdgeDistribution::zeros(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (i == j || !candidates[static_cast<std::size_t>(i) * m + j]) {
                    out.p[(static_cast<std::size_t>(i) * m + j) * 2] = 1.0;
                    continue;
                }
                const double a = lv.at(i * m + j, 0);
                const double b = lv.at(i * m + j, 1);
                const double hi = std::max(a, b);
                const double ea = std::exp(a - hi), eb = std::exp(b - hi);
                out.p[(static_cast<std::size_t>(i) * m + j) * 2] = ea / (ea + eb);
                out.p[(static_cast<std::size_t>(i) * m + j) * 2 + 1] = eb / (ea + eb);
            }
        }
        return out;
    }

    // log p_theta(g0 | gt) summed over active unordered candidate pairs, and
    // coeff * its parameter gradient accumulated into grad_out.
    double logprob_backward(const Segmentation& gt, int t, const ConditionTensor& cond,
                            const std::vector<std::uint8_t>& active, const Segmentation& g0,
                            double coeff, std::span<double> grad_out) const {
        require(grad_out.size() == params_.flat.size(), "gradient buffer size mismatch");
        const int m = gt.m();
        ad::Tape tape(true);
        leaf_ids_.clear();
        const int logits = forward(tape, gt, t, cond, active);
        std::vector<int> targets(static_cast<std::size_t>(m) * m, 0);
        std::vector<double> weights(static_cast<std::size_t>(m) * m, 0.0);
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                if (!active[static_cast<std::size_t>(i) * m + j]) continue;
                targets[static_cast<std::size_t>(i) * m + j] = static_cast<int>(g0.at(i, j));
                weights[static_cast<std::size_t>(i) * m + j] = 1.0;
            }
        }
        const int loss = tape.weighted_logprob(logits, std::move(targets), std::move(weights));
        const double value = tape.val(loss).at(0, 0);
        if (coeff != 0.0) {
            tape.backward(loss, coeff);
            for (std::size_t e = 0; e < leaf_ids_.size(); ++e) {
                const auto& entry = params_.entries[e];
                const ad::Tensor& g = tape.grad(leaf_ids_[e]);
                double* dst = &grad_out[static_cast<std::size_t>(entry.offset)];
                for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.v[i];
            }
        }
        return value;
    }

    // Same readout as logprob_backward without touching gradients.
    double logprob(const Segmentation& gt, int t, const ConditionTensor& cond,
                   const std::vector<std::uint8_t>& active, const Segmentation& g0) const {
        const EdgeDistribution d = predict_clean(gt, t, cond, active);
        const int m = gt.m();
        double lp = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                if (active[static_cast<std::size_t>(i) * m + j])
                    lp += std::log(d.at(i, j, static_cast<int>(g0.at(i, j))));
        return lp;
    }

    void save(const std::string& path, int m_hint) const {
        std::ofstream f(path, std::ios::binary);
        require(f.good(), "cannot open checkpoint for writing: " + path);
        const char magic[8] = {'M', 'S', 'E', 'G', 'N', 'E', 'T', '1'};
        f.write(magic, 8);
        const std::int32_t meta[7] = {cfg_.layers, cfg_.heads,    cfg_.head_dim, cfg_.node_dim,
                                      cfg_.edge_dim, cfg_.time_dim, m_hint};
        f.write(reinterpret_cast<const char*>(meta), sizeof(meta));
        f.write(reinterpret_cast<const char*>(&cfg_.logit_cap), sizeof(double));
        const std::uint64_t seed = seed_;
        f.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
        const std::uint64_t count = params_.flat.size();
        f.write(reinterpret_cast<const char*>(&count), sizeof(count));
        f.write(reinterpret_cast<const char*>(params_.flat.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        require(f.good(), "checkpoint write failed: " + path);
    }

    static DenoiseNet load(const std::string& path, int* m_hint = nullptr) {
        std::ifstream f(path, std::ios::binary);
        require(f.good(), "cannot open checkpoint: " + path);
        char magic[8];
        f.read(magic, 8);
        require(f.good() && std::memcmp(magic, "MSEGNET1", 8) == 0,
                "not a denoiser checkpoint: " + path);
        std::int32_t meta[7];
        f.read(reinterpret_cast<char*>(meta), sizeof(meta));
        double logit_cap = 0.0;
        f.read(reinterpret_cast<char*>(&logit_cap), sizeof(logit_cap));
        std::uint64_t seed = 0, count = 0;
        f.read(reinterpret_cast<char*>(&seed), sizeof(seed));
        f.read(reinterpret_cast<char*>(&count), sizeof(count));
        DenoiserConfig cfg;
        cfg.layers = meta[0];
        cfg.heads = meta[1];
        cfg.head_dim = meta[2];
        cfg.node_dim = meta[3];
        cfg.edge_dim = meta[4];
        cfg.time_dim = meta[5];
        cfg.logit_cap = logit_cap;
        if (m_hint) *m_hint = meta[6];
        DenoiseNet net = init(cfg, seed);
        require(count == net.params_.flat.size(), "checkpoint parameter count mismatch");
        f.read(reinterpret_cast<char*>(net.params_.flat.data()),
               static_cast<std::streamsize>(count * sizeof(double)));
        require(f.good(), "truncated checkpoint: " + path);
        return net;
    }

private:
    int leaf(ad::Tape& tape, const std::string& name) const {
        const auto& e = params_.entry(name);
        const int id = tape.leaf(params_.tensor(e));
        if (tape.grad_enabled()) leaf_ids_.push_back(id);
        return id;
    }

    std::vector<double> time_embedding(int t) const {
        std::vector<double> emb(static_cast<std::size_t>(cfg_.time_dim));
        for (int i = 0; i < cfg_.time_dim / 2; ++i) {
            const double freq =
                std::pow(10000.0, -2.0 * i / static_cast<double>(cfg_.time_dim));
            emb[static_cast<std::size_t>(2 * i)] = std::sin(t * freq);
            emb[static_cast<std::size_t>(2 * i + 1)] = std::cos(t * freq);
        }
        return emb;
    }

    // Shared forward pass; returns the node id of the symmetrized edge
    // logits (m*m x 2). Leaf ids are recorded in declaration order so the
    // gradient can be scattered back into the flat parameter vector.
    int forward(ad::Tape& tape, const Segmentation& gt, int t, const ConditionTensor& cond,
                const std::vector<std::uint8_t>& attn_candidates) const {
        const int m = gt.m();
        require(t >= 0, "negative timestep");
        require(static_cast<int>(attn_candidates.size()) == m * m, "candidate mask size");

        // When grads are on, every parameter registers as a leaf in
        // declaration order, whether or not this m uses it.
        std::map<std::string, int> ids;
        if (tape.grad_enabled()) {
            for (const auto& e : params_.entries) ids[e.name] = leaf(tape, e.name);
        } else {
            for (const auto& e : params_.entries) ids[e.name] = tape.leaf(params_.tensor(e));
        }

        // Node inputs: constant one-hot (single node category) + timestep.
        const auto temb = time_embedding(t);
        ad::Tensor xn(m, 1 + cfg_.time_dim);
        for (int i = 0; i < m; ++i) {
            xn.at(i, 0) = 1.0;
            for (int k = 0; k < cfg_.time_dim; ++k)
                xn.at(i, 1 + k) = temb[static_cast<std::size_t>(k)];
        }
        ad::Tensor xe(m * m, kEdgeCategories);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                xe.at(i * m + j, static_cast<int>(gt.at(i, j))) = 1.0;

        ad::Tensor cn(m, ConditionTensor::kNodeChannels);
        std::copy(cond.node_features.begin(), cond.node_features.end(), cn.v.begin());
        ad::Tensor ce(m * m, ConditionTensor::kEdgeChannels);
        std::copy(cond.edge_features.begin(), cond.edge_features.end(), ce.v.begin());

        const int xn_id = tape.leaf(std::move(xn));
        const int xe_id = tape.leaf(std::move(xe));
        const int cn_id = tape.leaf(std::move(cn));
        const int ce_id = tape.leaf(std::move(ce));

        int hn = tape.linear(
            tape.silu(tape.linear(xn_id, ids["node_enc.w1"], ids["node_enc.b1"])),
            ids["node_enc.w2"], ids["node_enc.b2"]);
        int he = tape.linear(
            tape.silu(tape.linear(xe_id, ids["edge_enc.w1"], ids["edge_enc.b1"])),
            ids["edge_enc.w2"], ids["edge_enc.b2"]);

        const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim));
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string L = "L" + std::to_string(l) + ".";
            std::vector<int> head_agg, head_scores;
            for (int h = 0; h < cfg_.heads; ++h) {
                const std::string H = L + "h" + std::to_string(h) + ".";
                const int q = tape.matmul(hn, ids[H + "wq"]);
                const int k = tape.matmul(hn, ids[H + "wk"]);
                const int v = tape.matmul(hn, ids[H + "wv"]);
                const int eh = tape.matmul(he, ids[H + "we"]);
                const int score = tape.scale_const(tape.matmul_nt(q, k), inv_sqrt_dk);
                const int gma = tape.reshape(
                    tape.linear(eh, ids[H + "attn_scale_w"], ids[H + "attn_scale_b"]), m, m);
                const int bta = tape.reshape(
                    tape.linear(eh, ids[H + "attn_shift_w"], ids[H + "attn_shift_b"]), m, m);
                const int shat = tape.film(score, gma, bta);
                const int w = tape.masked_softmax_rows(shat, attn_candidates);
                head_agg.push_back(tape.matmul(w, v));
                head_scores.push_back(tape.reshape(shat, m * m, 1));
            }
            const int u = tape.concat_cols(head_agg);
            const int gv = tape.linear(cn_id, ids[L + "node_film_scale_w"],
                                       ids[L + "node_film_scale_b"]);
            const int bv = tape.linear(cn_id, ids[L + "node_film_shift_w"],
                                       ids[L + "node_film_shift_b"]);
            hn = tape.layernorm(tape.add(hn, tape.film(u, gv, bv)), ids[L + "node_ln_gain"],
                                ids[L + "node_ln_bias"]);

            const int sc = tape.concat_cols(head_scores);
            const int pe = tape.linear(sc, ids[L + "edge_proj_w"], ids[L + "edge_proj_b"]);
            const int ge = tape.linear(ce_id, ids[L + "edge_film_scale_w"],
                                       ids[L + "edge_film_scale_b"]);
            const int be = tape.linear(ce_id, ids[L + "edge_film_shift_w"],
                                       ids[L + "edge_film_shift_b"]);
            he = tape.layernorm(tape.add(he, tape.film(pe, ge, be)), ids[L + "edge_ln_gain"],
                                ids[L + "edge_ln_bias"]);
        }

        int dec = tape.linear(
            tape.silu(tape.linear(he, ids["edge_dec.w1"], ids["edge_dec.b1"])),
            ids["edge_dec.w2"], ids["edge_dec.b2"]);
        dec = tape.sym_avg_pairs(dec, m);
        if (cfg_.logit_cap > 0.0) dec = tape.tanh_scaled(dec, cfg_.logit_cap);
        return dec;
    }

    DenoiserConfig cfg_;
    std::uint64_t seed_ = 0;
    ParamStore params_;
    mutable std::vector<int> leaf_ids_;
};

} // namespace microseg
