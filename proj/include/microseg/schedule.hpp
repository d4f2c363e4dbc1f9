// Discrete edge-category diffusion: transition schedule, forward noising and
// the exact categorical posterior used by the denoising step.
//
// Every per-step transition has the form A_t = alpha_t*I + (1-alpha_t)*M with
// M = ones*noise_row, so cumulative products stay in the same family:
// Abar_t = abar_t*I + (1-abar_t)*M with abar_t the product of the alphas.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "microseg/common.hpp"
#include "microseg/rng.hpp"
#include "microseg/segmentation.hpp"

namespace microseg {

enum class NoiseKind { Uniform, Marginal };

using Mat2 = std::array<double, 4>;  // row-major 2x2

class NoiseSchedule {
public:
    // Cosine alpha schedule over T steps; `marginal` is the edge-category
    // marginal used when kind is Marginal (probability of Selected).
    static NoiseSchedule cosine(int steps, NoiseKind kind, double selected_marginal = 0.5) {
        require(steps >= 1, "schedule needs at least one step");
        std::vector<double> alphas(steps);
        const double s = 0.008;
        auto f = [&](double t) {
            const double x = (t / steps + s) / (1.0 + s) * 1.5707963267948966;
            const double c = std::cos(x);
            return c * c;
        };
        double prev = 1.0;
        for (int t = 1; t <= steps; ++t) {
            const double abar = f(static_cast<double>(t)) / f(0.0);
            alphas[t - 1] = abar / prev;
            prev = abar;
        }
        return from_alphas(alphas, kind, selected_marginal);
    }

    // Explicit per-step retention probabilities (used heavily by tests).
    static NoiseSchedule from_alphas(std::vector<double> alphas, NoiseKind kind,
                                     double selected_marginal = 0.5) {
        require(!alphas.empty(), "schedule needs at least one step");
        NoiseSchedule out;
        out.kind_ = kind;
        const double p = kind == NoiseKind::Uniform ? 0.5 : selected_marginal;
        require(p >= 0.0 && p <= 1.0, "marginal must lie in [0,1]");
        out.noise_row_ = {1.0 - p, p};
        out.alpha_ = std::move(alphas);
        out.abar_.assign(out.alpha_.size() + 1, 1.0);
        for (std::size_t t = 0; t < out.alpha_.size(); ++t) {
            require(out.alpha_[t] >= 0.0 && out.alpha_[t] <= 1.0, "alpha outside [0,1]");
            out.abar_[t + 1] = out.abar_[t] * out.alpha_[t];
        }
        return out;
    }

    int steps() const { return static_cast<int>(alpha_.size()); }
    NoiseKind kind() const { return kind_; }
    double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t) - 1); }
    double alpha_bar(int t) const { return abar_.at(static_cast<std::size_t>(t)); }

    // Per-step transition matrix A_t (rows: current category).
    Mat2 transition(int t) const { return blend(alpha(t)); }
    // Cumulative transition Abar_t = A_1 ... A_t; Abar_0 is the identity.
    Mat2 cumulative(int t) const { return blend(alpha_bar(t)); }

    // Category distribution of a fully noised edge (used to draw G_T):
    // the mean of Abar_T's rows.
    std::array<double, 2> terminal_distribution() const {
        const Mat2 ab = cumulative(steps());
        return {0.5 * (ab[0] + ab[2]), 0.5 * (ab[1] + ab[3])};
    }

private:
    Mat2 blend(double a) const {
        return {a + (1.0 - a) * noise_row_[0], (1.0 - a) * noise_row_[1],
                (1.0 - a) * noise_row_[0], a + (1.0 - a) * noise_row_[1]};
    }

    NoiseKind kind_ = NoiseKind::Uniform;
    std::array<double, 2> noise_row_{0.5, 0.5};
    std::vector<double> alpha_;
    std::vector<double> abar_;  // abar_[t], t = 0..T
};

inline NoiseSchedule make_noise_schedule(int steps, NoiseKind kind,
                                         double selected_marginal = 0.5) {
    return NoiseSchedule::cosine(steps, kind, selected_marginal);
}

// Empirical Selected marginal for a trust graph: candidate-edge density over
// all unordered node pairs. Feeds the Marginal schedule kind.
inline double empirical_selected_marginal(const TrustGraph& trust) {
    const int m = trust.node_count();
    if (m < 2) return 0.0;
    return static_cast<double>(trust.edge_count()) / (0.5 * m * (m - 1));
}

// Per-edge categorical distributions over {Unselected, Selected}.
struct EdgeDistribution {
    int m = 0;
    std::vector<double> p;  // m*m*2, symmetric in the pair indices

    static EdgeDistribution zeros(int m) {
        EdgeDistribution d;
        d.m = m;
        d.p.assign(static_cast<std::size_t>(m) * m * 2, 0.0);
        return d;
    }
    double at(int i, int j, int cat) const {
        return p[(static_cast<std::size_t>(i) * m + j) * 2 + cat];
    }
    void set(int i, int j, double p0, double p1) {
        const std::size_t a = (static_cast<std::size_t>(i) * m + j) * 2;
        const std::size_t b = (static_cast<std::size_t>(j) * m + i) * 2;
        p[a] = p0; p[a + 1] = p1;
        p[b] = p0; p[b + 1] = p1;
    }
};

// Applies t steps of forward noise to G0. Only unordered pairs flagged in
// `active` are diffused (upper triangle sampled, then mirrored); everything
// else stays Unselected.
inline Segmentation forward_diffuse(const Segmentation& g0, int t, const NoiseSchedule& sched,
                                    const std::vector<std::uint8_t>& active, Rng& rng) {
    require(t >= 1 && t <= sched.steps(), "timestep outside schedule");
    const int m = g0.m();
    const Mat2 ab = sched.cumulative(t);
    Segmentation out(m);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (!active[static_cast<std::size_t>(i) * m + j]) continue;
            const int cur = static_cast<int>(g0.at(i, j));
            const double row[2] = {ab[cur * 2], ab[cur * 2 + 1]};
            out.set(i, j, static_cast<EdgeState>(rng.categorical(row, 2)));
        }
    }
    return out;
}

// One denoising step: for each active pair, mixes the exact Bayes posterior
// q(x_{t-1} | x_t, x_0) over the predicted clean category. Rows of the
// result sum to one; pairs whose observed state is inconsistent with every
// clean category fall back to staying put.
inline EdgeDistribution denoise_posterior(const Segmentation& gt, const EdgeDistribution& p_clean,
                                          int t, const NoiseSchedule& sched,
                                          const std::vector<std::uint8_t>& active) {
    require(t >= 1 && t <= sched.steps(), "timestep outside schedule");
    const int m = gt.m();
    require(p_clean.m == m, "clean prediction has wrong node count");
    const Mat2 a_t = sched.transition(t);
    const Mat2 ab_prev = sched.cumulative(t - 1);
    const Mat2 ab_cur = sched.cumulative(t);

    EdgeDistribution out = EdgeDistribution::zeros(m);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (!active[static_cast<std::size_t>(i) * m + j]) continue;
            const double w0 = p_clean.at(i, j, 0);
            const double w1 = p_clean.at(i, j, 1);
            require(std::abs(w0 + w1 - 1.0) <= 1e-9 && w0 >= -1e-12 && w1 >= -1e-12,
                    "clean prediction row is not a distribution");
            const int h = static_cast<int>(gt.at(i, j));
            double mix[2] = {0.0, 0.0};
            for (int g = 0; g < 2; ++g) {
                const double denom = ab_cur[g * 2 + h];
                if (denom <= 1e-300) continue;  // clean category inconsistent with x_t
                const double wg = g == 0 ? w0 : w1;
                for (int k = 0; k < 2; ++k)
                    mix[k] += wg * a_t[k * 2 + h] * ab_prev[g * 2 + k] / denom;
            }
            const double total = mix[0] + mix[1];
            if (total <= 1e-300) {
                out.set(i, j, h == 0 ? 1.0 : 0.0, h == 1 ? 1.0 : 0.0);
            } else {
                out.set(i, j, mix[0] / total, mix[1] / total);
            }
        }
    }
    return out;
}

} // namespace microseg
