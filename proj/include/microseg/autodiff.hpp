// Small tape-based reverse-mode autodiff over dense row-major matrices.
// Covers exactly the operations the denoising network needs: linear maps,
// elementwise FiLM modulation, SiLU, masked row softmax, layer norm, column
// concatenation, pair symmetrization and a weighted log-likelihood readout.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "microseg/common.hpp"

namespace microseg::ad {

struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return v.size(); }

    static Tensor zeros(int r, int c) { return Tensor(r, c); }
};

class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}

    bool grad_enabled() const { return grad_; }
    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    int leaf(Tensor t) {
        nodes_.push_back({std::move(t), {}, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    int add(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require(ta.rows == tb.rows && ta.cols == tb.cols, "add: shape mismatch");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += tb.v[i];
        return push(std::move(out), [a, b](Tape& t, const Tensor& g, const Tensor&) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        });
    }

    int mul(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require(ta.rows == tb.rows && ta.cols == tb.cols, "mul: shape mismatch");
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= tb.v[i];
        return push(std::move(out), [a, b](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& ta = t.val(a);
            const Tensor& tb = t.val(b);
            Tensor da(ta.rows, ta.cols), db(ta.rows, ta.cols);
            for (std::size_t i = 0; i < g.size(); ++i) {
                da.v[i] = g.v[i] * tb.v[i];
                db.v[i] = g.v[i] * ta.v[i];
            }
            t.accumulate(a, da);
            t.accumulate(b, db);
        });
    }

    // x*(1+scale) + shift, all elementwise and same shape.
    int film(int x, int scale, int shift) {
        const Tensor& tx = val(x);
        const Tensor& ts = val(scale);
        const Tensor& th = val(shift);
        require(tx.rows == ts.rows && tx.cols == ts.cols && tx.rows == th.rows &&
                    tx.cols == th.cols,
                "film: shape mismatch");
        Tensor out = tx;
        for (std::size_t i = 0; i < out.size(); ++i)
            out.v[i] = tx.v[i] * (1.0 + ts.v[i]) + th.v[i];
        return push(std::move(out), [x, scale, shift](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& tx = t.val(x);
            const Tensor& ts = t.val(scale);
            Tensor dx(tx.rows, tx.cols), dscale(tx.rows, tx.cols);
            for (std::size_t i = 0; i < g.size(); ++i) {
                dx.v[i] = g.v[i] * (1.0 + ts.v[i]);
                dscale.v[i] = g.v[i] * tx.v[i];
            }
            t.accumulate(x, dx);
            t.accumulate(scale, dscale);
            t.accumulate(shift, g);
        });
    }

    int scale_const(int a, double s) {
        Tensor out = val(a);
        for (double& x : out.v) x *= s;
        return push(std::move(out), [a, s](Tape& t, const Tensor& g, const Tensor&) {
            Tensor da = g;
            for (double& x : da.v) x *= s;
            t.accumulate(a, da);
        });
    }

    // a (r x k) * b (k x c)
    int matmul(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require(ta.cols == tb.rows, "matmul: inner dimension mismatch");
        Tensor out(ta.rows, tb.cols);
        mm(ta, tb, out);
        return push(std::move(out), [a, b](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& ta = t.val(a);
            const Tensor& tb = t.val(b);
            Tensor da(ta.rows, ta.cols), db(tb.rows, tb.cols);
            mm_nt(g, tb, da);   // g * b^T
            mm_tn(ta, g, db);   // a^T * g
            t.accumulate(a, da);
            t.accumulate(b, db);
        });
    }

    // a (r x k) * b^T with b (c x k)
    int matmul_nt(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        require(ta.cols == tb.cols, "matmul_nt: inner dimension mismatch");
        Tensor out(ta.rows, tb.rows);
        mm_nt(ta, tb, out);
        return push(std::move(out), [a, b](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& ta = t.val(a);
            const Tensor& tb = t.val(b);
            Tensor da(ta.rows, ta.cols), db(tb.rows, tb.cols);
            mm(g, tb, da);      // g * b
            mm_tn(g, ta, db);   // g^T * a
            t.accumulate(a, da);
            t.accumulate(b, db);
        });
    }

    // x (r x k) * w (k x c) + bias (1 x c) broadcast over rows.
    int linear(int x, int w, int bias) {
        const Tensor& tx = val(x);
        const Tensor& tw = val(w);
        const Tensor& tb = val(bias);
        require(tx.cols == tw.rows, "linear: inner dimension mismatch");
        require(tb.rows == 1 && tb.cols == tw.cols, "linear: bias shape mismatch");
        Tensor out(tx.rows, tw.cols);
        mm(tx, tw, out);
        for (int r = 0; r < out.rows; ++r)
            for (int c = 0; c < out.cols; ++c) out.at(r, c) += tb.at(0, c);
        return push(std::move(out), [x, w, bias](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& tx = t.val(x);
            const Tensor& tw = t.val(w);
            Tensor dx(tx.rows, tx.cols), dw(tw.rows, tw.cols), db(1, tw.cols);
            mm_nt(g, tw, dx);
            mm_tn(tx, g, dw);
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) db.at(0, c) += g.at(r, c);
            t.accumulate(x, dx);
            t.accumulate(w, dw);
            t.accumulate(bias, db);
        });
    }

    // c * tanh(x / c): smooth magnitude bound at |c|.
    int tanh_scaled(int a, double c) {
        const Tensor& ta = val(a);
        Tensor out = ta;
        for (double& x : out.v) x = c * std::tanh(x / c);
        return push(std::move(out), [a, c](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& ta = t.val(a);
            Tensor da(ta.rows, ta.cols);
            for (std::size_t i = 0; i < da.size(); ++i) {
                const double th = std::tanh(ta.v[i] / c);
                da.v[i] = g.v[i] * (1.0 - th * th);
            }
            t.accumulate(a, da);
        });
    }

    int silu(int a) {
        const Tensor& ta = val(a);
        Tensor out = ta;
        for (double& x : out.v) {
            const double s = 1.0 / (1.0 + std::exp(-x));
            x = x * s;
        }
        return push(std::move(out), [a](Tape& t, const Tensor& g, const Tensor&) {
            const Tensor& ta = t.val(a);
            Tensor da(ta.rows, ta.cols);
            for (std::size_t i = 0; i < da.size(); ++i) {
                const double x = ta.v[i];
                const double s = 1.0 / (1.0 + std::exp(-x));
                da.v[i] = g.v[i] * (s + x * s * (1.0 - s));
            }
            t.accumulate(a, da);
        });
    }

    // Row-wise layer normalization with learned gain/bias (1 x cols each).
    int layernorm(int x, int gain, int bias) {
        const Tensor& tx = val(x);
        const Tensor& tg = val(gain);
        require(tg.rows == 1 && tg.cols == tx.cols, "layernorm: gain shape mismatch");
        const double eps = 1e-5;
        Tensor out(tx.rows, tx.cols);
        Tensor xhat(tx.rows, tx.cols);
        std::vector<double> inv_std(static_cast<std::size_t>(tx.rows));
        const Tensor& tb = val(bias);
        for (int r = 0; r < tx.rows; ++r) {
            double mean = 0.0;
            for (int c = 0; c < tx.cols; ++c) mean += tx.at(r, c);
            mean /= tx.cols;
            double var = 0.0;
            for (int c = 0; c < tx.cols; ++c) {
                const double d = tx.at(r, c) - mean;
                var += d * d;
            }
            var /= tx.cols;
            const double istd = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<std::size_t>(r)] = istd;
            for (int c = 0; c < tx.cols; ++c) {
                const double xh = (tx.at(r, c) - mean) * istd;
                xhat.at(r, c) = xh;
                out.at(r, c) = tg.at(0, c) * xh + tb.at(0, c);
            }
        }
        return push(std::move(out), [x, gain, bias, xhat = std::move(xhat),
                                     inv_std = std::move(inv_std)](Tape& t, const Tensor& g,
                                                                   const Tensor&) {
            const Tensor& tg = t.val(gain);
            const int rows = xhat.rows, cols = xhat.cols;
            Tensor dx(rows, cols), dgain(1, cols), dbias(1, cols);
            for (int r = 0; r < rows; ++r) {
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int c = 0; c < cols; ++c) {
                    const double dxh = g.at(r, c) * tg.at(0, c);
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xhat.at(r, c);
                    dgain.at(0, c) += g.at(r, c) * xhat.at(r, c);
                    dbias.at(0, c) += g.at(r, c);
                }
                const double istd = inv_std[static_cast<std::size_t>(r)];
                for (int c = 0; c < cols; ++c) {
                    const double dxh = g.at(r, c) * tg.at(0, c);
                    dx.at(r, c) = istd * (dxh - sum_dxhat / cols -
                                          xhat.at(r, c) * sum_dxhat_xhat / cols);
                }
            }
            t.accumulate(x, dx);
            t.accumulate(gain, dgain);
            t.accumulate(bias, dbias);
        });
    }

    // Row softmax restricted to entries with mask != 0; excluded entries and
    // fully masked rows produce zeros.
    int masked_softmax_rows(int x, const std::vector<std::uint8_t>& mask) {
        const Tensor& tx = val(x);
        require(mask.size() == tx.size(), "masked_softmax: mask size mismatch");
        Tensor out(tx.rows, tx.cols);
        for (int r = 0; r < tx.rows; ++r) {
            double hi = -1e300;
            bool any = false;
            for (int c = 0; c < tx.cols; ++c) {
                if (!mask[static_cast<std::size_t>(r) * tx.cols + c]) continue;
                hi = std::max(hi, tx.at(r, c));
                any = true;
            }
            if (!any) continue;
            double total = 0.0;
            for (int c = 0; c < tx.cols; ++c) {
                if (!mask[static_cast<std::size_t>(r) * tx.cols + c]) continue;
                const double e = std::exp(tx.at(r, c) - hi);
                out.at(r, c) = e;
                total += e;
            }
            for (int c = 0; c < tx.cols; ++c) out.at(r, c) /= total;
        }
        return push(std::move(out), [x, mask](Tape& t, const Tensor& g, const Tensor& y) {
            Tensor dx(y.rows, y.cols);
            for (int r = 0; r < y.rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
                for (int c = 0; c < y.cols; ++c) {
                    if (!mask[static_cast<std::size_t>(r) * y.cols + c]) continue;
                    dx.at(r, c) = y.at(r, c) * (g.at(r, c) - dot);
                }
            }
            t.accumulate(x, dx);
        });
    }

    int concat_cols(const std::vector<int>& parts) {
        require(!parts.empty(), "concat: no parts");
        const int rows = val(parts[0]).rows;
        int cols = 0;
        for (int p : parts) {
            require(val(p).rows == rows, "concat: row mismatch");
            cols += val(p).cols;
        }
        Tensor out(rows, cols);
        int off = 0;
        for (int p : parts) {
            const Tensor& tp = val(p);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < tp.cols; ++c) out.at(r, off + c) = tp.at(r, c);
            off += tp.cols;
        }
        return push(std::move(out), [parts](Tape& t, const Tensor& g, const Tensor&) {
            int off = 0;
            for (int p : parts) {
                const Tensor& tp = t.val(p);
                Tensor dp(tp.rows, tp.cols);
                for (int r = 0; r < tp.rows; ++r)
                    for (int c = 0; c < tp.cols; ++c) dp.at(r, c) = g.at(r, off + c);
                t.accumulate(p, dp);
                off += tp.cols;
            }
        });
    }

    // Same data, new shape (row-major order preserved).
    int reshape(int a, int rows, int cols) {
        const Tensor& ta = val(a);
        require(static_cast<std::size_t>(rows) * cols == ta.size(), "reshape: size mismatch");
        Tensor out(rows, cols);
        out.v = ta.v;
        return push(std::move(out), [a, r = ta.rows, c = ta.cols](Tape& t, const Tensor& g,
                                                                  const Tensor&) {
            Tensor da(r, c);
            da.v = g.v;
            t.accumulate(a, da);
        });
    }

    // x has m*m rows (pair-major); averages rows (i,j) and (j,i).
    int sym_avg_pairs(int x, int m) {
        const Tensor& tx = val(x);
        require(tx.rows == m * m, "sym_avg_pairs: row count must be m*m");
        Tensor out(tx.rows, tx.cols);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int c = 0; c < tx.cols; ++c)
                    out.at(i * m + j, c) = 0.5 * (tx.at(i * m + j, c) + tx.at(j * m + i, c));
        return push(std::move(out), [x, m](Tape& t, const Tensor& g, const Tensor&) {
            Tensor dx(g.rows, g.cols);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    for (int c = 0; c < g.cols; ++c)
                        dx.at(i * m + j, c) =
                            0.5 * (g.at(i * m + j, c) + g.at(j * m + i, c));
            t.accumulate(x, dx);
        });
    }

    // Scalar readout: sum of x elementwise-weighted by w (same size).
    int weighted_sum(int x, std::vector<double> w) {
        const Tensor& tx = val(x);
        require(w.size() == tx.size(), "weighted_sum: weight size mismatch");
        Tensor out(1, 1);
        for (std::size_t i = 0; i < tx.size(); ++i) out.v[0] += tx.v[i] * w[i];
        return push(std::move(out), [x, w = std::move(w)](Tape& t, const Tensor& g,
                                                          const Tensor&) {
            const Tensor& tx = t.val(x);
            Tensor dx(tx.rows, tx.cols);
            for (std::size_t i = 0; i < dx.size(); ++i) dx.v[i] = g.v[0] * w[i];
            t.accumulate(x, dx);
        });
    }

    // Sum over rows of weight[r] * log softmax(logits[r])[target[r]].
    // Produces a 1x1 scalar node.
    int weighted_logprob(int logits, std::vector<int> targets, std::vector<double> weights) {
        const Tensor& tl = val(logits);
        require(static_cast<int>(targets.size()) == tl.rows &&
                    static_cast<int>(weights.size()) == tl.rows,
                "weighted_logprob: per-row targets and weights required");
        Tensor out(1, 1);
        Tensor probs(tl.rows, tl.cols);
        for (int r = 0; r < tl.rows; ++r) {
            double hi = tl.at(r, 0);
            for (int c = 1; c < tl.cols; ++c) hi = std::max(hi, tl.at(r, c));
            double total = 0.0;
            for (int c = 0; c < tl.cols; ++c) total += std::exp(tl.at(r, c) - hi);
            const double logz = hi + std::log(total);
            for (int c = 0; c < tl.cols; ++c) probs.at(r, c) = std::exp(tl.at(r, c) - logz);
            if (weights[static_cast<std::size_t>(r)] != 0.0)
                out.at(0, 0) +=
                    weights[static_cast<std::size_t>(r)] * (tl.at(r, targets[r]) - logz);
        }
        return push(std::move(out),
                    [logits, targets = std::move(targets), weights = std::move(weights),
                     probs = std::move(probs)](Tape& t, const Tensor& g, const Tensor&) {
                        const double seed = g.at(0, 0);
                        Tensor dl(probs.rows, probs.cols);
                        for (int r = 0; r < probs.rows; ++r) {
                            const double w = weights[static_cast<std::size_t>(r)];
                            if (w == 0.0) continue;
                            for (int c = 0; c < probs.cols; ++c) {
                                const double hot = c == targets[static_cast<std::size_t>(r)]
                                                       ? 1.0 : 0.0;
                                dl.at(r, c) = seed * w * (hot - probs.at(r, c));
                            }
                        }
                        t.accumulate(logits, dl);
                    });
    }

    // Reverse sweep from `output`, seeding its gradient with `seed`.
    void backward(int output, double seed = 1.0) {
        require(grad_, "backward on a no-grad tape");
        for (auto& n : nodes_) {
            n.grad = Tensor(n.val.rows, n.val.cols);
        }
        auto& out = nodes_[static_cast<std::size_t>(output)];
        require(out.val.rows == 1 && out.val.cols == 1, "backward target must be scalar");
        out.grad.at(0, 0) = seed;
        for (int id = output; id >= 0; --id) {
            auto& n = nodes_[static_cast<std::size_t>(id)];
            if (n.back) n.back(*this, n.grad, n.val);
        }
    }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&, const Tensor&, const Tensor&)> back;
    };

    int push(Tensor val, std::function<void(Tape&, const Tensor&, const Tensor&)> back) {
        nodes_.push_back({std::move(val), {}, grad_ ? std::move(back) : nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    void accumulate(int id, const Tensor& g) {
        Tensor& dst = nodes_[static_cast<std::size_t>(id)].grad;
        for (std::size_t i = 0; i < g.size(); ++i) dst.v[i] += g.v[i];
    }

    static void mm(const Tensor& a, const Tensor& b, Tensor& out) {
        for (int i = 0; i < a.rows; ++i) {
            double* orow = &out.v[static_cast<std::size_t>(i) * out.cols];
            for (int k = 0; k < a.cols; ++k) {
                const double av = a.at(i, k);
                if (av == 0.0) continue;
                const double* brow = &b.v[static_cast<std::size_t>(k) * b.cols];
                for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
            }
        }
    }
    // a * b^T
    static void mm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
        for (int i = 0; i < a.rows; ++i) {
            const double* arow = &a.v[static_cast<std::size_t>(i) * a.cols];
            for (int j = 0; j < b.rows; ++j) {
                const double* brow = &b.v[static_cast<std::size_t>(j) * b.cols];
                double acc = 0.0;
                for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
                out.at(i, j) += acc;
            }
        }
    }
    // a^T * b
    static void mm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
        for (int k = 0; k < a.rows; ++k) {
            const double* arow = &a.v[static_cast<std::size_t>(k) * a.cols];
            const double* brow = &b.v[static_cast<std::size_t>(k) * b.cols];
            for (int i = 0; i < a.cols; ++i) {
                const double av = arow[i];
                if (av == 0.0) continue;
                double* orow = &out.v[static_cast<std::size_t>(i) * out.cols];
                for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
            }
        }
    }

    bool grad_;
    std::vector<Node> nodes_;
};

} // namespace microseg::ad
