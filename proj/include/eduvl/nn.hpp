#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "eduvl/common.hpp"

namespace eduvl::nn {

template <class T>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * static_cast<size_t>(c), T(0)) {}

    T* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const T* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    T& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    T at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), T(0)); }
};

// y = x * w, shapes (n x k) * (k x m)
template <class T>
void matmul(const Matrix<T>& x, const Matrix<T>& w, Matrix<T>& y) {
    y = Matrix<T>(x.rows, w.cols);
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row(i);
        T* yi = y.row(i);
        for (int k = 0; k < x.cols; ++k) {
            T v = xi[k];
            if (v == T(0)) continue;
            const T* wk = w.row(k);
            for (int j = 0; j < w.cols; ++j) yi[j] += v * wk[j];
        }
    }
}

// y += x^T * g, shapes (n x k)^T * (n x m) -> (k x m); the weight-gradient kernel
template <class T>
void accumulate_at_b(const Matrix<T>& x, const Matrix<T>& g, Matrix<T>& y) {
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row(i);
        const T* gi = g.row(i);
        for (int k = 0; k < x.cols; ++k) {
            T v = xi[k];
            if (v == T(0)) continue;
            T* yk = y.row(k);
            for (int j = 0; j < g.cols; ++j) yk[j] += v * gi[j];
        }
    }
}

// y += g * w^T, shapes (n x m) * (k x m)^T -> (n x k); the input-gradient kernel
template <class T>
void accumulate_a_bt(const Matrix<T>& g, const Matrix<T>& w, Matrix<T>& y) {
    for (int i = 0; i < g.rows; ++i) {
        const T* gi = g.row(i);
        T* yi = y.row(i);
        for (int j = 0; j < w.rows; ++j) {
            const T* wj = w.row(j);
            T acc = T(0);
            for (int m = 0; m < g.cols; ++m) acc += gi[m] * wj[m];
            yi[j] += acc;
        }
    }
}

template <class T>
void add_row_bias(Matrix<T>& x, const Matrix<T>& bias) {
    for (int i = 0; i < x.rows; ++i) {
        T* xi = x.row(i);
        const T* b = bias.row(0);
        for (int j = 0; j < x.cols; ++j) xi[j] += b[j];
    }
}

template <class T>
void accumulate_column_sums(const Matrix<T>& g, Matrix<T>& bias_grad) {
    for (int i = 0; i < g.rows; ++i) {
        const T* gi = g.row(i);
        T* b = bias_grad.row(0);
        for (int j = 0; j < g.cols; ++j) b[j] += gi[j];
    }
}

// A trainable tensor paired with its gradient accumulator.
template <class T>
struct Param {
    Matrix<T> w;
    Matrix<T> g;

    void resize(int rows, int cols) {
        w = Matrix<T>(rows, cols);
        g = Matrix<T>(rows, cols);
    }
    void zero_grad() { g.zero(); }
};

template <class T>
struct ParamRef {
    Param<T>* param = nullptr;
    std::string name;
};

template <class T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

template <class T>
T gelu_derivative(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475)));
    const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return cdf + x * pdf;
}

// Row-wise layer normalization, eps 1e-5.
template <class T>
struct LayerNormCache {
    Matrix<T> x_hat;
    std::vector<T> inv_std;
};

template <class T>
void layer_norm_forward(const Matrix<T>& x, const Matrix<T>& gain, const Matrix<T>& bias,
                        Matrix<T>& out, LayerNormCache<T>& cache) {
    const int d = x.cols;
    out = Matrix<T>(x.rows, d);
    cache.x_hat = Matrix<T>(x.rows, d);
    cache.inv_std.assign(static_cast<size_t>(x.rows), T(0));
    const T eps = T(1e-5);
    for (int i = 0; i < x.rows; ++i) {
        const T* xi = x.row(i);
        T mean = T(0);
        for (int j = 0; j < d; ++j) mean += xi[j];
        mean /= T(d);
        T var = T(0);
        for (int j = 0; j < d; ++j) {
            T c = xi[j] - mean;
            var += c * c;
        }
        var /= T(d);
        T inv_std = T(1) / std::sqrt(var + eps);
        cache.inv_std[static_cast<size_t>(i)] = inv_std;
        T* hat = cache.x_hat.row(i);
        T* oi = out.row(i);
        const T* gn = gain.row(0);
        const T* bs = bias.row(0);
        for (int j = 0; j < d; ++j) {
            hat[j] = (xi[j] - mean) * inv_std;
            oi[j] = gn[j] * hat[j] + bs[j];
        }
    }
}

template <class T>
void layer_norm_backward(const Matrix<T>& d_out, const LayerNormCache<T>& cache,
                         Param<T>& gain, Param<T>& bias, Matrix<T>& d_x) {
    const int d = d_out.cols;
    d_x = Matrix<T>(d_out.rows, d);
    for (int i = 0; i < d_out.rows; ++i) {
        const T* go = d_out.row(i);
        const T* hat = cache.x_hat.row(i);
        const T inv_std = cache.inv_std[static_cast<size_t>(i)];
        const T* gn = gain.w.row(0);
        T* gg = gain.g.row(0);
        T* bg = bias.g.row(0);
        T sum_dhat = T(0);
        T sum_dhat_hat = T(0);
        for (int j = 0; j < d; ++j) {
            gg[j] += go[j] * hat[j];
            bg[j] += go[j];
            T dhat = go[j] * gn[j];
            sum_dhat += dhat;
            sum_dhat_hat += dhat * hat[j];
        }
        const T inv_d = T(1) / T(d);
        T* dxi = d_x.row(i);
        for (int j = 0; j < d; ++j) {
            T dhat = go[j] * gn[j];
            dxi[j] = inv_std * (dhat - sum_dhat * inv_d - hat[j] * sum_dhat_hat * inv_d);
        }
    }
}

// One Transformer encoder layer: self-attention plus a GELU feed-forward
// block, two layer-norm pairs, residual stream. Two norm placements:
// post_norm normalizes after each residual add (bounded outputs, used for
// the token encoder), pre_norm normalizes the block inputs and leaves the
// residual stream open (input-dependent pooled outputs, used for the
// document-level stack).
template <class T>
struct LayerParams {
    Param<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Param<T> ln1_gain, ln1_bias;
    Param<T> ff_w1, ff_b1, ff_w2, ff_b2;
    Param<T> ln2_gain, ln2_bias;

    void resize(int d) {
        wq.resize(d, d);
        bq.resize(1, d);
        wk.resize(d, d);
        bk.resize(1, d);
        wv.resize(d, d);
        bv.resize(1, d);
        wo.resize(d, d);
        bo.resize(1, d);
        ln1_gain.resize(1, d);
        ln1_bias.resize(1, d);
        ff_w1.resize(d, 4 * d);
        ff_b1.resize(1, 4 * d);
        ff_w2.resize(4 * d, d);
        ff_b2.resize(1, d);
        ln2_gain.resize(1, d);
        ln2_bias.resize(1, d);
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({&wq, prefix + ".wq"});
        out.push_back({&bq, prefix + ".bq"});
        out.push_back({&wk, prefix + ".wk"});
        out.push_back({&bk, prefix + ".bk"});
        out.push_back({&wv, prefix + ".wv"});
        out.push_back({&bv, prefix + ".bv"});
        out.push_back({&wo, prefix + ".wo"});
        out.push_back({&bo, prefix + ".bo"});
        out.push_back({&ln1_gain, prefix + ".ln1_gain"});
        out.push_back({&ln1_bias, prefix + ".ln1_bias"});
        out.push_back({&ff_w1, prefix + ".ff_w1"});
        out.push_back({&ff_b1, prefix + ".ff_b1"});
        out.push_back({&ff_w2, prefix + ".ff_w2"});
        out.push_back({&ff_b2, prefix + ".ff_b2"});
        out.push_back({&ln2_gain, prefix + ".ln2_gain"});
        out.push_back({&ln2_bias, prefix + ".ln2_bias"});
    }
};

template <class T>
struct LayerCache {
    Matrix<T> x;
    LayerNormCache<T> ln1;
    Matrix<T> norm1;  // pre-norm only: LN(x), the attention input
    Matrix<T> q, k, v;
    std::vector<Matrix<T>> attention;  // per head, rows are softmax distributions
    Matrix<T> heads;                   // concatenated head outputs
    Matrix<T> res1;   // attention residual sum (normalized in post-norm)
    LayerNormCache<T> ln2;
    Matrix<T> norm2;  // the feed-forward input
    Matrix<T> ff_pre;
    Matrix<T> ff_act;
};

template <class T>
void encoder_layer_forward(const LayerParams<T>& layer, int heads, bool pre_norm,
                           const Matrix<T>& x, Matrix<T>& out, LayerCache<T>& cache) {
    const int n = x.rows;
    const int d = x.cols;
    const int dk = d / heads;
    const T scale = T(1) / std::sqrt(T(dk));

    cache.x = x;
    const Matrix<T>* attn_in = &x;
    if (pre_norm) {
        layer_norm_forward(x, layer.ln1_gain.w, layer.ln1_bias.w, cache.norm1, cache.ln1);
        attn_in = &cache.norm1;
    }
    matmul(*attn_in, layer.wq.w, cache.q);
    add_row_bias(cache.q, layer.bq.w);
    matmul(*attn_in, layer.wk.w, cache.k);
    add_row_bias(cache.k, layer.bk.w);
    matmul(*attn_in, layer.wv.w, cache.v);
    add_row_bias(cache.v, layer.bv.w);

    cache.heads = Matrix<T>(n, d);
    cache.attention.assign(static_cast<size_t>(heads), Matrix<T>());
    for (int h = 0; h < heads; ++h) {
        const int off = h * dk;
        Matrix<T>& att = cache.attention[static_cast<size_t>(h)];
        att = Matrix<T>(n, n);
        for (int i = 0; i < n; ++i) {
            const T* qi = cache.q.row(i) + off;
            T* ai = att.row(i);
            T max_score = -std::numeric_limits<T>::infinity();
            for (int j = 0; j < n; ++j) {
                const T* kj = cache.k.row(j) + off;
                T s = T(0);
                for (int e = 0; e < dk; ++e) s += qi[e] * kj[e];
                s *= scale;
                ai[j] = s;
                if (s > max_score) max_score = s;
            }
            T sum = T(0);
            for (int j = 0; j < n; ++j) {
                ai[j] = std::exp(ai[j] - max_score);
                sum += ai[j];
            }
            T inv = T(1) / sum;
            for (int j = 0; j < n; ++j) ai[j] *= inv;

            T* hi = cache.heads.row(i) + off;
            for (int e = 0; e < dk; ++e) hi[e] = T(0);
            for (int j = 0; j < n; ++j) {
                const T w = ai[j];
                if (w == T(0)) continue;
                const T* vj = cache.v.row(j) + off;
                for (int e = 0; e < dk; ++e) hi[e] += w * vj[e];
            }
        }
    }

    Matrix<T> attn_out;
    matmul(cache.heads, layer.wo.w, attn_out);
    add_row_bias(attn_out, layer.bo.w);

    Matrix<T> sum1(n, d);
    for (size_t i = 0; i < sum1.size(); ++i) sum1.a[i] = x.a[i] + attn_out.a[i];
    if (pre_norm) {
        cache.res1 = std::move(sum1);
        layer_norm_forward(cache.res1, layer.ln2_gain.w, layer.ln2_bias.w, cache.norm2,
                           cache.ln2);
    } else {
        layer_norm_forward(sum1, layer.ln1_gain.w, layer.ln1_bias.w, cache.res1, cache.ln1);
        cache.norm2 = cache.res1;  // feed-forward reads the normalized sum
    }

    matmul(cache.norm2, layer.ff_w1.w, cache.ff_pre);
    add_row_bias(cache.ff_pre, layer.ff_b1.w);
    cache.ff_act = Matrix<T>(n, 4 * d);
    for (size_t i = 0; i < cache.ff_act.size(); ++i) cache.ff_act.a[i] = gelu(cache.ff_pre.a[i]);

    Matrix<T> ff_out;
    matmul(cache.ff_act, layer.ff_w2.w, ff_out);
    add_row_bias(ff_out, layer.ff_b2.w);

    Matrix<T> sum2(n, d);
    for (size_t i = 0; i < sum2.size(); ++i) sum2.a[i] = cache.res1.a[i] + ff_out.a[i];
    if (pre_norm) {
        out = std::move(sum2);
    } else {
        layer_norm_forward(sum2, layer.ln2_gain.w, layer.ln2_bias.w, out, cache.ln2);
    }
}

// Accumulates parameter gradients and returns the input gradient.
template <class T>
void encoder_layer_backward(LayerParams<T>& layer, int heads, bool pre_norm,
                            const Matrix<T>& d_out, const LayerCache<T>& cache, Matrix<T>& d_x) {
    const int n = d_out.rows;
    const int d = d_out.cols;
    const int dk = d / heads;
    const T scale = T(1) / std::sqrt(T(dk));

    Matrix<T> d_sum2;  // gradient at res1 + ff_out
    if (pre_norm)
        d_sum2 = d_out;
    else
        layer_norm_backward(d_out, cache.ln2, layer.ln2_gain, layer.ln2_bias, d_sum2);

    // Feed-forward block, reading cache.norm2.
    Matrix<T> d_ff_act(n, 4 * d);
    accumulate_a_bt(d_sum2, layer.ff_w2.w, d_ff_act);
    accumulate_at_b(cache.ff_act, d_sum2, layer.ff_w2.g);
    accumulate_column_sums(d_sum2, layer.ff_b2.g);

    Matrix<T> d_ff_pre(n, 4 * d);
    for (size_t i = 0; i < d_ff_pre.size(); ++i)
        d_ff_pre.a[i] = d_ff_act.a[i] * gelu_derivative(cache.ff_pre.a[i]);

    Matrix<T> d_norm2(n, d);
    accumulate_a_bt(d_ff_pre, layer.ff_w1.w, d_norm2);
    accumulate_at_b(cache.norm2, d_ff_pre, layer.ff_w1.g);
    accumulate_column_sums(d_ff_pre, layer.ff_b1.g);

    Matrix<T> d_res1 = d_sum2;  // residual branch
    if (pre_norm) {
        Matrix<T> d_from_ln2;
        layer_norm_backward(d_norm2, cache.ln2, layer.ln2_gain, layer.ln2_bias, d_from_ln2);
        for (size_t i = 0; i < d_res1.size(); ++i) d_res1.a[i] += d_from_ln2.a[i];
    } else {
        // norm2 aliases res1 in the post-norm layout.
        for (size_t i = 0; i < d_res1.size(); ++i) d_res1.a[i] += d_norm2.a[i];
    }

    Matrix<T> d_sum1;  // gradient at x + attn_out
    if (pre_norm)
        d_sum1 = std::move(d_res1);
    else
        layer_norm_backward(d_res1, cache.ln1, layer.ln1_gain, layer.ln1_bias, d_sum1);

    d_x = d_sum1;  // residual branch

    // Attention output projection.
    Matrix<T> d_heads(n, d);
    accumulate_a_bt(d_sum1, layer.wo.w, d_heads);
    accumulate_at_b(cache.heads, d_sum1, layer.wo.g);
    accumulate_column_sums(d_sum1, layer.bo.g);

    Matrix<T> d_q(n, d), d_k(n, d), d_v(n, d);
    for (int h = 0; h < heads; ++h) {
        const int off = h * dk;
        const Matrix<T>& att = cache.attention[static_cast<size_t>(h)];
        for (int i = 0; i < n; ++i) {
            const T* dh = d_heads.row(i) + off;
            const T* ai = att.row(i);

            std::vector<T> d_att(static_cast<size_t>(n));
            for (int j = 0; j < n; ++j) {
                const T* vj = cache.v.row(j) + off;
                T acc = T(0);
                for (int e = 0; e < dk; ++e) acc += dh[e] * vj[e];
                d_att[static_cast<size_t>(j)] = acc;
                T* dvj = d_v.row(j) + off;
                const T w = ai[j];
                for (int e = 0; e < dk; ++e) dvj[e] += w * dh[e];
            }

            T dot = T(0);
            for (int j = 0; j < n; ++j) dot += d_att[static_cast<size_t>(j)] * ai[j];
            for (int j = 0; j < n; ++j) {
                const T d_score = (d_att[static_cast<size_t>(j)] - dot) * ai[j] * scale;
                if (d_score == T(0)) continue;
                const T* kj = cache.k.row(j) + off;
                const T* qi = cache.q.row(i) + off;
                T* dqi = d_q.row(i) + off;
                T* dkj = d_k.row(j) + off;
                for (int e = 0; e < dk; ++e) {
                    dqi[e] += d_score * kj[e];
                    dkj[e] += d_score * qi[e];
                }
            }
        }
    }

    const Matrix<T>& attn_in = pre_norm ? cache.norm1 : cache.x;
    Matrix<T> d_attn_in(n, d);
    accumulate_at_b(attn_in, d_q, layer.wq.g);
    accumulate_column_sums(d_q, layer.bq.g);
    accumulate_a_bt(d_q, layer.wq.w, d_attn_in);
    accumulate_at_b(attn_in, d_k, layer.wk.g);
    accumulate_column_sums(d_k, layer.bk.g);
    accumulate_a_bt(d_k, layer.wk.w, d_attn_in);
    accumulate_at_b(attn_in, d_v, layer.wv.g);
    accumulate_column_sums(d_v, layer.bv.g);
    accumulate_a_bt(d_v, layer.wv.w, d_attn_in);

    if (pre_norm) {
        Matrix<T> d_from_ln1;
        layer_norm_backward(d_attn_in, cache.ln1, layer.ln1_gain, layer.ln1_bias, d_from_ln1);
        for (size_t i = 0; i < d_x.size(); ++i) d_x.a[i] += d_from_ln1.a[i];
    } else {
        for (size_t i = 0; i < d_x.size(); ++i) d_x.a[i] += d_attn_in.a[i];
    }
}

// Fixed sinusoidal position table, rows are positions.
template <class T>
Matrix<T> sinusoidal_positions(int length, int d) {
    Matrix<T> table(length, d);
    for (int pos = 0; pos < length; ++pos) {
        T* row = table.row(pos);
        for (int j = 0; j < d / 2; ++j) {
            const double rate = std::pow(10000.0, -2.0 * j / d);
            row[2 * j] = static_cast<T>(std::sin(pos * rate));
            row[2 * j + 1] = static_cast<T>(std::cos(pos * rate));
        }
    }
    return table;
}

template <class T>
class Adam {
  public:
    Adam(double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void attach(const std::vector<ParamRef<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& ref : params) {
            m_.emplace_back(ref.param->w.rows, ref.param->w.cols);
            v_.emplace_back(ref.param->w.rows, ref.param->w.cols);
        }
        step_count_ = 0;
    }

    void step(const std::vector<ParamRef<T>>& params) {
        ++step_count_;
        const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
        const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
        for (size_t p = 0; p < params.size(); ++p) {
            auto& w = params[p].param->w;
            auto& g = params[p].param->g;
            auto& m = m_[p];
            auto& v = v_[p];
            for (size_t i = 0; i < w.size(); ++i) {
                const double grad = static_cast<double>(g.a[i]);
                m.a[i] = static_cast<T>(beta1_ * static_cast<double>(m.a[i]) + (1.0 - beta1_) * grad);
                v.a[i] =
                    static_cast<T>(beta2_ * static_cast<double>(v.a[i]) + (1.0 - beta2_) * grad * grad);
                const double m_hat = static_cast<double>(m.a[i]) / bias1;
                const double v_hat = static_cast<double>(v.a[i]) / bias2;
                w.a[i] = static_cast<T>(static_cast<double>(w.a[i]) -
                                        lr_ * m_hat / (std::sqrt(v_hat) + eps_));
            }
        }
    }

    long long step_count() const { return step_count_; }

  private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long long step_count_ = 0;
    std::vector<Matrix<T>> m_;
    std::vector<Matrix<T>> v_;
};

template <class T>
void init_uniform(Matrix<T>& m, std::mt19937_64& rng, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : m.a) x = static_cast<T>(dist(rng));
}

}  // namespace eduvl::nn
