#pragma once

// Numerical core: 2-layer stateless LSTM over a fixed-length feature sequence,
// dense softmax over the output vocabulary, categorical cross-entropy, full
// backpropagation through time, Adam. Templated on the scalar so training runs
// in float and gradient checks in double.
//
// Layer 1 feeds its whole hidden-state sequence to layer 2; only layer 2's
// final state reaches the dense layer. Cell and hidden states start at zero
// for every window. Gate order in the fused 4H blocks: i, f, o, g.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace ordrec {

struct ModelConfig {
    int seq_len_in = 11;
    int feature_dim = 102;
    int hidden1 = 600;
    int hidden2 = 600;
    int n_outputs = 0;
    std::uint64_t seed = 0;
};

namespace lstm {

template <class T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(std::size_t(r) * std::size_t(c), T(0)) {}
    T* row(int r) { return a.data() + std::size_t(r) * std::size_t(cols); }
    const T* row(int r) const { return a.data() + std::size_t(r) * std::size_t(cols); }
};

// y (+)= A x
template <class T>
void gemv(const Mat<T>& A, const T* x, T* y, bool accumulate) {
    for (int r = 0; r < A.rows; ++r) {
        const T* row = A.row(r);
        T s = accumulate ? y[r] : T(0);
        for (int c = 0; c < A.cols; ++c) s += row[c] * x[c];
        y[r] = s;
    }
}

// y (+)= A^T x
template <class T>
void gemv_t(const Mat<T>& A, const T* x, T* y, bool accumulate) {
    if (!accumulate)
        for (int c = 0; c < A.cols; ++c) y[c] = T(0);
    for (int r = 0; r < A.rows; ++r) {
        const T* row = A.row(r);
        const T xr = x[r];
        for (int c = 0; c < A.cols; ++c) y[c] += row[c] * xr;
    }
}

// A += x y^T
template <class T>
void add_outer(Mat<T>& A, const T* x, const T* y) {
    for (int r = 0; r < A.rows; ++r) {
        T* row = A.row(r);
        const T xr = x[r];
        for (int c = 0; c < A.cols; ++c) row[c] += xr * y[c];
    }
}

template <class T>
struct LstmLayer {
    Mat<T> W;           // 4H x in_dim
    Mat<T> U;           // 4H x H
    std::vector<T> b;   // 4H
    int hidden = 0, in_dim = 0;

    LstmLayer() = default;
    LstmLayer(int h, int in)
        : W(4 * h, in), U(4 * h, h), b(std::size_t(4) * h, T(0)), hidden(h), in_dim(in) {}
};

template <class T>
struct DenseLayer {
    Mat<T> W;          // n_outputs x H
    std::vector<T> b;  // n_outputs

    DenseLayer() = default;
    DenseLayer(int n, int h) : W(n, h), b(std::size_t(n), T(0)) {}
};

template <class T>
struct ModelParams {
    ModelConfig cfg;
    LstmLayer<T> l1, l2;
    DenseLayer<T> out;
    std::uint64_t version = 0;  // bumped by adam_step; guards stale caches

    ModelParams() = default;
    explicit ModelParams(const ModelConfig& c)
        : cfg(c),
          l1(c.hidden1, c.feature_dim),
          l2(c.hidden2, c.hidden1),
          out(c.n_outputs, c.hidden2) {}

    template <class F>
    void for_each_tensor(F&& f) {
        f(l1.W.a); f(l1.U.a); f(l1.b);
        f(l2.W.a); f(l2.U.a); f(l2.b);
        f(out.W.a); f(out.b);
    }
    template <class F>
    void for_each_tensor(F&& f) const {
        f(l1.W.a); f(l1.U.a); f(l1.b);
        f(l2.W.a); f(l2.U.a); f(l2.b);
        f(out.W.a); f(out.b);
    }
    std::size_t n_params() const {
        std::size_t n = 0;
        for_each_tensor([&](const std::vector<T>& t) { n += t.size(); });
        return n;
    }
};

// Glorot-uniform weights, forget-gate bias 1, all other biases 0.
template <class T>
void init_params(ModelParams<T>& p, std::uint64_t seed) {
    Rng rng(splitmix64(seed));
    auto fill = [&](Mat<T>& m, int fan_in, int fan_out) {
        const double lim = std::sqrt(6.0 / double(fan_in + fan_out));
        for (auto& x : m.a) x = T((rng.next_double() * 2.0 - 1.0) * lim);
    };
    auto init_layer = [&](LstmLayer<T>& L) {
        fill(L.W, L.in_dim, L.hidden);
        fill(L.U, L.hidden, L.hidden);
        std::fill(L.b.begin(), L.b.end(), T(0));
        for (int i = L.hidden; i < 2 * L.hidden; ++i) L.b[std::size_t(i)] = T(1);
    };
    init_layer(p.l1);
    init_layer(p.l2);
    fill(p.out.W, p.cfg.hidden2, p.cfg.n_outputs);
    std::fill(p.out.b.begin(), p.out.b.end(), T(0));
}

template <class T>
ModelParams<T> make_initialized(const ModelConfig& cfg) {
    ModelParams<T> p(cfg);
    init_params(p, cfg.seed);
    return p;
}

template <class T>
struct StepCache {
    std::vector<T> gi, gf, go, gg;  // gate activations
    std::vector<T> c, tc, h;        // cell, tanh(cell), hidden
};

template <class T>
struct LayerCache {
    std::vector<StepCache<T>> steps;
};

template <class T>
struct ForwardCache {
    std::uint64_t params_version = 0;
    ModelConfig cfg;
    std::vector<T> x;  // copy of the input, seq_len_in x feature_dim
    LayerCache<T> l1, l2;
    std::vector<T> logits, probs;
};

// Numerically stable softmax; sums accumulated in double.
template <class T>
void softmax(std::span<const T> logits, std::span<T> probs) {
    T zmax = -std::numeric_limits<T>::infinity();
    for (auto z : logits) {
        if (!std::isfinite(double(z))) throw NumericError("non-finite logit");
        zmax = std::max(zmax, z);
    }
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - zmax);
        sum += double(probs[i]);
    }
    for (auto& p : probs) p = T(double(p) / sum);
}

template <class T>
T cross_entropy(std::span<const T> probs, int label_index) {
    if (label_index < 0 || std::size_t(label_index) >= probs.size())
        throw UsageError("label index out of range");
    return -std::log(probs[std::size_t(label_index)]);
}

// log-sum-exp form; stays finite even when probs[label] underflows.
template <class T>
T cross_entropy_from_logits(std::span<const T> logits, int label_index) {
    if (label_index < 0 || std::size_t(label_index) >= logits.size())
        throw UsageError("label index out of range");
    T zmax = -std::numeric_limits<T>::infinity();
    for (auto z : logits) zmax = std::max(zmax, z);
    double sum = 0;
    for (auto z : logits) sum += std::exp(double(z - zmax));
    return T(std::log(sum)) - (logits[std::size_t(label_index)] - zmax);
}

template <class T>
void lstm_layer_forward(const LstmLayer<T>& L, const T* x_seq, int steps,
                        LayerCache<T>& cache) {
    const int H = L.hidden;
    cache.steps.assign(std::size_t(steps), {});
    std::vector<T> h(std::size_t(H), T(0)), c(std::size_t(H), T(0));
    std::vector<T> z(std::size_t(4) * H);
    for (int t = 0; t < steps; ++t) {
        const T* xt = x_seq + std::size_t(t) * std::size_t(L.in_dim);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = L.b[i];
        gemv(L.W, xt, z.data(), true);
        gemv(L.U, h.data(), z.data(), true);
        auto& s = cache.steps[std::size_t(t)];
        s.gi.resize(std::size_t(H)); s.gf.resize(std::size_t(H));
        s.go.resize(std::size_t(H)); s.gg.resize(std::size_t(H));
        s.c.resize(std::size_t(H)); s.tc.resize(std::size_t(H)); s.h.resize(std::size_t(H));
        for (int j = 0; j < H; ++j) {
            const T zi = z[std::size_t(j)];
            const T zf = z[std::size_t(H + j)];
            const T zo = z[std::size_t(2 * H + j)];
            const T zg = z[std::size_t(3 * H + j)];
            const T gi = T(1) / (T(1) + std::exp(-zi));
            const T gf = T(1) / (T(1) + std::exp(-zf));
            const T go = T(1) / (T(1) + std::exp(-zo));
            const T gg = std::tanh(zg);
            const T cj = gf * c[std::size_t(j)] + gi * gg;
            const T tcj = std::tanh(cj);
            s.gi[std::size_t(j)] = gi; s.gf[std::size_t(j)] = gf;
            s.go[std::size_t(j)] = go; s.gg[std::size_t(j)] = gg;
            s.c[std::size_t(j)] = cj; s.tc[std::size_t(j)] = tcj;
            c[std::size_t(j)] = cj;
            h[std::size_t(j)] = go * tcj;
            s.h[std::size_t(j)] = h[std::size_t(j)];
        }
    }
}

// x is seq_len_in rows by feature_dim columns, row-major.
template <class T>
std::vector<T> forward(const ModelParams<T>& p, std::span<const T> x,
                       ForwardCache<T>* cache = nullptr) {
    const auto& cfg = p.cfg;
    if (std::int64_t(x.size()) != std::int64_t(cfg.seq_len_in) * cfg.feature_dim)
        throw UsageError("forward: input shape mismatch");
    for (auto v : x)
        if (!std::isfinite(double(v))) throw NumericError("non-finite input feature");

    ForwardCache<T> local;
    ForwardCache<T>& cc = cache ? *cache : local;
    cc.params_version = p.version;
    cc.cfg = cfg;
    cc.x.assign(x.begin(), x.end());

    lstm_layer_forward(p.l1, cc.x.data(), cfg.seq_len_in, cc.l1);
    std::vector<T> h1_seq(std::size_t(cfg.seq_len_in) * std::size_t(cfg.hidden1));
    for (int t = 0; t < cfg.seq_len_in; ++t)
        std::copy(cc.l1.steps[std::size_t(t)].h.begin(), cc.l1.steps[std::size_t(t)].h.end(),
                  h1_seq.begin() + std::ptrdiff_t(t) * cfg.hidden1);
    lstm_layer_forward(p.l2, h1_seq.data(), cfg.seq_len_in, cc.l2);

    const auto& h2 = cc.l2.steps.back().h;
    cc.logits.assign(std::size_t(cfg.n_outputs), T(0));
    for (int r = 0; r < cfg.n_outputs; ++r) cc.logits[std::size_t(r)] = p.out.b[std::size_t(r)];
    gemv(p.out.W, h2.data(), cc.logits.data(), true);

    cc.probs.resize(std::size_t(cfg.n_outputs));
    softmax<T>(cc.logits, cc.probs);
    return cc.probs;
}

// Backward through one layer given per-step gradients flowing into h.
// dh_in[t] may be empty (no injection at that step). Returns, via dx_out,
// the gradient with respect to the layer's inputs (skipped when null).
template <class T>
void lstm_layer_backward(const LstmLayer<T>& L, const LayerCache<T>& cache,
                         const T* x_seq, const std::vector<std::vector<T>>& dh_in,
                         LstmLayer<T>& grads, std::vector<std::vector<T>>* dx_out) {
    const int H = L.hidden;
    const int steps = int(cache.steps.size());
    std::vector<T> dh(std::size_t(H), T(0)), dc(std::size_t(H), T(0));
    std::vector<T> dz(std::size_t(4) * H);
    if (dx_out) dx_out->assign(std::size_t(steps), std::vector<T>(std::size_t(L.in_dim), T(0)));

    for (int t = steps - 1; t >= 0; --t) {
        const auto& s = cache.steps[std::size_t(t)];
        if (!dh_in[std::size_t(t)].empty())
            for (int j = 0; j < H; ++j) dh[std::size_t(j)] += dh_in[std::size_t(t)][std::size_t(j)];

        const std::vector<T>* c_prev = t > 0 ? &cache.steps[std::size_t(t) - 1].c : nullptr;
        const std::vector<T>* h_prev = t > 0 ? &cache.steps[std::size_t(t) - 1].h : nullptr;

        for (int j = 0; j < H; ++j) {
            const T gi = s.gi[std::size_t(j)], gf = s.gf[std::size_t(j)];
            const T go = s.go[std::size_t(j)], gg = s.gg[std::size_t(j)];
            const T tc = s.tc[std::size_t(j)];
            const T dhj = dh[std::size_t(j)];
            const T dcj = dhj * go * (T(1) - tc * tc) + dc[std::size_t(j)];
            const T cp = c_prev ? (*c_prev)[std::size_t(j)] : T(0);
            dz[std::size_t(j)] = dcj * gg * gi * (T(1) - gi);                    // d z_i
            dz[std::size_t(H + j)] = dcj * cp * gf * (T(1) - gf);                // d z_f
            dz[std::size_t(2 * H + j)] = dhj * tc * go * (T(1) - go);            // d z_o
            dz[std::size_t(3 * H + j)] = dcj * gi * (T(1) - gg * gg);            // d z_g
            dc[std::size_t(j)] = dcj * gf;
        }

        const T* xt = x_seq + std::size_t(t) * std::size_t(L.in_dim);
        add_outer(grads.W, dz.data(), xt);
        const T* hp;
        std::vector<T> zeros;
        if (h_prev) {
            hp = h_prev->data();
        } else {
            zeros.assign(std::size_t(H), T(0));
            hp = zeros.data();
        }
        add_outer(grads.U, dz.data(), hp);
        for (std::size_t i = 0; i < grads.b.size(); ++i) grads.b[i] += dz[i];

        if (dx_out) gemv_t(L.W, dz.data(), (*dx_out)[std::size_t(t)].data(), false);
        // gradient into the previous hidden state
        gemv_t(L.U, dz.data(), dh.data(), false);
    }
}

// Analytic gradients of -log probs[label] with respect to every parameter.
// Gradients accumulate into `grads` so batches can sum then average.
template <class T>
void backward(const ModelParams<T>& p, const ForwardCache<T>& cache, int label_index,
              ModelParams<T>& grads) {
    const auto& cfg = p.cfg;
    if (cache.params_version != p.version)
        throw UsageError("backward: cache is stale (parameters changed since forward)");
    if (label_index < 0 || label_index >= cfg.n_outputs)
        throw UsageError("backward: label index out of range");

    // softmax + cross-entropy: d loss / d logits = probs - onehot
    std::vector<T> dlogits(cache.probs.begin(), cache.probs.end());
    dlogits[std::size_t(label_index)] -= T(1);

    const auto& h2 = cache.l2.steps.back().h;
    add_outer(grads.out.W, dlogits.data(), h2.data());
    for (std::size_t i = 0; i < grads.out.b.size(); ++i) grads.out.b[i] += dlogits[i];

    std::vector<std::vector<T>> dh2(std::size_t(cfg.seq_len_in));
    dh2.back().assign(std::size_t(cfg.hidden2), T(0));
    gemv_t(p.out.W, dlogits.data(), dh2.back().data(), false);

    std::vector<T> h1_seq(std::size_t(cfg.seq_len_in) * std::size_t(cfg.hidden1));
    for (int t = 0; t < cfg.seq_len_in; ++t)
        std::copy(cache.l1.steps[std::size_t(t)].h.begin(),
                  cache.l1.steps[std::size_t(t)].h.end(),
                  h1_seq.begin() + std::ptrdiff_t(t) * cfg.hidden1);

    std::vector<std::vector<T>> dh1;
    lstm_layer_backward(p.l2, cache.l2, h1_seq.data(), dh2, grads.l2, &dh1);
    // input features are constants; no dx from layer 1
    lstm_layer_backward(p.l1, cache.l1, cache.x.data(), dh1, grads.l1,
                        static_cast<std::vector<std::vector<T>>*>(nullptr));
}

template <class T>
struct AdamState {
    std::vector<T> m, v;
    std::int64_t t = 0;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(std::size_t n_params, double lr_ = 1e-3, double b1 = 0.9,
                       double b2 = 0.999, double e = 1e-8)
        : m(n_params, T(0)), v(n_params, T(0)), lr(lr_), beta1(b1), beta2(b2), eps(e) {}
};

template <class T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& st) {
    grads.for_each_tensor([&](const std::vector<T>& g) {
        for (auto x : g)
            if (!std::isfinite(double(x))) throw NumericError("diverged: non-finite gradient");
    });
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
    std::size_t off = 0;
    auto upd = [&](std::vector<T>& w, const std::vector<T>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = double(g[i]);
            const double mi = st.beta1 * double(st.m[off + i]) + (1 - st.beta1) * gi;
            const double vi = st.beta2 * double(st.v[off + i]) + (1 - st.beta2) * gi * gi;
            st.m[off + i] = T(mi);
            st.v[off + i] = T(vi);
            w[i] = T(double(w[i]) - st.lr * (mi / bc1) / (std::sqrt(vi / bc2) + st.eps));
        }
        off += w.size();
    };
    // tensor order mirrors for_each_tensor
    upd(params.l1.W.a, grads.l1.W.a);
    upd(params.l1.U.a, grads.l1.U.a);
    upd(params.l1.b, grads.l1.b);
    upd(params.l2.W.a, grads.l2.W.a);
    upd(params.l2.U.a, grads.l2.U.a);
    upd(params.l2.b, grads.l2.b);
    upd(params.out.W.a, grads.out.W.a);
    upd(params.out.b, grads.out.b);
    params.version += 1;
}

// Central finite differences against the analytic gradients for an explicit
// parameter set; returns max over coordinates of |a-n| / max(|a|,|n|,1e-8).
double gradient_check_params(ModelParams<double>& params, std::span<const double> x,
                             int label_index, double fd_eps = 1e-5);

// Random tiny model + random input, seeded.
double gradient_check(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace lstm
}  // namespace ordrec
