#include "cabrita/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "cabrita/error.hpp"

namespace cabrita {

// ---------------------------------------------------------------------------
// TypedModel
// ---------------------------------------------------------------------------

template <typename T>
TypedModel<T> TypedModel<T>::from_checkpoint(const Checkpoint& ckpt) {
    TypedModel<T> m;
    m.config = ckpt.config;
    m.tensors.reserve(ckpt.tensors.size());
    for (const Tensor& t : ckpt.tensors) {
        TypedTensor<T> tt;
        tt.name = t.name;
        tt.shape = t.shape;
        tt.data.assign(t.data.begin(), t.data.end());
        m.tensors.push_back(std::move(tt));
    }
    return m;
}

template <typename T>
Checkpoint TypedModel<T>::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.config = config;
    ckpt.tensors.reserve(tensors.size());
    for (const TypedTensor<T>& tt : tensors) {
        Tensor t;
        t.name = tt.name;
        t.shape = tt.shape;
        t.data.resize(tt.data.size());
        for (std::size_t i = 0; i < tt.data.size(); ++i) t.data[i] = static_cast<float>(tt.data[i]);
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

template <typename T>
TypedModel<T> TypedModel<T>::zeros_like() const {
    TypedModel<T> z;
    z.config = config;
    z.tensors.reserve(tensors.size());
    for (const TypedTensor<T>& tt : tensors) {
        TypedTensor<T> zt;
        zt.name = tt.name;
        zt.shape = tt.shape;
        zt.data.assign(tt.data.size(), T(0));
        z.tensors.push_back(std::move(zt));
    }
    return z;
}

template <typename T>
const TypedTensor<T>& TypedModel<T>::at(std::string_view name) const {
    for (const TypedTensor<T>& t : tensors)
        if (t.name == name) return t;
    throw DataError("model has no tensor named " + std::string(name));
}

template <typename T>
TypedTensor<T>& TypedModel<T>::at(std::string_view name) {
    for (TypedTensor<T>& t : tensors)
        if (t.name == name) return t;
    throw DataError("model has no tensor named " + std::string(name));
}

// ---------------------------------------------------------------------------
// Elementary ops
// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> rmsnorm(const std::vector<T>& x, const std::vector<T>& gain, T eps) {
    if (x.size() != gain.size()) throw DataError("rmsnorm: gain size must match input size");
    if (x.empty()) throw DataError("rmsnorm: empty input");
    T sum = T(0);
    for (T v : x) sum += v * v;
    const T r = std::sqrt(sum / static_cast<T>(x.size()) + eps);
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / r * gain[i];
    return y;
}

template <typename T>
std::vector<T> rope_apply(const std::vector<T>& x, int64_t seq, int64_t d_head,
                          const std::vector<int64_t>& positions, double base) {
    if (d_head <= 0 || d_head % 2 != 0) throw DataError("rope: d_head must be positive and even");
    if (x.size() != static_cast<std::size_t>(seq * d_head))
        throw DataError("rope: input is not seq x d_head");
    if (positions.size() != static_cast<std::size_t>(seq))
        throw DataError("rope: one position per row required");
    if (base <= 0.0) throw DataError("rope: base must be positive");

    std::vector<T> y(x.size());
    for (int64_t t = 0; t < seq; ++t) {
        const T* row = x.data() + t * d_head;
        T* out = y.data() + t * d_head;
        for (int64_t i = 0; i < d_head / 2; ++i) {
            const double angle =
                static_cast<double>(positions[static_cast<std::size_t>(t)]) *
                std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d_head));
            const T c = static_cast<T>(std::cos(angle));
            const T s = static_cast<T>(std::sin(angle));
            const T x0 = row[2 * i], x1 = row[2 * i + 1];
            out[2 * i] = x0 * c - x1 * s;
            out[2 * i + 1] = x0 * s + x1 * c;
        }
    }
    return y;
}

namespace {

template <typename T>
T silu(T z) {
    return z / (T(1) + std::exp(-z));
}

// y += W x, W row-major [out x in]
template <typename T>
void matvec_acc(const T* W, const T* x, T* y, int64_t out, int64_t in) {
    for (int64_t o = 0; o < out; ++o) {
        T acc = T(0);
        const T* row = W + o * in;
        for (int64_t i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] += acc;
    }
}

// dx += W^T dy
template <typename T>
void matvec_t_acc(const T* W, const T* dy, T* dx, int64_t out, int64_t in) {
    for (int64_t o = 0; o < out; ++o) {
        const T d = dy[o];
        const T* row = W + o * in;
        for (int64_t i = 0; i < in; ++i) dx[i] += row[i] * d;
    }
}

// dW += dy ⊗ x
template <typename T>
void outer_acc(T* dW, const T* dy, const T* x, int64_t out, int64_t in) {
    for (int64_t o = 0; o < out; ++o) {
        T* row = dW + o * in;
        const T d = dy[o];
        for (int64_t i = 0; i < in; ++i) row[i] += d * x[i];
    }
}

} // namespace

template <typename T>
std::vector<T> swiglu_ffn(const std::vector<T>& x, const std::vector<T>& w1,
                          const std::vector<T>& w3, const std::vector<T>& w2, int64_t d_ff,
                          int64_t d_model) {
    if (x.size() != static_cast<std::size_t>(d_model)) throw DataError("swiglu: bad input size");
    if (w1.size() != static_cast<std::size_t>(d_ff * d_model) || w3.size() != w1.size())
        throw DataError("swiglu: w1/w3 must be d_ff x d_model");
    if (w2.size() != static_cast<std::size_t>(d_model * d_ff))
        throw DataError("swiglu: w2 must be d_model x d_ff");

    std::vector<T> a(static_cast<std::size_t>(d_ff), T(0));
    std::vector<T> b(static_cast<std::size_t>(d_ff), T(0));
    matvec_acc(w1.data(), x.data(), a.data(), d_ff, d_model);
    matvec_acc(w3.data(), x.data(), b.data(), d_ff, d_model);
    for (int64_t i = 0; i < d_ff; ++i)
        a[static_cast<std::size_t>(i)] = silu(a[static_cast<std::size_t>(i)]) *
                                         b[static_cast<std::size_t>(i)];
    std::vector<T> y(static_cast<std::size_t>(d_model), T(0));
    matvec_acc(w2.data(), a.data(), y.data(), d_model, d_ff);
    return y;
}

// ---------------------------------------------------------------------------
// Full model forward/backward
// ---------------------------------------------------------------------------

namespace {

template <typename T>
struct LayerRefs {
    const T *attn_norm = nullptr, *wq = nullptr, *wk = nullptr, *wv = nullptr, *wo = nullptr,
            *ffn_norm = nullptr, *w1 = nullptr, *w3 = nullptr, *w2 = nullptr;
};

template <typename T>
struct ModelRefs {
    const T* embedding = nullptr;
    const T* final_norm = nullptr;
    const T* head = nullptr;
    std::vector<LayerRefs<T>> layers;
};

template <typename T>
ModelRefs<T> bind_refs(const TypedModel<T>& m) {
    ModelRefs<T> r;
    r.embedding = m.at("embedding").data.data();
    r.final_norm = m.at("final_norm").data.data();
    r.head = m.at("head").data.data();
    r.layers.resize(static_cast<std::size_t>(m.config.n_layers));
    for (int32_t l = 0; l < m.config.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        LayerRefs<T>& lr = r.layers[static_cast<std::size_t>(l)];
        lr.attn_norm = m.at(p + "attn_norm").data.data();
        lr.wq = m.at(p + "wq").data.data();
        lr.wk = m.at(p + "wk").data.data();
        lr.wv = m.at(p + "wv").data.data();
        lr.wo = m.at(p + "wo").data.data();
        lr.ffn_norm = m.at(p + "ffn_norm").data.data();
        lr.w1 = m.at(p + "w1").data.data();
        lr.w3 = m.at(p + "w3").data.data();
        lr.w2 = m.at(p + "w2").data.data();
    }
    return r;
}

template <typename T>
struct MutLayerRefs {
    T *attn_norm = nullptr, *wq = nullptr, *wk = nullptr, *wv = nullptr, *wo = nullptr,
      *ffn_norm = nullptr, *w1 = nullptr, *w3 = nullptr, *w2 = nullptr;
};

template <typename T>
struct MutModelRefs {
    T* embedding = nullptr;
    T* final_norm = nullptr;
    T* head = nullptr;
    std::vector<MutLayerRefs<T>> layers;
};

template <typename T>
MutModelRefs<T> bind_mut_refs(TypedModel<T>& m) {
    MutModelRefs<T> r;
    r.embedding = m.at("embedding").data.data();
    r.final_norm = m.at("final_norm").data.data();
    r.head = m.at("head").data.data();
    r.layers.resize(static_cast<std::size_t>(m.config.n_layers));
    for (int32_t l = 0; l < m.config.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        MutLayerRefs<T>& lr = r.layers[static_cast<std::size_t>(l)];
        lr.attn_norm = m.at(p + "attn_norm").data.data();
        lr.wq = m.at(p + "wq").data.data();
        lr.wk = m.at(p + "wk").data.data();
        lr.wv = m.at(p + "wv").data.data();
        lr.wo = m.at(p + "wo").data.data();
        lr.ffn_norm = m.at(p + "ffn_norm").data.data();
        lr.w1 = m.at(p + "w1").data.data();
        lr.w3 = m.at(p + "w3").data.data();
        lr.w2 = m.at(p + "w2").data.data();
    }
    return r;
}

// Everything backward needs, for one layer and one sequence.
template <typename T>
struct LayerCache {
    std::vector<T> x_in, h1; // [S x d]
    std::vector<T> r1;       // [S]
    std::vector<T> q, k, v;  // [S x d], q/k post-rotation
    std::vector<T> probs;    // [H x S x S]
    std::vector<T> ctx;      // [S x d]
    std::vector<T> x_mid, h2;
    std::vector<T> r2;
    std::vector<T> a, b3, s; // [S x ff]
};

template <typename T>
struct SeqCache {
    std::vector<LayerCache<T>> layers;
    std::vector<T> x_out; // [S x d] residual stream before the final norm
    std::vector<T> r_f;   // [S]
    std::vector<T> xf;    // [S x d]
};

// y = rmsnorm(x) with gain, returns r for the cache.
template <typename T>
T rmsnorm_row(const T* x, const T* gain, int64_t n, T eps, T* y) {
    T sum = T(0);
    for (int64_t i = 0; i < n; ++i) sum += x[i] * x[i];
    const T r = std::sqrt(sum / static_cast<T>(n) + eps);
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] / r * gain[i];
    return r;
}

// Accumulates dgain and dx for y = x/r * gain.
template <typename T>
void rmsnorm_row_back(const T* x, const T* gain, T r, int64_t n, const T* dy, T* dx, T* dgain) {
    T s = T(0);
    for (int64_t i = 0; i < n; ++i) s += dy[i] * gain[i] * x[i];
    const T r3 = r * r * r;
    for (int64_t i = 0; i < n; ++i) {
        dx[i] += dy[i] * gain[i] / r - x[i] * s / (static_cast<T>(n) * r3);
        if (dgain) dgain[i] += dy[i] * x[i] / r;
    }
}

template <typename T>
void rope_rows(T* x, int64_t seq, int64_t n_heads, int64_t d_head, double base, bool inverse) {
    for (int64_t t = 0; t < seq; ++t) {
        for (int64_t h = 0; h < n_heads; ++h) {
            T* head_ptr = x + t * n_heads * d_head + h * d_head;
            for (int64_t i = 0; i < d_head / 2; ++i) {
                const double angle =
                    static_cast<double>(t) *
                    std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d_head));
                T c = static_cast<T>(std::cos(angle));
                T s = static_cast<T>(std::sin(angle));
                if (inverse) s = -s;
                const T x0 = head_ptr[2 * i], x1 = head_ptr[2 * i + 1];
                head_ptr[2 * i] = x0 * c - x1 * s;
                head_ptr[2 * i + 1] = x0 * s + x1 * c;
            }
        }
    }
}

// Runs one sequence through the model. If cache is non-null every
// intermediate needed by the backward pass is stored. Returns [S x V] logits.
template <typename T>
std::vector<T> forward_one(const ModelRefs<T>& refs, const ModelConfig& cfg,
                           const std::vector<uint32_t>& tokens, SeqCache<T>* cache) {
    const int64_t S = static_cast<int64_t>(tokens.size());
    const int64_t d = cfg.d_model;
    const int64_t H = cfg.n_heads;
    const int64_t dh = d / H;
    const int64_t ff = cfg.d_ff;
    const int64_t V = cfg.vocab_size;
    const T eps = static_cast<T>(cfg.rmsnorm_eps);

    if (S < 1) throw DataError("forward: empty sequence");
    if (S > cfg.max_seq_len)
        throw DataError("forward: sequence length " + std::to_string(S) +
                        " exceeds the configured maximum " + std::to_string(cfg.max_seq_len));
    if (dh % 2 != 0) throw DataError("forward: head dimension must be even");
    for (uint32_t id : tokens)
        if (static_cast<int64_t>(id) >= V)
            throw DataError("forward: token id " + std::to_string(id) +
                            " outside vocabulary of size " + std::to_string(V));

    if (cache) cache->layers.resize(static_cast<std::size_t>(cfg.n_layers));

    std::vector<T> x(static_cast<std::size_t>(S * d));
    for (int64_t t = 0; t < S; ++t)
        std::memcpy(x.data() + t * d, refs.embedding + static_cast<int64_t>(tokens[t]) * d,
                    sizeof(T) * static_cast<std::size_t>(d));

    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    std::vector<T> h1(static_cast<std::size_t>(S * d));
    std::vector<T> q(static_cast<std::size_t>(S * d)), k(q), v(q), ctx(q);
    std::vector<T> probs(static_cast<std::size_t>(H * S * S));
    std::vector<T> r1(static_cast<std::size_t>(S)), r2(r1);
    std::vector<T> a(static_cast<std::size_t>(S * ff)), b3(a), s(a);
    std::vector<T> h2(static_cast<std::size_t>(S * d));

    for (int32_t l = 0; l < cfg.n_layers; ++l) {
        const LayerRefs<T>& L = refs.layers[static_cast<std::size_t>(l)];
        LayerCache<T>* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
        if (lc) lc->x_in = x;

        for (int64_t t = 0; t < S; ++t)
            r1[static_cast<std::size_t>(t)] =
                rmsnorm_row(x.data() + t * d, L.attn_norm, d, eps, h1.data() + t * d);

        std::fill(q.begin(), q.end(), T(0));
        std::fill(k.begin(), k.end(), T(0));
        std::fill(v.begin(), v.end(), T(0));
        for (int64_t t = 0; t < S; ++t) {
            matvec_acc(L.wq, h1.data() + t * d, q.data() + t * d, d, d);
            matvec_acc(L.wk, h1.data() + t * d, k.data() + t * d, d, d);
            matvec_acc(L.wv, h1.data() + t * d, v.data() + t * d, d, d);
        }
        rope_rows(q.data(), S, H, dh, cfg.rope_base, false);
        rope_rows(k.data(), S, H, dh, cfg.rope_base, false);

        std::fill(ctx.begin(), ctx.end(), T(0));
        std::fill(probs.begin(), probs.end(), T(0));
        for (int64_t h = 0; h < H; ++h) {
            for (int64_t t = 0; t < S; ++t) {
                const T* qt = q.data() + t * d + h * dh;
                T* prow = probs.data() + (h * S + t) * S;
                T best = -std::numeric_limits<T>::infinity();
                for (int64_t u = 0; u <= t; ++u) {
                    const T* ku = k.data() + u * d + h * dh;
                    T dot = T(0);
                    for (int64_t i = 0; i < dh; ++i) dot += qt[i] * ku[i];
                    prow[u] = dot * scale;
                    best = std::max(best, prow[u]);
                }
                T denom = T(0);
                for (int64_t u = 0; u <= t; ++u) {
                    prow[u] = std::exp(prow[u] - best);
                    denom += prow[u];
                }
                T* ct = ctx.data() + t * d + h * dh;
                for (int64_t u = 0; u <= t; ++u) {
                    prow[u] /= denom;
                    const T* vu = v.data() + u * d + h * dh;
                    for (int64_t i = 0; i < dh; ++i) ct[i] += prow[u] * vu[i];
                }
            }
        }
        if (lc) {
            lc->h1 = h1;
            lc->r1 = r1;
            lc->q = q;
            lc->k = k;
            lc->v = v;
            lc->probs = probs;
            lc->ctx = ctx;
        }
        for (int64_t t = 0; t < S; ++t) matvec_acc(L.wo, ctx.data() + t * d, x.data() + t * d, d, d);

        if (lc) lc->x_mid = x;
        for (int64_t t = 0; t < S; ++t)
            r2[static_cast<std::size_t>(t)] =
                rmsnorm_row(x.data() + t * d, L.ffn_norm, d, eps, h2.data() + t * d);

        std::fill(a.begin(), a.end(), T(0));
        std::fill(b3.begin(), b3.end(), T(0));
        for (int64_t t = 0; t < S; ++t) {
            matvec_acc(L.w1, h2.data() + t * d, a.data() + t * ff, ff, d);
            matvec_acc(L.w3, h2.data() + t * d, b3.data() + t * ff, ff, d);
        }
        for (int64_t i = 0; i < S * ff; ++i)
            s[static_cast<std::size_t>(i)] = silu(a[static_cast<std::size_t>(i)]) *
                                             b3[static_cast<std::size_t>(i)];
        if (lc) {
            lc->h2 = h2;
            lc->r2 = r2;
            lc->a = a;
            lc->b3 = b3;
            lc->s = s;
        }
        for (int64_t t = 0; t < S; ++t) matvec_acc(L.w2, s.data() + t * ff, x.data() + t * d, d, ff);
    }

    std::vector<T> xf(static_cast<std::size_t>(S * d));
    std::vector<T> rf(static_cast<std::size_t>(S));
    for (int64_t t = 0; t < S; ++t)
        rf[static_cast<std::size_t>(t)] =
            rmsnorm_row(x.data() + t * d, refs.final_norm, d, eps, xf.data() + t * d);
    if (cache) {
        cache->x_out = x;
        cache->r_f = rf;
        cache->xf = xf;
    }

    std::vector<T> logits(static_cast<std::size_t>(S * V), T(0));
    for (int64_t t = 0; t < S; ++t)
        matvec_acc(refs.head, xf.data() + t * d, logits.data() + t * V, V, d);
    return logits;
}

// Backward through one sequence, accumulating parameter gradients. dlogits is
// [S x V] and already carries the loss scaling.
template <typename T>
void backward_one(const ModelRefs<T>& refs, MutModelRefs<T>& g, const ModelConfig& cfg,
                  const std::vector<uint32_t>& tokens, const SeqCache<T>& cache,
                  const std::vector<T>& dlogits) {
    const int64_t S = static_cast<int64_t>(tokens.size());
    const int64_t d = cfg.d_model;
    const int64_t H = cfg.n_heads;
    const int64_t dh = d / H;
    const int64_t ff = cfg.d_ff;
    const int64_t V = cfg.vocab_size;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    std::vector<T> dx(static_cast<std::size_t>(S * d), T(0));
    std::vector<T> dxf(static_cast<std::size_t>(S * d), T(0));

    // Head and final norm.
    for (int64_t t = 0; t < S; ++t) {
        outer_acc(g.head, dlogits.data() + t * V, cache.xf.data() + t * d, V, d);
        matvec_t_acc(refs.head, dlogits.data() + t * V, dxf.data() + t * d, V, d);
    }
    for (int64_t t = 0; t < S; ++t)
        rmsnorm_row_back(cache.x_out.data() + t * d, refs.final_norm,
                         cache.r_f[static_cast<std::size_t>(t)], d, dxf.data() + t * d,
                         dx.data() + t * d, g.final_norm);

    std::vector<T> dh1(static_cast<std::size_t>(S * d));
    std::vector<T> dh2(static_cast<std::size_t>(S * d));
    std::vector<T> dq(static_cast<std::size_t>(S * d)), dk(dq), dv(dq), dctx(dq);
    std::vector<T> ds_row(static_cast<std::size_t>(ff));
    std::vector<T> da_row(static_cast<std::size_t>(ff)), db_row(static_cast<std::size_t>(ff));
    std::vector<T> dp(static_cast<std::size_t>(S));

    for (int32_t l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerRefs<T>& L = refs.layers[static_cast<std::size_t>(l)];
        MutLayerRefs<T>& G = g.layers[static_cast<std::size_t>(l)];
        const LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(l)];

        // FFN block: x_out_rows = x_mid + W2 s. dx covers both paths; the
        // residual share stays in dx and the FFN share flows to dx via h2.
        std::fill(dh2.begin(), dh2.end(), T(0));
        for (int64_t t = 0; t < S; ++t) {
            const T* df = dx.data() + t * d;
            outer_acc(G.w2, df, lc.s.data() + t * ff, d, ff);
            std::fill(ds_row.begin(), ds_row.end(), T(0));
            matvec_t_acc(L.w2, df, ds_row.data(), d, ff);
            const T* at = lc.a.data() + t * ff;
            const T* bt = lc.b3.data() + t * ff;
            for (int64_t i = 0; i < ff; ++i) {
                const T sig = T(1) / (T(1) + std::exp(-at[i]));
                const T sil = at[i] * sig;
                db_row[static_cast<std::size_t>(i)] = ds_row[static_cast<std::size_t>(i)] * sil;
                da_row[static_cast<std::size_t>(i)] =
                    ds_row[static_cast<std::size_t>(i)] * bt[i] *
                    (sig + at[i] * sig * (T(1) - sig));
            }
            outer_acc(G.w1, da_row.data(), lc.h2.data() + t * d, ff, d);
            outer_acc(G.w3, db_row.data(), lc.h2.data() + t * d, ff, d);
            matvec_t_acc(L.w1, da_row.data(), dh2.data() + t * d, ff, d);
            matvec_t_acc(L.w3, db_row.data(), dh2.data() + t * d, ff, d);
        }
        for (int64_t t = 0; t < S; ++t)
            rmsnorm_row_back(lc.x_mid.data() + t * d, L.ffn_norm,
                             lc.r2[static_cast<std::size_t>(t)], d, dh2.data() + t * d,
                             dx.data() + t * d, G.ffn_norm);

        // Attention block: x_mid_rows = x_in + Wo ctx.
        std::fill(dctx.begin(), dctx.end(), T(0));
        for (int64_t t = 0; t < S; ++t) {
            const T* dattn = dx.data() + t * d;
            outer_acc(G.wo, dattn, lc.ctx.data() + t * d, d, d);
            matvec_t_acc(L.wo, dattn, dctx.data() + t * d, d, d);
        }

        std::fill(dq.begin(), dq.end(), T(0));
        std::fill(dk.begin(), dk.end(), T(0));
        std::fill(dv.begin(), dv.end(), T(0));
        for (int64_t h = 0; h < H; ++h) {
            for (int64_t t = 0; t < S; ++t) {
                const T* dct = dctx.data() + t * d + h * dh;
                const T* prow = lc.probs.data() + (h * S + t) * S;
                T pd_sum = T(0);
                for (int64_t u = 0; u <= t; ++u) {
                    const T* vu = lc.v.data() + u * d + h * dh;
                    T dpu = T(0);
                    for (int64_t i = 0; i < dh; ++i) dpu += dct[i] * vu[i];
                    dp[static_cast<std::size_t>(u)] = dpu;
                    pd_sum += prow[u] * dpu;
                    T* dvu = dv.data() + u * d + h * dh;
                    for (int64_t i = 0; i < dh; ++i) dvu[i] += prow[u] * dct[i];
                }
                const T* qt = lc.q.data() + t * d + h * dh;
                T* dqt = dq.data() + t * d + h * dh;
                for (int64_t u = 0; u <= t; ++u) {
                    const T dscore = prow[u] * (dp[static_cast<std::size_t>(u)] - pd_sum) * scale;
                    const T* ku = lc.k.data() + u * d + h * dh;
                    T* dku = dk.data() + u * d + h * dh;
                    for (int64_t i = 0; i < dh; ++i) {
                        dqt[i] += dscore * ku[i];
                        dku[i] += dscore * qt[i];
                    }
                }
            }
        }
        // Rotation is orthonormal, so the gradient maps back through the
        // inverse rotation.
        rope_rows(dq.data(), S, H, dh, cfg.rope_base, true);
        rope_rows(dk.data(), S, H, dh, cfg.rope_base, true);

        std::fill(dh1.begin(), dh1.end(), T(0));
        for (int64_t t = 0; t < S; ++t) {
            outer_acc(G.wq, dq.data() + t * d, lc.h1.data() + t * d, d, d);
            outer_acc(G.wk, dk.data() + t * d, lc.h1.data() + t * d, d, d);
            outer_acc(G.wv, dv.data() + t * d, lc.h1.data() + t * d, d, d);
            matvec_t_acc(L.wq, dq.data() + t * d, dh1.data() + t * d, d, d);
            matvec_t_acc(L.wk, dk.data() + t * d, dh1.data() + t * d, d, d);
            matvec_t_acc(L.wv, dv.data() + t * d, dh1.data() + t * d, d, d);
        }
        for (int64_t t = 0; t < S; ++t)
            rmsnorm_row_back(lc.x_in.data() + t * d, L.attn_norm,
                             lc.r1[static_cast<std::size_t>(t)], d, dh1.data() + t * d,
                             dx.data() + t * d, G.attn_norm);
        // dx now holds the gradient at this layer's input.
    }

    for (int64_t t = 0; t < S; ++t) {
        T* erow = g.embedding + static_cast<int64_t>(tokens[static_cast<std::size_t>(t)]) * d;
        const T* dxt = dx.data() + t * d;
        for (int64_t i = 0; i < d; ++i) erow[i] += dxt[i];
    }
}

} // namespace

template <typename T>
std::vector<T> forward(const TypedModel<T>& model,
                       const std::vector<std::vector<uint32_t>>& tokens) {
    if (tokens.empty()) return {};
    const std::size_t S = tokens.front().size();
    for (const std::vector<uint32_t>& seq : tokens)
        if (seq.size() != S) throw DataError("forward: ragged batch");
    ModelRefs<T> refs = bind_refs(model);
    std::vector<T> out;
    out.reserve(tokens.size() * S * static_cast<std::size_t>(model.config.vocab_size));
    for (const std::vector<uint32_t>& seq : tokens) {
        std::vector<T> logits = forward_one<T>(refs, model.config, seq, nullptr);
        out.insert(out.end(), logits.begin(), logits.end());
    }
    return out;
}

std::vector<float> forward(const Checkpoint& ckpt,
                           const std::vector<std::vector<uint32_t>>& tokens) {
    return forward(TypedModel<float>::from_checkpoint(ckpt), tokens);
}

template <typename T>
T causal_lm_loss(const std::vector<T>& logits, const std::vector<uint32_t>& targets,
                 int64_t vocab) {
    if (vocab <= 0) throw DataError("loss: vocabulary must be positive");
    if (targets.empty()) throw DataError("loss: no targets");
    if (logits.size() != targets.size() * static_cast<std::size_t>(vocab))
        throw DataError("loss: logits are not targets x vocab");

    double total = 0.0;
    for (std::size_t n = 0; n < targets.size(); ++n) {
        if (static_cast<int64_t>(targets[n]) >= vocab)
            throw DataError("loss: target id outside vocabulary");
        const T* row = logits.data() + n * static_cast<std::size_t>(vocab);
        T best = row[0];
        for (int64_t i = 1; i < vocab; ++i) best = std::max(best, row[i]);
        double denom = 0.0;
        for (int64_t i = 0; i < vocab; ++i)
            denom += std::exp(static_cast<double>(row[i]) - static_cast<double>(best));
        total += std::log(denom) + static_cast<double>(best) -
                 static_cast<double>(row[targets[n]]);
    }
    return static_cast<T>(total / static_cast<double>(targets.size()));
}

template <typename T>
T lm_loss_and_gradients(const TypedModel<T>& model,
                        const std::vector<std::vector<uint32_t>>& sequences, TypedModel<T>* grads,
                        T scale) {
    if (sequences.empty()) throw DataError("loss: empty batch");
    int64_t total_positions = 0;
    for (const std::vector<uint32_t>& seq : sequences) {
        if (seq.size() < 2) throw DataError("loss: sequences must have at least two tokens");
        total_positions += static_cast<int64_t>(seq.size()) - 1;
    }

    const int64_t V = model.config.vocab_size;
    ModelRefs<T> refs = bind_refs(model);
    MutModelRefs<T> grefs;
    if (grads) grefs = bind_mut_refs(*grads);

    double total_loss = 0.0;
    const T inv_positions = T(1) / static_cast<T>(total_positions);
    for (const std::vector<uint32_t>& seq : sequences) {
        std::vector<uint32_t> inputs(seq.begin(), seq.end() - 1);
        std::vector<uint32_t> targets(seq.begin() + 1, seq.end());
        for (uint32_t id : targets)
            if (static_cast<int64_t>(id) >= V) throw DataError("loss: target id outside vocabulary");

        SeqCache<T> cache;
        std::vector<T> logits =
            forward_one<T>(refs, model.config, inputs, grads ? &cache : nullptr);

        const int64_t S = static_cast<int64_t>(inputs.size());
        std::vector<T> dlogits;
        if (grads) dlogits.assign(static_cast<std::size_t>(S * V), T(0));
        for (int64_t t = 0; t < S; ++t) {
            const T* row = logits.data() + t * V;
            T best = row[0];
            for (int64_t i = 1; i < V; ++i) best = std::max(best, row[i]);
            double denom = 0.0;
            for (int64_t i = 0; i < V; ++i)
                denom += std::exp(static_cast<double>(row[i]) - static_cast<double>(best));
            const uint32_t target = targets[static_cast<std::size_t>(t)];
            total_loss += std::log(denom) + static_cast<double>(best) -
                          static_cast<double>(row[target]);
            if (grads) {
                T* drow = dlogits.data() + t * V;
                for (int64_t i = 0; i < V; ++i) {
                    const T p = static_cast<T>(
                        std::exp(static_cast<double>(row[i]) - static_cast<double>(best)) / denom);
                    drow[i] = p * inv_positions * scale;
                }
                drow[target] -= inv_positions * scale;
            }
        }
        if (grads) backward_one<T>(refs, grefs, model.config, inputs, cache, dlogits);
    }
    return static_cast<T>(total_loss / static_cast<double>(total_positions));
}

// ---------------------------------------------------------------------------
// Schedule and optimizer
// ---------------------------------------------------------------------------

double lr_at(int64_t step, const TrainingSchedule& s) {
    if (step < 0) throw DataError("schedule: negative step");
    if (s.warmup_steps < 1) throw DataError("schedule: warmup_steps must be at least 1");
    if (!(s.peak_lr > s.final_lr && s.final_lr > 0.0))
        throw DataError("schedule: require peak_lr > final_lr > 0");
    if (s.decay_steps < 0) throw DataError("schedule: negative decay_steps");

    if (step <= s.warmup_steps)
        return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
    const int64_t t = step - s.warmup_steps;
    if (t <= s.decay_steps) {
        const double frac = static_cast<double>(t) / static_cast<double>(s.decay_steps);
        return s.final_lr +
               0.5 * (s.peak_lr - s.final_lr) * (1.0 + std::cos(3.141592653589793238462643 * frac));
    }
    return s.final_lr;
}

template <typename T>
OptimizerState<T> OptimizerState<T>::like(const TypedModel<T>& model) {
    OptimizerState<T> s;
    s.m.reserve(model.tensors.size());
    s.v.reserve(model.tensors.size());
    for (const TypedTensor<T>& t : model.tensors) {
        s.m.emplace_back(t.data.size(), T(0));
        s.v.emplace_back(t.data.size(), T(0));
    }
    return s;
}

template <typename T>
double adamw_step(TypedModel<T>& params, const TypedModel<T>& grads, OptimizerState<T>& state,
                  const AdamwHyper& hyper, double lr) {
    if (grads.tensors.size() != params.tensors.size() ||
        state.m.size() != params.tensors.size() || state.v.size() != params.tensors.size())
        throw DataError("optimizer: parameter/gradient/state layouts differ");

    double norm_sq = 0.0;
    for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
        if (grads.tensors[i].data.size() != params.tensors[i].data.size())
            throw DataError("optimizer: gradient tensor size mismatch at " +
                            params.tensors[i].name);
        for (T gv : grads.tensors[i].data) {
            const double g = static_cast<double>(gv);
            norm_sq += g * g;
        }
    }
    const double norm = std::sqrt(norm_sq);
    const double clip_scale =
        (hyper.clip_norm > 0.0 && norm > hyper.clip_norm) ? hyper.clip_norm / norm : 1.0;

    state.step += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        std::vector<T>& p = params.tensors[i].data;
        const std::vector<T>& gt = grads.tensors[i].data;
        std::vector<T>& m = state.m[i];
        std::vector<T>& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = static_cast<double>(gt[j]) * clip_scale;
            const double mj = hyper.beta1 * static_cast<double>(m[j]) + (1.0 - hyper.beta1) * g;
            const double vj =
                hyper.beta2 * static_cast<double>(v[j]) + (1.0 - hyper.beta2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            const double update =
                lr * (mhat / (std::sqrt(vhat) + hyper.epsilon)) +
                lr * hyper.weight_decay * static_cast<double>(p[j]);
            p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
        }
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void zero_model(TypedModel<T>& m) {
    for (TypedTensor<T>& t : m.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
}

template <typename T>
TrainResult train_impl(const Checkpoint& start, const PackedSequences& data,
                       const TrainingSchedule& schedule, const AdamwHyper& hyper,
                       int64_t micro_batch, int64_t accumulation, int64_t steps) {
    TypedModel<T> model = TypedModel<T>::from_checkpoint(start);
    TypedModel<T> grads = model.zeros_like();
    OptimizerState<T> opt = OptimizerState<T>::like(model);

    const std::size_t n_seq = data.sequences.size();
    std::size_t cursor = 0;
    TrainResult result;
    result.trace.reserve(static_cast<std::size_t>(steps));

    std::vector<std::vector<uint32_t>> batch(static_cast<std::size_t>(micro_batch));
    for (int64_t step = 1; step <= steps; ++step) {
        zero_model(grads);
        double window_loss = 0.0;
        for (int64_t micro = 0; micro < accumulation; ++micro) {
            for (int64_t b = 0; b < micro_batch; ++b) {
                batch[static_cast<std::size_t>(b)] = data.sequences[cursor];
                cursor = (cursor + 1) % n_seq;
            }
            const T loss = lm_loss_and_gradients<T>(model, batch, &grads,
                                                    T(1) / static_cast<T>(accumulation));
            window_loss += static_cast<double>(loss) / static_cast<double>(accumulation);
        }
        const double lr = lr_at(step, schedule);
        adamw_step(model, grads, opt, hyper, lr);
        result.trace.push_back({step, lr, window_loss});
    }
    result.checkpoint = model.to_checkpoint();
    return result;
}

} // namespace

TrainResult train(const Checkpoint& start, const PackedSequences& data,
                  const TrainingSchedule& schedule, const AdamwHyper& hyper, int64_t micro_batch,
                  int64_t accumulation, int64_t steps, Precision precision) {
    if (micro_batch < 1 || accumulation < 1 || steps < 0)
        throw DataError("train: micro_batch and accumulation must be >= 1, steps >= 0");
    if (data.sequences.empty()) throw DataError("train: no training sequences");
    if (data.seq_len != start.config.max_seq_len)
        throw DataError("train: packed seq_len " + std::to_string(data.seq_len) +
                        " does not match the model maximum " +
                        std::to_string(start.config.max_seq_len));
    return precision == Precision::f64
               ? train_impl<double>(start, data, schedule, hyper, micro_batch, accumulation, steps)
               : train_impl<float>(start, data, schedule, hyper, micro_batch, accumulation, steps);
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::string out = "step,lr,loss\n";
    char buf[96];
    for (const TraceRow& row : trace) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(row.step),
                      row.lr, row.loss);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Surgery verification
// ---------------------------------------------------------------------------

SurgeryReport verify_surgery(const Checkpoint& before, const Checkpoint& after,
                             const std::vector<uint32_t>& probe_tokens) {
    if (probe_tokens.empty()) throw DataError("verify: no probe tokens");
    ModelConfig a = before.config, b = after.config;
    if (b.vocab_size < a.vocab_size)
        throw DataError("verify: the new checkpoint has a smaller vocabulary");
    b.vocab_size = a.vocab_size;
    if (!(a == b)) throw DataError("verify: checkpoints differ beyond vocabulary size");

    const std::vector<float> logits_before = forward(before, {probe_tokens});
    const std::vector<float> logits_after = forward(after, {probe_tokens});

    SurgeryReport report;
    report.old_vocab = before.config.vocab_size;
    const int64_t S = static_cast<int64_t>(probe_tokens.size());
    const int64_t v_old = before.config.vocab_size;
    const int64_t v_new = after.config.vocab_size;
    for (int64_t t = 0; t < S; ++t) {
        for (int64_t i = 0; i < v_old; ++i) {
            const double x = logits_before[static_cast<std::size_t>(t * v_old + i)];
            const double y = logits_after[static_cast<std::size_t>(t * v_new + i)];
            const double abs_dev = std::abs(x - y);
            const double denom = std::max(std::abs(x), std::abs(y));
            report.max_abs_deviation = std::max(report.max_abs_deviation, abs_dev);
            if (denom > 0.0)
                report.max_rel_deviation = std::max(report.max_rel_deviation, abs_dev / denom);
            else if (abs_dev > 0.0)
                report.max_rel_deviation = std::numeric_limits<double>::infinity();
            ++report.compared_logits;
        }
    }
    report.ok = report.max_rel_deviation <= 1e-6;
    return report;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

template struct TypedModel<float>;
template struct TypedModel<double>;
template struct OptimizerState<float>;
template struct OptimizerState<double>;

template std::vector<float> rmsnorm<float>(const std::vector<float>&, const std::vector<float>&,
                                           float);
template std::vector<double> rmsnorm<double>(const std::vector<double>&,
                                             const std::vector<double>&, double);
template std::vector<float> rope_apply<float>(const std::vector<float>&, int64_t, int64_t,
                                              const std::vector<int64_t>&, double);
template std::vector<double> rope_apply<double>(const std::vector<double>&, int64_t, int64_t,
                                                const std::vector<int64_t>&, double);
template std::vector<float> swiglu_ffn<float>(const std::vector<float>&, const std::vector<float>&,
                                              const std::vector<float>&, const std::vector<float>&,
                                              int64_t, int64_t);
template std::vector<double> swiglu_ffn<double>(const std::vector<double>&,
                                                const std::vector<double>&,
                                                const std::vector<double>&,
                                                const std::vector<double>&, int64_t, int64_t);
template std::vector<float> forward<float>(const TypedModel<float>&,
                                           const std::vector<std::vector<uint32_t>>&);
template std::vector<double> forward<double>(const TypedModel<double>&,
                                             const std::vector<std::vector<uint32_t>>&);
template float causal_lm_loss<float>(const std::vector<float>&, const std::vector<uint32_t>&,
                                     int64_t);
template double causal_lm_loss<double>(const std::vector<double>&, const std::vector<uint32_t>&,
                                       int64_t);
template float lm_loss_and_gradients<float>(const TypedModel<float>&,
                                            const std::vector<std::vector<uint32_t>>&,
                                            TypedModel<float>*, float);
template double lm_loss_and_gradients<double>(const TypedModel<double>&,
                                              const std::vector<std::vector<uint32_t>>&,
                                              TypedModel<double>*, double);
template double adamw_step<float>(TypedModel<float>&, const TypedModel<float>&,
                                  OptimizerState<float>&, const AdamwHyper&, double);
template double adamw_step<double>(TypedModel<double>&, const TypedModel<double>&,
                                   OptimizerState<double>&, const AdamwHyper&, double);

} // namespace cabrita
