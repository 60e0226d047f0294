#pragma once

// Data-parallel kernels behind the autodiff ops. Every loop is written in
// gather form: one thread owns one output element and accumulates its sum in
// a fixed index order, so results are bitwise identical for any thread count.
// Backward kernels accumulate (+=) into the destination buffers.
// A naive serial reference for these lives in ref_kernels.hpp and is used by
// the tests and the benchmark.

#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dilam::kernels {

// Work-size floor below which spawning a parallel region is not worth it.
constexpr int64_t kParGrain = 1 << 12;

template <typename T>
void conv2d_forward(const T* in, int N, int C, int H, int W, const T* w, int K, int kh, int kw,
                    const T* bias, int stride, int pad, T* out, int OH, int OW) {
    const int64_t planes = int64_t(N) * K;
#pragma omp parallel for schedule(static) if (planes * OH * OW * C * kh * kw > kParGrain)
    for (int64_t nk = 0; nk < planes; ++nk) {
        const int n = static_cast<int>(nk / K);
        const int k = static_cast<int>(nk % K);
        const T* wk = w + int64_t(k) * C * kh * kw;
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                T acc = bias ? bias[k] : T(0);
                const int h0 = oh * stride - pad;
                const int w0 = ow * stride - pad;
                for (int c = 0; c < C; ++c) {
                    const T* inc = in + (int64_t(n) * C + c) * H * W;
                    const T* wkc = wk + int64_t(c) * kh * kw;
                    for (int i = 0; i < kh; ++i) {
                        const int h = h0 + i;
                        if (h < 0 || h >= H) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int x = w0 + j;
                            if (x < 0 || x >= W) continue;
                            acc += inc[int64_t(h) * W + x] * wkc[int64_t(i) * kw + j];
                        }
                    }
                }
                out[((int64_t(n) * K + k) * OH + oh) * OW + ow] = acc;
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* dout, const T* w, int N, int C, int H, int W, int K, int kh,
                           int kw, int stride, int pad, int OH, int OW, T* din) {
    const int64_t planes = int64_t(N) * C;
#pragma omp parallel for schedule(static) if (planes * H * W * K > kParGrain)
    for (int64_t nc = 0; nc < planes; ++nc) {
        const int n = static_cast<int>(nc / C);
        const int c = static_cast<int>(nc % C);
        T* dst = din + nc * H * W;
        for (int h = 0; h < H; ++h) {
            for (int x = 0; x < W; ++x) {
                T acc = T(0);
                for (int k = 0; k < K; ++k) {
                    const T* dok = dout + (int64_t(n) * K + k) * OH * OW;
                    const T* wkc = w + (int64_t(k) * C + c) * kh * kw;
                    for (int i = 0; i < kh; ++i) {
                        const int num = h + pad - i;
                        if (num < 0 || num % stride != 0) continue;
                        const int oh = num / stride;
                        if (oh >= OH) continue;
                        for (int j = 0; j < kw; ++j) {
                            const int numw = x + pad - j;
                            if (numw < 0 || numw % stride != 0) continue;
                            const int ow = numw / stride;
                            if (ow >= OW) continue;
                            acc += dok[int64_t(oh) * OW + ow] * wkc[int64_t(i) * kw + j];
                        }
                    }
                }
                dst[int64_t(h) * W + x] += acc;
            }
        }
    }
}

template <typename T>
void conv2d_backward_weight(const T* dout, const T* in, int N, int C, int H, int W, int K, int kh,
                            int kw, int stride, int pad, int OH, int OW, T* dw) {
    const int64_t nw = int64_t(K) * C * kh * kw;
#pragma omp parallel for schedule(static) if (nw * N * OH * OW > kParGrain)
    for (int64_t idx = 0; idx < nw; ++idx) {
        const int k = static_cast<int>(idx / (int64_t(C) * kh * kw));
        const int rem = static_cast<int>(idx % (int64_t(C) * kh * kw));
        const int c = rem / (kh * kw);
        const int i = (rem / kw) % kh;
        const int j = rem % kw;
        T acc = T(0);
        for (int n = 0; n < N; ++n) {
            const T* dok = dout + (int64_t(n) * K + k) * OH * OW;
            const T* inc = in + (int64_t(n) * C + c) * H * W;
            for (int oh = 0; oh < OH; ++oh) {
                const int h = oh * stride - pad + i;
                if (h < 0 || h >= H) continue;
                for (int ow = 0; ow < OW; ++ow) {
                    const int x = ow * stride - pad + j;
                    if (x < 0 || x >= W) continue;
                    acc += dok[int64_t(oh) * OW + ow] * inc[int64_t(h) * W + x];
                }
            }
        }
        dw[idx] += acc;
    }
}

template <typename T>
void conv2d_backward_bias(const T* dout, int N, int K, int OH, int OW, T* db) {
#pragma omp parallel for schedule(static) if (int64_t(K) * N * OH * OW > kParGrain)
    for (int k = 0; k < K; ++k) {
        T acc = T(0);
        for (int n = 0; n < N; ++n) {
            const T* dok = dout + (int64_t(n) * K + k) * OH * OW;
            for (int64_t p = 0; p < int64_t(OH) * OW; ++p) acc += dok[p];
        }
        db[k] += acc;
    }
}

template <typename T>
void linear_forward(const T* in, int N, int D, const T* w, int M, const T* bias, T* out) {
#pragma omp parallel for schedule(static) if (int64_t(N) * M * D > kParGrain)
    for (int64_t nm = 0; nm < int64_t(N) * M; ++nm) {
        const int n = static_cast<int>(nm / M);
        const int m = static_cast<int>(nm % M);
        const T* row = in + int64_t(n) * D;
        const T* wm = w + int64_t(m) * D;
        T acc = bias ? bias[m] : T(0);
        for (int d = 0; d < D; ++d) acc += row[d] * wm[d];
        out[nm] = acc;
    }
}

template <typename T>
void linear_backward_input(const T* dout, const T* w, int N, int D, int M, T* din) {
#pragma omp parallel for schedule(static) if (int64_t(N) * D * M > kParGrain)
    for (int64_t nd = 0; nd < int64_t(N) * D; ++nd) {
        const int n = static_cast<int>(nd / D);
        const int d = static_cast<int>(nd % D);
        T acc = T(0);
        for (int m = 0; m < M; ++m) acc += dout[int64_t(n) * M + m] * w[int64_t(m) * D + d];
        din[nd] += acc;
    }
}

template <typename T>
void linear_backward_weight(const T* dout, const T* in, int N, int D, int M, T* dw) {
#pragma omp parallel for schedule(static) if (int64_t(M) * D * N > kParGrain)
    for (int64_t md = 0; md < int64_t(M) * D; ++md) {
        const int m = static_cast<int>(md / D);
        const int d = static_cast<int>(md % D);
        T acc = T(0);
        for (int n = 0; n < N; ++n) acc += dout[int64_t(n) * M + m] * in[int64_t(n) * D + d];
        dw[md] += acc;
    }
}

template <typename T>
void linear_backward_bias(const T* dout, int N, int M, T* db) {
    for (int m = 0; m < M; ++m) {
        T acc = T(0);
        for (int n = 0; n < N; ++n) acc += dout[int64_t(n) * M + m];
        db[m] += acc;
    }
}

// Per-channel batch statistics over (N, H, W); population variance. Two-pass
// per channel, fixed accumulation order.
template <typename T>
void channel_mean_var(const T* in, int N, int C, int H, int W, T* mean, T* var) {
    const int64_t hw = int64_t(H) * W;
    const int64_t m = int64_t(N) * hw;
#pragma omp parallel for schedule(static) if (int64_t(C) * m > kParGrain)
    for (int c = 0; c < C; ++c) {
        T sum = T(0);
        for (int n = 0; n < N; ++n) {
            const T* p = in + (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) sum += p[i];
        }
        const T mu = sum / static_cast<T>(m);
        T acc = T(0);
        for (int n = 0; n < N; ++n) {
            const T* p = in + (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const T d = p[i] - mu;
                acc += d * d;
            }
        }
        mean[c] = mu;
        var[c] = acc / static_cast<T>(m);
    }
}

/// y = gamma * (x - mean) * inv_std + beta, channel-wise; also emits xhat.
template <typename T>
void norm_apply(const T* in, int N, int C, int H, int W, const T* mean, const T* inv_std,
                const T* gamma, const T* beta, T* out, T* xhat) {
    const int64_t hw = int64_t(H) * W;
#pragma omp parallel for schedule(static) if (int64_t(N) * C * hw > kParGrain)
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
        const int c = static_cast<int>(nc % C);
        const T* p = in + nc * hw;
        T* q = out + nc * hw;
        T* xh = xhat + nc * hw;
        const T mu = mean[c], is = inv_std[c], g = gamma[c], b = beta[c];
        for (int64_t i = 0; i < hw; ++i) {
            const T h = (p[i] - mu) * is;
            xh[i] = h;
            q[i] = g * h + b;
        }
    }
}

/// Batch-stats normalization backward. din/dgamma/dbeta accumulate.
template <typename T>
void batch_norm_backward(const T* dout, const T* xhat, const T* inv_std, const T* gamma, int N,
                         int C, int H, int W, T* din, T* dgamma, T* dbeta, bool want_din) {
    const int64_t hw = int64_t(H) * W;
    const T m = static_cast<T>(int64_t(N) * hw);
#pragma omp parallel for schedule(static) if (int64_t(C) * N * hw > kParGrain)
    for (int c = 0; c < C; ++c) {
        T s1 = T(0), s2 = T(0);
        for (int n = 0; n < N; ++n) {
            const int64_t base = (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                s1 += dout[base + i];
                s2 += dout[base + i] * xhat[base + i];
            }
        }
        if (dgamma) dgamma[c] += s2;
        if (dbeta) dbeta[c] += s1;
        if (want_din) {
            const T gi = gamma[c] * inv_std[c];
            for (int n = 0; n < N; ++n) {
                const int64_t base = (int64_t(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i)
                    din[base + i] += gi * (dout[base + i] - s1 / m - xhat[base + i] * s2 / m);
            }
        }
    }
}

/// Frozen-stats normalization backward (mean/var are constants).
template <typename T>
void frozen_norm_backward(const T* dout, const T* xhat, const T* inv_std, const T* gamma, int N,
                          int C, int H, int W, T* din, T* dgamma, T* dbeta, bool want_din) {
    const int64_t hw = int64_t(H) * W;
#pragma omp parallel for schedule(static) if (int64_t(C) * N * hw > kParGrain)
    for (int c = 0; c < C; ++c) {
        T s1 = T(0), s2 = T(0);
        for (int n = 0; n < N; ++n) {
            const int64_t base = (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                s1 += dout[base + i];
                s2 += dout[base + i] * xhat[base + i];
            }
        }
        if (dgamma) dgamma[c] += s2;
        if (dbeta) dbeta[c] += s1;
        if (want_din) {
            const T gi = gamma[c] * inv_std[c];
            for (int n = 0; n < N; ++n) {
                const int64_t base = (int64_t(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) din[base + i] += gi * dout[base + i];
            }
        }
    }
}

/// Group-norm statistics and forward: per (sample, group) over Cg*H*W.
template <typename T>
void group_norm_forward(const T* in, int N, int C, int H, int W, int G, const T* gamma,
                        const T* beta, T eps, T* out, T* xhat, T* inv_std_ng) {
    const int Cg = C / G;
    const int64_t hw = int64_t(H) * W;
    const T m = static_cast<T>(int64_t(Cg) * hw);
#pragma omp parallel for schedule(static) if (int64_t(N) * G * Cg * hw > kParGrain)
    for (int64_t ng = 0; ng < int64_t(N) * G; ++ng) {
        const int n = static_cast<int>(ng / G);
        const int g = static_cast<int>(ng % G);
        T sum = T(0);
        for (int cc = 0; cc < Cg; ++cc) {
            const T* p = in + (int64_t(n) * C + g * Cg + cc) * hw;
            for (int64_t i = 0; i < hw; ++i) sum += p[i];
        }
        const T mu = sum / m;
        T acc = T(0);
        for (int cc = 0; cc < Cg; ++cc) {
            const T* p = in + (int64_t(n) * C + g * Cg + cc) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const T d = p[i] - mu;
                acc += d * d;
            }
        }
        const T is = T(1) / std::sqrt(acc / m + eps);
        inv_std_ng[ng] = is;
        for (int cc = 0; cc < Cg; ++cc) {
            const int c = g * Cg + cc;
            const int64_t base = (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const T h = (in[base + i] - mu) * is;
                xhat[base + i] = h;
                out[base + i] = gamma[c] * h + beta[c];
            }
        }
    }
}

template <typename T>
void group_norm_backward(const T* dout, const T* xhat, const T* inv_std_ng, const T* gamma, int N,
                         int C, int H, int W, int G, T* din, T* dgamma, T* dbeta, bool want_din) {
    const int Cg = C / G;
    const int64_t hw = int64_t(H) * W;
    const T m = static_cast<T>(int64_t(Cg) * hw);
    if (dgamma || dbeta) {
#pragma omp parallel for schedule(static) if (int64_t(C) * N * hw > kParGrain)
        for (int c = 0; c < C; ++c) {
            T sg = T(0), sb = T(0);
            for (int n = 0; n < N; ++n) {
                const int64_t base = (int64_t(n) * C + c) * hw;
                for (int64_t i = 0; i < hw; ++i) {
                    sg += dout[base + i] * xhat[base + i];
                    sb += dout[base + i];
                }
            }
            if (dgamma) dgamma[c] += sg;
            if (dbeta) dbeta[c] += sb;
        }
    }
    if (!want_din) return;
#pragma omp parallel for schedule(static) if (int64_t(N) * G * Cg * hw > kParGrain)
    for (int64_t ng = 0; ng < int64_t(N) * G; ++ng) {
        const int n = static_cast<int>(ng / G);
        const int g = static_cast<int>(ng % G);
        T s1 = T(0), s2 = T(0);
        for (int cc = 0; cc < Cg; ++cc) {
            const int c = g * Cg + cc;
            const int64_t base = (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const T a = dout[base + i] * gamma[c];
                s1 += a;
                s2 += a * xhat[base + i];
            }
        }
        const T is = inv_std_ng[ng];
        for (int cc = 0; cc < Cg; ++cc) {
            const int c = g * Cg + cc;
            const int64_t base = (int64_t(n) * C + c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const T a = dout[base + i] * gamma[c];
                din[base + i] += is * (a - s1 / m - xhat[base + i] * s2 / m);
            }
        }
    }
}

template <typename T>
void relu_forward(const T* in, int64_t n, T* out) {
#pragma omp parallel for schedule(static) if (n > kParGrain)
    for (int64_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward(const T* dout, const T* in, int64_t n, T* din) {
#pragma omp parallel for schedule(static) if (n > kParGrain)
    for (int64_t i = 0; i < n; ++i)
        if (in[i] > T(0)) din[i] += dout[i];
}

template <typename T>
void max_pool2d_forward(const T* in, int N, int C, int H, int W, int k, int stride, T* out,
                        int32_t* argmax, int OH, int OW) {
    const int64_t planes = int64_t(N) * C;
#pragma omp parallel for schedule(static) if (planes * OH * OW * k * k > kParGrain)
    for (int64_t nc = 0; nc < planes; ++nc) {
        const T* p = in + nc * H * W;
        T* q = out + nc * OH * OW;
        int32_t* am = argmax + nc * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
            for (int ow = 0; ow < OW; ++ow) {
                const int h0 = oh * stride, w0 = ow * stride;
                T best = p[int64_t(h0) * W + w0];
                int32_t bi = h0 * W + w0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const int32_t idx = (h0 + i) * W + (w0 + j);
                        if (p[idx] > best) {
                            best = p[idx];
                            bi = idx;
                        }
                    }
                q[int64_t(oh) * OW + ow] = best;
                am[int64_t(oh) * OW + ow] = bi;
            }
        }
    }
}

template <typename T>
void max_pool2d_backward(const T* dout, const int32_t* argmax, int N, int C, int OH, int OW, int H,
                         int W, T* din) {
    const int64_t planes = int64_t(N) * C;
    // scatter stays inside one (n,c) plane, so parallelizing over planes is race-free
#pragma omp parallel for schedule(static) if (planes * OH * OW > kParGrain)
    for (int64_t nc = 0; nc < planes; ++nc) {
        const T* doutp = dout + nc * OH * OW;
        const int32_t* am = argmax + nc * OH * OW;
        T* dst = din + nc * H * W;
        for (int64_t i = 0; i < int64_t(OH) * OW; ++i) dst[am[i]] += doutp[i];
    }
}

template <typename T>
void global_avg_pool_forward(const T* in, int N, int C, int H, int W, T* out) {
    const int64_t hw = int64_t(H) * W;
#pragma omp parallel for schedule(static) if (int64_t(N) * C * hw > kParGrain)
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
        const T* p = in + nc * hw;
        T acc = T(0);
        for (int64_t i = 0; i < hw; ++i) acc += p[i];
        out[nc] = acc / static_cast<T>(hw);
    }
}

template <typename T>
void global_avg_pool_backward(const T* dout, int N, int C, int H, int W, T* din) {
    const int64_t hw = int64_t(H) * W;
#pragma omp parallel for schedule(static) if (int64_t(N) * C * hw > kParGrain)
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc) {
        const T g = dout[nc] / static_cast<T>(hw);
        T* dst = din + nc * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] += g;
    }
}

/// Per-element (over the batch axis) mean/population-variance L1 match:
///   L = mean_e |mu_e - tmean_e| + mean_e |var_e - tvar_e|
/// x is (N, E) with E = product of per-sample dims. mu/var are emitted for
/// the backward pass. The L1 subgradient at 0 is taken as 0.
template <typename T>
void stat_l1_forward(const T* x, int N, int64_t E, const T* tmean, const T* tvar, T* mu, T* var,
                     T* loss_out) {
#pragma omp parallel for schedule(static) if (E * N > kParGrain)
    for (int64_t e = 0; e < E; ++e) {
        T s = T(0);
        for (int n = 0; n < N; ++n) s += x[int64_t(n) * E + e];
        const T m = s / static_cast<T>(N);
        T acc = T(0);
        for (int n = 0; n < N; ++n) {
            const T d = x[int64_t(n) * E + e] - m;
            acc += d * d;
        }
        mu[e] = m;
        var[e] = acc / static_cast<T>(N);
    }
    // serial reduction in index order keeps the loss bitwise stable
    T lm = T(0), lv = T(0);
    for (int64_t e = 0; e < E; ++e) {
        lm += std::abs(mu[e] - tmean[e]);
        lv += std::abs(var[e] - tvar[e]);
    }
    *loss_out = lm / static_cast<T>(E) + lv / static_cast<T>(E);
}

template <typename T>
inline T sgn0(T v) {
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

template <typename T>
void stat_l1_backward(const T* x, int N, int64_t E, const T* tmean, const T* tvar, const T* mu,
                      const T* var, T gscale, T* dx) {
#pragma omp parallel for schedule(static) if (E * N > kParGrain)
    for (int64_t e = 0; e < E; ++e) {
        const T s1 = sgn0(mu[e] - tmean[e]);
        const T s2 = sgn0(var[e] - tvar[e]);
        const T c = gscale / static_cast<T>(E);
        for (int n = 0; n < N; ++n) {
            const int64_t i = int64_t(n) * E + e;
            dx[i] += c * (s1 / static_cast<T>(N) + s2 * T(2) * (x[i] - mu[e]) / static_cast<T>(N));
        }
    }
}

template <typename T>
void softmax_cross_entropy_forward(const T* logits, const int* labels, int N, int M, T* loss_out) {
    T total = T(0);
    for (int n = 0; n < N; ++n) {
        const T* row = logits + int64_t(n) * M;
        T mx = row[0];
        for (int m = 1; m < M; ++m) mx = row[m] > mx ? row[m] : mx;
        T se = T(0);
        for (int m = 0; m < M; ++m) se += std::exp(row[m] - mx);
        total += mx + std::log(se) - row[labels[n]];
    }
    *loss_out = total / static_cast<T>(N);
}

template <typename T>
void softmax_cross_entropy_backward(const T* logits, const int* labels, int N, int M, T gscale,
                                    T* dlogits) {
#pragma omp parallel for schedule(static) if (int64_t(N) * M > kParGrain)
    for (int n = 0; n < N; ++n) {
        const T* row = logits + int64_t(n) * M;
        T* drow = dlogits + int64_t(n) * M;
        T mx = row[0];
        for (int m = 1; m < M; ++m) mx = row[m] > mx ? row[m] : mx;
        T se = T(0);
        for (int m = 0; m < M; ++m) se += std::exp(row[m] - mx);
        const T c = gscale / static_cast<T>(N);
        for (int m = 0; m < M; ++m) {
            const T p = std::exp(row[m] - mx) / se;
            drow[m] += c * (p - (m == labels[n] ? T(1) : T(0)));
        }
    }
}

}  // namespace dilam::kernels
