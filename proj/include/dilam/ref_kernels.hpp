#pragma once

// Naive serial reference implementations, kept deliberately independent of
// kernels.hpp. The test suites use them as oracles and the benchmark target
// compares the two.

#include <cmath>
#include <cstdint>

namespace dilam::refk {

template <typename T>
void conv2d(const T* in, int N, int C, int H, int W, const T* w, int K, int kh, int kw,
            const T* bias, int stride, int pad, T* out, int OH, int OW) {
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = bias ? bias[k] : T(0);
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                int h = oh * stride - pad + i;
                                int x = ow * stride - pad + j;
                                if (h < 0 || h >= H || x < 0 || x >= W) continue;
                                acc += in[((int64_t(n) * C + c) * H + h) * W + x] *
                                       w[((int64_t(k) * C + c) * kh + i) * kw + j];
                            }
                    out[((int64_t(n) * K + k) * OH + oh) * OW + ow] = acc;
                }
}

template <typename T>
void linear(const T* in, int N, int D, const T* w, int M, const T* bias, T* out) {
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
            T acc = bias ? bias[m] : T(0);
            for (int d = 0; d < D; ++d) acc += in[int64_t(n) * D + d] * w[int64_t(m) * D + d];
            out[int64_t(n) * M + m] = acc;
        }
}

/// Direct-summation per-channel normalization over batch statistics.
template <typename T>
void batch_norm(const T* in, int N, int C, int H, int W, const T* gamma, const T* beta, T eps,
                T* out) {
    const int64_t hw = int64_t(H) * W;
    for (int c = 0; c < C; ++c) {
        T sum = T(0);
        int64_t m = 0;
        for (int n = 0; n < N; ++n)
            for (int64_t i = 0; i < hw; ++i) {
                sum += in[(int64_t(n) * C + c) * hw + i];
                ++m;
            }
        T mu = sum / static_cast<T>(m);
        T acc = T(0);
        for (int n = 0; n < N; ++n)
            for (int64_t i = 0; i < hw; ++i) {
                T d = in[(int64_t(n) * C + c) * hw + i] - mu;
                acc += d * d;
            }
        T var = acc / static_cast<T>(m);
        T is = T(1) / std::sqrt(var + eps);
        for (int n = 0; n < N; ++n)
            for (int64_t i = 0; i < hw; ++i) {
                int64_t p = (int64_t(n) * C + c) * hw + i;
                out[p] = gamma[c] * ((in[p] - mu) * is) + beta[c];
            }
    }
}

}  // namespace dilam::refk
