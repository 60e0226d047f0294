#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>

#include "dilam/kernels.hpp"
#include "dilam/ref_kernels.hpp"
#include "dilam/tensor.hpp"
#include "support/test_util.hpp"

using namespace dilam;
using testutil::fill_uniform;

TEST_CASE("parallel conv2d agrees with the serial reference") {
    Rng rng(101);
    const int N = 2, C = 3, H = 16, W = 16, K = 8, k = 3;
    Tensor x({N, C, H, W}), w({K, C, k, k}), b({K});
    fill_uniform(x, rng, -1.0, 1.0);
    fill_uniform(w, rng, -1.0, 1.0);
    fill_uniform(b, rng, -1.0, 1.0);
    for (int stride : {1, 2}) {
        const int OH = (H + 2 - k) / stride + 1;
        Tensor out({N, K, OH, OH}), expect({N, K, OH, OH});
        kernels::conv2d_forward(x.data(), N, C, H, W, w.data(), K, k, k, b.data(), stride, 1,
                                out.data(), OH, OH);
        refk::conv2d(x.data(), N, C, H, W, w.data(), K, k, k, b.data(), stride, 1, expect.data(),
                     OH, OH);
        for (int64_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out[i] - expect[i]) < 1e-5f);
    }
}

TEST_CASE("parallel linear agrees with the serial reference") {
    Rng rng(103);
    const int N = 9, D = 33, M = 17;
    Tensor x({N, D}), w({M, D}), b({M});
    fill_uniform(x, rng, -1.0, 1.0);
    fill_uniform(w, rng, -1.0, 1.0);
    fill_uniform(b, rng, -1.0, 1.0);
    Tensor out({N, M}), expect({N, M});
    kernels::linear_forward(x.data(), N, D, w.data(), M, b.data(), out.data());
    refk::linear(x.data(), N, D, w.data(), M, b.data(), expect.data());
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out[i] - expect[i]) < 1e-5f);
}

TEST_CASE("parallel batch normalization agrees with direct summation") {
    Rng rng(107);
    const int N = 4, C = 6, H = 8, W = 8;
    Tensor x({N, C, H, W}), gamma({C}), beta({C});
    fill_uniform(x, rng, -2.0, 2.0);
    fill_uniform(gamma, rng, 0.5, 1.5);
    fill_uniform(beta, rng, -0.5, 0.5);
    const float eps = 1e-5f;

    Tensor mean({C}), var({C});
    kernels::channel_mean_var(x.data(), N, C, H, W, mean.data(), var.data());
    Tensor inv({C});
    for (int c = 0; c < C; ++c) inv[c] = 1.0f / std::sqrt(var[c] + eps);
    Tensor out(x.shape()), xhat(x.shape());
    kernels::norm_apply(x.data(), N, C, H, W, mean.data(), inv.data(), gamma.data(), beta.data(),
                        out.data(), xhat.data());

    Tensor expect(x.shape());
    refk::batch_norm(x.data(), N, C, H, W, gamma.data(), beta.data(), eps, expect.data());
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out[i] - expect[i]) < 1e-5f);
}

#ifdef _OPENMP
TEST_CASE("kernel outputs are bitwise identical across thread counts") {
    Rng rng(109);
    const int N = 2, C = 4, H = 32, W = 32, K = 16, k = 3;
    Tensor x({N, C, H, W}), w({K, C, k, k}), b({K});
    fill_uniform(x, rng, -1.0, 1.0);
    fill_uniform(w, rng, -1.0, 1.0);
    fill_uniform(b, rng, -1.0, 1.0);
    const int OH = H;

    auto run = [&](int threads) {
        omp_set_num_threads(threads);
        Tensor out({N, K, OH, OH});
        kernels::conv2d_forward(x.data(), N, C, H, W, w.data(), K, k, k, b.data(), 1, 1, out.data(),
                                OH, OH);
        Tensor din({N, C, H, W}), dw({K, C, k, k});
        kernels::conv2d_backward_input(out.data(), w.data(), N, C, H, W, K, k, k, 1, 1, OH, OH,
                                       din.data());
        kernels::conv2d_backward_weight(out.data(), x.data(), N, C, H, W, K, k, k, 1, 1, OH, OH,
                                        dw.data());
        return std::tuple{out, din, dw};
    };

    const int max_threads = omp_get_max_threads();
    auto [o1, di1, dw1] = run(1);
    auto [o2, di2, dw2] = run(max_threads > 1 ? max_threads : 2);
    omp_set_num_threads(max_threads);

    CHECK(o1.vec() == o2.vec());
    CHECK(di1.vec() == di2.vec());
    CHECK(dw1.vec() == dw2.vec());
}
#endif

TEST_CASE("max pool forward picks the first maximum in scan order on ties") {
    Tensor x = Tensor::from({1, 1, 2, 2}, {3.0f, 3.0f, 3.0f, 3.0f});
    Tensor out({1, 1, 1, 1});
    std::vector<int32_t> am(1);
    kernels::max_pool2d_forward(x.data(), 1, 1, 2, 2, 2, 2, out.data(), am.data(), 1, 1);
    CHECK(out[0] == 3.0f);
    CHECK(am[0] == 0);
}
