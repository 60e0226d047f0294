#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "dilam/autodiff.hpp"
#include "dilam/optimizer.hpp"
#include "support/test_util.hpp"

using namespace dilam;
using testutil::fill_uniform;

TEST_CASE("plain sgd step") {
    Parameter p("w", Tensor::from({1}, {1.0f}));
    p.grad[0] = 2.0f;
    Sgd opt(0.1f, 0.0f);
    std::vector<Parameter*> ps{&p};
    opt.step(ps);
    CHECK(p.value[0] == doctest::Approx(0.8f));
    CHECK(p.grad[0] == 0.0f);
}

TEST_CASE("momentum accumulates velocity across steps") {
    Parameter p("w", Tensor::from({1}, {1.0f}));
    Sgd opt(0.1f, 0.9f);
    std::vector<Parameter*> ps{&p};
    p.grad[0] = 2.0f;
    opt.step(ps);
    CHECK(p.value[0] == doctest::Approx(1.0f - 0.1f * 2.0f));
    p.grad[0] = 2.0f;
    opt.step(ps);
    // second update: lr * (g + m*v) = 0.1 * (2 + 0.9*2)
    CHECK(p.value[0] == doctest::Approx(0.8f - 0.1f * (2.0f + 0.9f * 2.0f)));
}

TEST_CASE("learning rate must be positive") {
    CHECK_THROWS_AS(Sgd(0.0f, 0.0f), std::invalid_argument);
    CHECK_THROWS_AS(Sgd(-0.1f, 0.0f), std::invalid_argument);
}

TEST_CASE("non-trainable parameters are bitwise unchanged after 100 steps") {
    Rng rng(202);
    Parameter frozen("frozen", Tensor({8}));
    fill_uniform(frozen.value, rng, -1.0, 1.0);
    frozen.trainable = false;
    Parameter live("live", Tensor({8}));
    fill_uniform(live.value, rng, -1.0, 1.0);

    std::vector<float> before = frozen.value.vec();
    Sgd opt(0.05f, 0.9f);
    std::vector<Parameter*> ps{&frozen, &live};
    for (int step = 0; step < 100; ++step) {
        Graph g;
        auto a = g.param(frozen);
        auto b = g.param(live);
        auto loss = sum_all(mul(add(a, b), add(a, b)));
        g.backward(loss);
        opt.step(ps);
    }
    CHECK(std::memcmp(before.data(), frozen.value.data(), before.size() * sizeof(float)) == 0);
    CHECK(frozen.grad.vec() == std::vector<float>(8, 0.0f));
}

TEST_CASE("masking holds for arbitrary losses") {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        Rng rng(seed);
        Parameter a("a", Tensor({3, 3}));
        Parameter b("b", Tensor({3, 3}));
        fill_uniform(a.value, rng, -1.0, 1.0);
        fill_uniform(b.value, rng, -1.0, 1.0);
        a.trainable = rng.u01() < 0.5;
        b.trainable = !a.trainable;
        Parameter& frozen = a.trainable ? b : a;
        std::vector<float> before = frozen.value.vec();

        Sgd opt(0.02f, 0.5f);
        std::vector<Parameter*> ps{&a, &b};
        for (int step = 0; step < 5; ++step) {
            Graph g;
            auto va = g.param(a);
            auto vb = g.param(b);
            auto loss = sum_all(mul(mul(va, vb), add(va, vb)));
            g.backward(loss);
            opt.step(ps);
        }
        CHECK(frozen.value.vec() == before);
    }
}

TEST_CASE("training is bitwise reproducible for a fixed seed") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Parameter w("w", Tensor({4, 4}));
        fill_uniform(w.value, rng, -1.0, 1.0);
        Sgd opt(0.01f, 0.9f);
        std::vector<Parameter*> ps{&w};
        for (int step = 0; step < 50; ++step) {
            Tensor x({4, 4});
            fill_uniform(x, rng, -1.0, 1.0);
            Graph g;
            auto y = mul(g.param(w), g.input(x));
            g.backward(sum_all(mul(y, y)));
            opt.step(ps);
        }
        return w.value.vec();
    };
    CHECK(run(77) == run(77));
    CHECK(run(77) != run(78));
}

TEST_CASE("gradient clipping clamps elementwise") {
    Parameter p("w", Tensor::from({3}, {0.0f, 0.0f, 0.0f}));
    p.grad = Tensor::from({3}, {5.0f, -3.0f, 0.25f});
    std::vector<Parameter*> ps{&p};
    clip_gradients<float>(ps, 1.0f);
    CHECK(p.grad[0] == 1.0f);
    CHECK(p.grad[1] == -1.0f);
    CHECK(p.grad[2] == 0.25f);
}
