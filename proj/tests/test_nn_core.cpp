#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ccnn/backbone.hpp"
#include "ccnn/gradcheck.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/tensor.hpp"
#include "test_helpers.hpp"

using namespace ccnn;

TEST_CASE("tensor construction enforces its invariants") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2}, {1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({1}, {std::numeric_limits<double>::infinity()}),
                    std::invalid_argument);

    const Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
}

TEST_CASE("rng streams are reproducible and shuffles are seed-stable") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform01();
        CHECK(va == b.uniform01());
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    bool differs = false;
    for (int i = 0; i < 10; ++i) {
        if (a.next_u64() != c.next_u64()) differs = true;
    }
    CHECK(differs);

    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> v2 = v1;
    Rng s1(7), s2(7);
    s1.shuffle(v1);
    s2.shuffle(v2);
    CHECK(v1 == v2);
}

TEST_CASE("conv3x3 constant and zero-kernel cases") {
    const Tensor image({1, 5, 5}, std::vector<double>(25, 1.0));

    Param ones_kernel({1, 1, 3, 3});
    ones_kernel.value.fill(1.0);
    Param zero_bias({1});
    const Tensor nine = conv3x3_forward(image, ones_kernel, zero_bias);
    CHECK(nine.shape() == std::vector<int>{1, 3, 3});
    for (std::size_t i = 0; i < nine.size(); ++i) CHECK(nine[i] == doctest::Approx(9.0));

    Param zero_kernel({1, 1, 3, 3});
    Param bias({1});
    bias.value[0] = -2.5;
    const Tensor constant = conv3x3_forward(image, zero_kernel, bias);
    for (std::size_t i = 0; i < constant.size(); ++i) CHECK(constant[i] == -2.5);
}

TEST_CASE("conv3x3 matches the six-loop reference on random inputs") {
    Rng rng(11);
    const Tensor input = oracle::random_tensor({1, 5, 5}, rng);
    Param kernels(oracle::random_tensor({2, 1, 3, 3}, rng));
    Param bias(oracle::random_tensor({2}, rng));

    const Tensor expected = oracle::conv3x3_reference(input, kernels.value, bias.value);
    const Tensor got = conv3x3_forward(input, kernels, bias);
    REQUIRE(got.shape() == expected.shape());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv3x3 rejects bad shapes") {
    Param kernels({1, 1, 3, 3});
    Param bias({1});
    CHECK_THROWS_AS(conv3x3_forward(Tensor({1, 2, 5}), kernels, bias),
                    std::invalid_argument);
    CHECK_THROWS_AS(conv3x3_forward(Tensor({2, 5, 5}), kernels, bias),
                    std::invalid_argument);
    Param bad_bias({2});
    CHECK_THROWS_AS(conv3x3_forward(Tensor({1, 5, 5}), kernels, bad_bias),
                    std::invalid_argument);
}

TEST_CASE("dense layer hand cases") {
    SUBCASE("identity weight") {
        Param w(Tensor({2, 2}, {1, 0, 0, 1}));
        Param b({2});
        const Tensor x({2}, {3.0, -4.0});
        const Tensor y = dense_forward(x, w, b);
        CHECK(y[0] == 3.0);
        CHECK(y[1] == -4.0);
    }
    SUBCASE("zero weight leaves the bias") {
        Param w({2, 3});
        Param b(Tensor({2}, {1.0, 2.0}));
        const Tensor y = dense_forward(Tensor({3}), w, b);
        CHECK(y[0] == 1.0);
        CHECK(y[1] == 2.0);
    }
    SUBCASE("hand matrix-vector product") {
        Param w(Tensor({2, 2}, {1, 2, 3, 4}));
        Param b({2});
        const Tensor y = dense_forward(Tensor({2}, {1.0, 1.0}), w, b);
        CHECK(y[0] == 3.0);
        CHECK(y[1] == 7.0);
    }
    SUBCASE("shape mismatch") {
        Param w({2, 3});
        Param b({2});
        CHECK_THROWS_AS(dense_forward(Tensor({4}), w, b), std::invalid_argument);
    }
}

TEST_CASE("relu definition") {
    const Tensor y = relu_forward(Tensor({3}, {-1.0, 0.0, 2.0}));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);

    const Tensor neg = relu_forward(Tensor({3}, {-5.0, -0.1, -2.0}));
    for (std::size_t i = 0; i < neg.size(); ++i) CHECK(neg[i] == 0.0);

    const Tensor pos({4}, {0.0, 0.5, 1.0, 7.0});
    const Tensor same = relu_forward(pos);
    for (std::size_t i = 0; i < pos.size(); ++i) CHECK(same[i] == pos[i]);
}

TEST_CASE("backbone zero network and determinism") {
    BackboneConfig cfg;
    cfg.input_shape = {1, 6, 6};
    cfg.conv_channels = 2;
    cfg.hidden1 = 5;
    cfg.hidden2 = 5;
    cfg.embedding_dim = 4;
    Backbone zero(cfg);

    Rng rng(3);
    const Tensor input = oracle::random_tensor({1, 6, 6}, rng);
    const auto [emb, trace] = backbone_forward(zero, input);
    for (std::size_t i = 0; i < emb.size(); ++i) CHECK(emb[i] == 0.0);

    // Input gradient through an all-zero network vanishes.
    Tensor grad_out({4}, {1.0, -2.0, 0.5, 3.0});
    Backbone zero2(cfg);
    const Tensor grad_in = backbone_backward(zero2, trace, grad_out);
    for (std::size_t i = 0; i < grad_in.size(); ++i) CHECK(grad_in[i] == 0.0);

    Backbone net = oracle::tiny_backbone(99);
    const auto e1 = backbone_forward(net, input).first;
    const auto e2 = backbone_forward(net, input).first;
    for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == e2[i]);
}

TEST_CASE("backbone forward equals the manual layer composition") {
    Backbone net = oracle::tiny_backbone(5);
    Rng rng(6);
    const Tensor input = oracle::random_tensor({1, 6, 6}, rng);

    const Tensor conv = conv3x3_forward(input, net.conv_w, net.conv_b);
    Tensor act = relu_forward(conv);
    const Tensor flat({net.config().flat_dim()}, act.data());
    const Tensor h1 = relu_forward(dense_forward(flat, net.w1, net.b1));
    const Tensor h2 = relu_forward(dense_forward(h1, net.w2, net.b2));
    const Tensor expected = dense_forward(h2, net.w3, net.b3);

    const auto [emb, trace] = backbone_forward(net, input);
    REQUIRE(emb.size() == expected.size());
    for (std::size_t i = 0; i < emb.size(); ++i) CHECK(emb[i] == expected[i]);

    // Replaying the forward pass from the trace input reproduces the trace.
    const auto replay = backbone_forward(net, trace.input).second;
    for (std::size_t i = 0; i < trace.embedding.size(); ++i) {
        CHECK(replay.embedding[i] == trace.embedding[i]);
    }
    for (std::size_t i = 0; i < trace.h1.size(); ++i) CHECK(replay.h1[i] == trace.h1[i]);
}

TEST_CASE("backbone backward with zero upstream gradient leaves grads unchanged") {
    Backbone net = oracle::tiny_backbone(8);
    Rng rng(9);
    const Tensor input = oracle::random_tensor({1, 6, 6}, rng);
    const auto trace = backbone_forward(net, input).second;
    backbone_backward(net, trace, Tensor({4}));
    for (const Param* p : static_cast<const Backbone&>(net).params()) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
    }
}

TEST_CASE("linear-regime input gradient equals the composed map's row") {
    // Positive weights/biases and positive inputs keep every ReLU active, so
    // the network is affine and its Jacobian is exact.
    BackboneConfig cfg;
    cfg.input_shape = {1, 4, 4};
    cfg.conv_channels = 1;
    cfg.hidden1 = 3;
    cfg.hidden2 = 3;
    cfg.embedding_dim = 2;
    Backbone net(cfg);
    Rng rng(13);
    for (Param* p : net.params()) {
        for (double& v : p->value.data()) v = rng.uniform(0.05, 0.4);
    }

    Rng rng2(14);
    const Tensor x0 = oracle::random_tensor({1, 4, 4}, rng2, 0.1, 1.0);
    const auto [y0, trace] = backbone_forward(net, x0);

    Tensor e1({2}, {1.0, 0.0});
    const Tensor grad_in = backbone_backward(net, trace, e1);

    // Column j of the Jacobian from forwarding x0 + delta*e_j.
    const double delta = 1e-6;
    for (std::size_t j = 0; j < x0.size(); ++j) {
        Tensor xj = x0;
        xj[j] += delta;
        const auto yj = backbone_forward(net, xj).first;
        const double fd = (yj[0] - y0[0]) / delta;
        CHECK(grad_in[j] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("backbone gradients match central finite differences") {
    Backbone net = oracle::tiny_backbone(21);
    Rng rng(22);
    const Tensor input = oracle::random_tensor({1, 6, 6}, rng);
    const Tensor probe = oracle::random_tensor({4}, rng);
    Param input_param(input);

    std::vector<NamedParam> params;
    auto names = Backbone::param_names();
    auto ptrs = net.params();
    for (std::size_t i = 0; i < ptrs.size(); ++i) params.push_back({names[i], ptrs[i]});
    params.push_back({"input", &input_param});

    const auto loss = [&](bool with_grad) {
        const auto [emb, trace] = backbone_forward(net, input_param.value);
        double value = 0.0;
        for (std::size_t i = 0; i < emb.size(); ++i) value += probe[i] * emb[i];
        if (with_grad) {
            Tensor g({static_cast<int>(emb.size())}, probe.data());
            const Tensor gi = backbone_backward(net, trace, g);
            for (std::size_t i = 0; i < gi.size(); ++i) input_param.grad[i] += gi[i];
        }
        return value;
    };

    const GradCheckReport report = finite_diff_check(loss, params, 1e-5, 1e-4);
    INFO(report.to_string());
    CHECK(report.passed());
}

TEST_CASE("sgd step definition and diagnostics") {
    Param p(Tensor({1}, {1.0}));
    p.grad[0] = 2.0;
    Param* ps[] = {&p};
    sgd_step(ps, 0.1);
    CHECK(p.value[0] == doctest::Approx(0.8));
    CHECK(p.grad[0] == 0.0);

    // Zero gradient leaves the value alone.
    sgd_step(ps, 0.1);
    CHECK(p.value[0] == doctest::Approx(0.8));

    // Two steps under a fixed gradient move by 2*lr*g.
    Param q(Tensor({1}, {1.0}));
    Param* qs[] = {&q};
    for (int i = 0; i < 2; ++i) {
        q.grad[0] = 3.0;
        sgd_step(qs, 0.05);
    }
    CHECK(q.value[0] == doctest::Approx(1.0 - 2 * 0.05 * 3.0));

    Param bad(Tensor({1}, {1.0}));
    bad.grad[0] = std::numeric_limits<double>::quiet_NaN();
    Param* bs[] = {&bad};
    CHECK_THROWS_AS(sgd_step(bs, 0.1), std::runtime_error);
    CHECK_THROWS_AS(sgd_step(qs, 0.0), std::invalid_argument);
}

TEST_CASE("finite_diff_check is exact on quadratics and flags corrupted gradients") {
    Param theta(Tensor({3}, {0.4, -1.2, 2.0}));
    std::vector<NamedParam> params{{"theta", &theta}};

    const auto quadratic = [&](bool with_grad) {
        double value = 0.0;
        for (std::size_t i = 0; i < theta.value.size(); ++i) {
            value += 0.5 * theta.value[i] * theta.value[i];
            if (with_grad) theta.grad[i] += theta.value[i];
        }
        return value;
    };
    const auto report = finite_diff_check(quadratic, params, 1e-5, 1e-4);
    CHECK(report.passed());
    CHECK(report.max_rel_err() < 1e-8);

    const auto corrupted = [&](bool with_grad) {
        double value = 0.0;
        for (std::size_t i = 0; i < theta.value.size(); ++i) {
            value += 0.5 * theta.value[i] * theta.value[i];
            if (with_grad) theta.grad[i] += 2.0 * theta.value[i];
        }
        return value;
    };
    const auto bad = finite_diff_check(corrupted, params, 1e-5, 1e-4);
    CHECK_FALSE(bad.passed());

    CHECK_THROWS_AS(finite_diff_check(quadratic, params, 0.0, 1e-4),
                    std::invalid_argument);
}

TEST_CASE("training determinism: same seed, same parameters bit for bit") {
    const auto run = [](std::uint64_t seed) {
        Backbone net = oracle::tiny_backbone(seed);
        Rng rng(seed + 1);
        for (int step = 0; step < 5; ++step) {
            const Tensor input = oracle::random_tensor({1, 6, 6}, rng);
            const auto [emb, trace] = backbone_forward(net, input);
            Tensor g({4});
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = emb[i];
            backbone_backward(net, trace, g);
            auto params = net.params();
            sgd_step(params, 1e-2);
        }
        std::vector<double> flat;
        for (const Param* p : static_cast<const Backbone&>(net).params()) {
            flat.insert(flat.end(), p->value.data().begin(), p->value.data().end());
        }
        return flat;
    };

    const auto run1 = run(77);
    const auto run2 = run(77);
    REQUIRE(run1.size() == run2.size());
    for (std::size_t i = 0; i < run1.size(); ++i) CHECK(run1[i] == run2[i]);
}
