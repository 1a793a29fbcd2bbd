#include "ccnn/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace ccnn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const std::string& what) {
    if (t.shape().size() != rank) {
        throw std::invalid_argument(what + ": expected rank " + std::to_string(rank) +
                                    " tensor, got shape " + t.shape_string());
    }
}

} // namespace

Tensor conv3x3_forward(const Tensor& input, const Param& kernels, const Param& bias) {
    require_rank(input, 3, "conv3x3 input");
    require_rank(kernels.value, 4, "conv3x3 kernels");
    const int c_in = input.shape()[0];
    const int h = input.shape()[1];
    const int w = input.shape()[2];
    if (h < 3 || w < 3) {
        throw std::invalid_argument("conv3x3 input " + input.shape_string() +
                                    " is smaller than the 3x3 kernel");
    }
    const int c_out = kernels.value.shape()[0];
    require_shape(kernels.value, {c_out, c_in, 3, 3}, "conv3x3 kernels");
    require_shape(bias.value, {c_out}, "conv3x3 bias");

    const int ho = h - 2;
    const int wo = w - 2;
    Tensor out({c_out, ho, wo});
    const double* x = input.data().data();
    const double* k = kernels.value.data().data();
    double* y = out.data().data();

    for (int co = 0; co < c_out; ++co) {
        const double b = bias.value[static_cast<std::size_t>(co)];
        for (int i = 0; i < ho; ++i) {
            for (int j = 0; j < wo; ++j) {
                double acc = b;
                for (int ci = 0; ci < c_in; ++ci) {
                    const double* xr = x + (static_cast<std::size_t>(ci) * h + i) * w + j;
                    const double* kr = k + ((static_cast<std::size_t>(co) * c_in + ci) * 3) * 3;
                    for (int u = 0; u < 3; ++u) {
                        acc += xr[0] * kr[0] + xr[1] * kr[1] + xr[2] * kr[2];
                        xr += w;
                        kr += 3;
                    }
                }
                y[(static_cast<std::size_t>(co) * ho + i) * wo + j] = acc;
            }
        }
    }
    return out;
}

Tensor conv3x3_backward(const Tensor& input, Param& kernels, Param& bias,
                        const Tensor& grad_out) {
    const int c_in = input.shape()[0];
    const int h = input.shape()[1];
    const int w = input.shape()[2];
    const int c_out = kernels.value.shape()[0];
    const int ho = h - 2;
    const int wo = w - 2;
    require_shape(grad_out, {c_out, ho, wo}, "conv3x3 grad_out");

    Tensor grad_in(input.shape());
    const double* x = input.data().data();
    const double* k = kernels.value.data().data();
    const double* gy = grad_out.data().data();
    double* gk = kernels.grad.data().data();
    double* gb = bias.grad.data().data();
    double* gx = grad_in.data().data();

    for (int co = 0; co < c_out; ++co) {
        for (int i = 0; i < ho; ++i) {
            for (int j = 0; j < wo; ++j) {
                const double g = gy[(static_cast<std::size_t>(co) * ho + i) * wo + j];
                if (g == 0.0) continue;
                gb[co] += g;
                for (int ci = 0; ci < c_in; ++ci) {
                    const std::size_t xoff = (static_cast<std::size_t>(ci) * h + i) * w + j;
                    const std::size_t koff = ((static_cast<std::size_t>(co) * c_in + ci) * 3) * 3;
                    for (int u = 0; u < 3; ++u) {
                        for (int v = 0; v < 3; ++v) {
                            const std::size_t xi = xoff + static_cast<std::size_t>(u) * w + v;
                            gk[koff + static_cast<std::size_t>(u) * 3 + v] += x[xi] * g;
                            gx[xi] += k[koff + static_cast<std::size_t>(u) * 3 + v] * g;
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

Tensor dense_forward(const Tensor& input, const Param& weight, const Param& bias) {
    require_rank(input, 1, "dense input");
    require_rank(weight.value, 2, "dense weight");
    const int m = weight.value.shape()[0];
    const int n = weight.value.shape()[1];
    require_shape(input, {n}, "dense input");
    require_shape(bias.value, {m}, "dense bias");

    Tensor out({m});
    const double* x = input.data().data();
    const double* wv = weight.value.data().data();
    for (int i = 0; i < m; ++i) {
        double acc = bias.value[static_cast<std::size_t>(i)];
        const double* row = wv + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += row[j] * x[j];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

Tensor dense_backward(const Tensor& input, Param& weight, Param& bias,
                      const Tensor& grad_out) {
    const int m = weight.value.shape()[0];
    const int n = weight.value.shape()[1];
    require_shape(grad_out, {m}, "dense grad_out");
    require_shape(input, {n}, "dense input");

    Tensor grad_in({n});
    const double* x = input.data().data();
    const double* wv = weight.value.data().data();
    const double* g = grad_out.data().data();
    double* gw = weight.grad.data().data();
    double* gx = grad_in.data().data();

    for (int i = 0; i < m; ++i) {
        const double gi = g[i];
        bias.grad[static_cast<std::size_t>(i)] += gi;
        if (gi == 0.0) continue;
        const std::size_t off = static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            gw[off + j] += gi * x[j];
            gx[j] += wv[off + j] * gi;
        }
    }
    return grad_in;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data()) {
        if (v < 0.0) v = 0.0;
    }
    return out;
}

Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_out) {
    if (!pre_activation.same_shape(grad_out)) {
        throw std::invalid_argument("relu_backward: pre-activation shape " +
                                    pre_activation.shape_string() +
                                    " does not match grad shape " +
                                    grad_out.shape_string());
    }
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (pre_activation[i] <= 0.0) grad_in[i] = 0.0;
    }
    return grad_in;
}

std::vector<int> BackboneConfig::conv_out_shape() const {
    return {conv_channels, input_shape[1] - 2, input_shape[2] - 2};
}

int BackboneConfig::flat_dim() const {
    const auto s = conv_out_shape();
    return s[0] * s[1] * s[2];
}

void BackboneConfig::validate() const {
    if (input_shape.size() != 3) {
        throw std::invalid_argument("backbone input shape must be [C,H,W], got " +
                                    shape_to_string(input_shape));
    }
    if (input_shape[0] < 1 || input_shape[1] < 3 || input_shape[2] < 3) {
        throw std::invalid_argument("backbone input " + shape_to_string(input_shape) +
                                    " too small for a 3x3 convolution");
    }
    if (conv_channels < 1 || hidden1 < 1 || hidden2 < 1 || embedding_dim < 1) {
        throw std::invalid_argument("backbone layer sizes must be positive");
    }
}

Backbone::Backbone(BackboneConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    conv_w = Param({cfg_.conv_channels, cfg_.input_shape[0], 3, 3});
    conv_b = Param({cfg_.conv_channels});
    w1 = Param({cfg_.hidden1, cfg_.flat_dim()});
    b1 = Param({cfg_.hidden1});
    w2 = Param({cfg_.hidden2, cfg_.hidden1});
    b2 = Param({cfg_.hidden2});
    w3 = Param({cfg_.embedding_dim, cfg_.hidden2});
    b3 = Param({cfg_.embedding_dim});
}

namespace {

void init_uniform(Param& p, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : p.value.data()) v = rng.uniform(-bound, bound);
}

} // namespace

void Backbone::init_params(Rng& rng) {
    init_seed = rng.seed();
    init_uniform(conv_w, cfg_.input_shape[0] * 9, rng);
    init_uniform(conv_b, cfg_.input_shape[0] * 9, rng);
    init_uniform(w1, cfg_.flat_dim(), rng);
    init_uniform(b1, cfg_.flat_dim(), rng);
    init_uniform(w2, cfg_.hidden1, rng);
    init_uniform(b2, cfg_.hidden1, rng);
    init_uniform(w3, cfg_.hidden2, rng);
    init_uniform(b3, cfg_.hidden2, rng);
}

std::vector<Param*> Backbone::params() {
    return {&conv_w, &conv_b, &w1, &b1, &w2, &b2, &w3, &b3};
}

std::vector<const Param*> Backbone::params() const {
    return {&conv_w, &conv_b, &w1, &b1, &w2, &b2, &w3, &b3};
}

const std::vector<std::string>& Backbone::param_names() {
    static const std::vector<std::string> names = {
        "conv_w", "conv_b", "dense1_w", "dense1_b",
        "dense2_w", "dense2_b", "dense3_w", "dense3_b"};
    return names;
}

std::pair<Embedding, ForwardTrace> backbone_forward(const Backbone& backbone,
                                                    const Tensor& input) {
    require_shape(input, backbone.config().input_shape, "backbone input");

    ForwardTrace trace;
    trace.input = input;
    trace.conv_pre = conv3x3_forward(input, backbone.conv_w, backbone.conv_b);
    Tensor conv_act = relu_forward(trace.conv_pre);
    trace.flat = Tensor({backbone.config().flat_dim()}, std::move(conv_act.data()));
    trace.d1_pre = dense_forward(trace.flat, backbone.w1, backbone.b1);
    trace.h1 = relu_forward(trace.d1_pre);
    trace.d2_pre = dense_forward(trace.h1, backbone.w2, backbone.b2);
    trace.h2 = relu_forward(trace.d2_pre);
    trace.embedding = dense_forward(trace.h2, backbone.w3, backbone.b3);
    return {trace.embedding, trace};
}

Tensor backbone_backward(Backbone& backbone, const ForwardTrace& trace,
                         const Tensor& grad_out) {
    require_shape(grad_out, {backbone.config().embedding_dim}, "backbone grad_out");
    if (!grad_out.all_finite()) {
        throw std::invalid_argument("backbone grad_out contains non-finite values");
    }

    Tensor g_h2 = dense_backward(trace.h2, backbone.w3, backbone.b3, grad_out);
    Tensor g_d2 = relu_backward(trace.d2_pre, g_h2);
    Tensor g_h1 = dense_backward(trace.h1, backbone.w2, backbone.b2, g_d2);
    Tensor g_d1 = relu_backward(trace.d1_pre, g_h1);
    Tensor g_flat = dense_backward(trace.flat, backbone.w1, backbone.b1, g_d1);
    Tensor g_conv_act(trace.conv_pre.shape(), std::move(g_flat.data()));
    Tensor g_conv = relu_backward(trace.conv_pre, g_conv_act);
    return conv3x3_backward(trace.input, backbone.conv_w, backbone.conv_b, g_conv);
}

void sgd_step(std::span<Param* const> params, double learning_rate) {
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("learning rate must be positive, got " +
                                    std::to_string(learning_rate));
    }
    for (Param* p : params) {
        if (!p->grad.all_finite()) {
            throw std::runtime_error("training aborted: non-finite gradient in tensor of shape " +
                                     p->grad.shape_string());
        }
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            p->value[i] -= learning_rate * p->grad[i];
        }
        p->zero_grad();
    }
}

} // namespace ccnn
