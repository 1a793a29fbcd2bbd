#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccnn/rng.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

// The final feature vector of a backbone, shape [embedding_dim].
using Embedding = Tensor;

// Valid (no padding, stride 1) 3x3 cross-correlation plus per-channel bias.
// input [C_in,H,W], kernels [C_out,C_in,3,3], bias [C_out] -> [C_out,H-2,W-2].
Tensor conv3x3_forward(const Tensor& input, const Param& kernels, const Param& bias);

// Accumulates kernel/bias gradients and returns the input gradient.
Tensor conv3x3_backward(const Tensor& input, Param& kernels, Param& bias,
                        const Tensor& grad_out);

// output[i] = sum_j weight[i,j]*input[j] + bias[i].
Tensor dense_forward(const Tensor& input, const Param& weight, const Param& bias);

Tensor dense_backward(const Tensor& input, Param& weight, Param& bias,
                      const Tensor& grad_out);

// Elementwise max(0, x).
Tensor relu_forward(const Tensor& input);

// Gradient is passed where the pre-activation was strictly positive.
Tensor relu_backward(const Tensor& pre_activation, const Tensor& grad_out);

struct BackboneConfig {
    std::vector<int> input_shape; // [C,H,W]
    int conv_channels = 4;
    int hidden1 = 32;
    int hidden2 = 32;
    int embedding_dim = 70;

    std::vector<int> conv_out_shape() const;
    int flat_dim() const;
    void validate() const;
};

// Per-layer activations cached by backbone_forward; replaying the forward
// pass from `input` reproduces every stored tensor bit for bit.
struct ForwardTrace {
    Tensor input;
    Tensor conv_pre;  // conv output before ReLU, [C_out,H-2,W-2]
    Tensor flat;      // ReLU(conv) flattened
    Tensor d1_pre;    // dense1 output before ReLU
    Tensor h1;        // ReLU(d1_pre)
    Tensor d2_pre;
    Tensor h2;
    Tensor embedding; // dense3 output, no activation
};

// Feature extractor: conv3x3 -> ReLU -> flatten -> dense1 -> ReLU
// -> dense2 -> ReLU -> dense3.
class Backbone {
public:
    explicit Backbone(BackboneConfig cfg);

    const BackboneConfig& config() const { return cfg_; }

    // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], one draw per scalar
    // in a fixed parameter order. Records the rng seed for checkpointing.
    void init_params(Rng& rng);

    // Parameters in serialization/update order, paired with stable names.
    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    static const std::vector<std::string>& param_names();

    std::uint64_t init_seed = 0;

    Param conv_w, conv_b;
    Param w1, b1;
    Param w2, b2;
    Param w3, b3;

private:
    BackboneConfig cfg_;
};

std::pair<Embedding, ForwardTrace> backbone_forward(const Backbone& backbone,
                                                    const Tensor& input);

// Accumulates all parameter gradients of embedding . grad_out and returns
// the gradient with respect to the input.
Tensor backbone_backward(Backbone& backbone, const ForwardTrace& trace,
                         const Tensor& grad_out);

// value -= lr * grad for every param, then grads are zeroed.
// A non-finite gradient aborts with a diagnostic naming the parameter.
void sgd_step(std::span<Param* const> params, double learning_rate);

} // namespace ccnn
