#pragma once

// Independent reference implementations used as oracles. These deliberately
// recompute results by direct definition (nested loops, enumeration) and must
// stay decoupled from the library's own compute paths.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ccnn/backbone.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/tensor.hpp"

namespace oracle {

// Valid 3x3 cross-correlation by the six-loop definition.
inline ccnn::Tensor conv3x3_reference(const ccnn::Tensor& input,
                                      const ccnn::Tensor& kernels,
                                      const ccnn::Tensor& bias) {
    const int c_in = input.shape()[0];
    const int h = input.shape()[1];
    const int w = input.shape()[2];
    const int c_out = kernels.shape()[0];
    ccnn::Tensor out({c_out, h - 2, w - 2});
    for (int co = 0; co < c_out; ++co)
        for (int i = 0; i < h - 2; ++i)
            for (int j = 0; j < w - 2; ++j) {
                double acc = bias[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < c_in; ++ci)
                    for (int u = 0; u < 3; ++u)
                        for (int v = 0; v < 3; ++v)
                            acc += input[(static_cast<std::size_t>(ci) * h + i + u) * w + j + v] *
                                   kernels[((static_cast<std::size_t>(co) * c_in + ci) * 3 + u) * 3 + v];
                out[(static_cast<std::size_t>(co) * (h - 2) + i) * (w - 2) + j] = acc;
            }
    return out;
}

inline double energy_reference(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

// Figure-style vote counting straight from the decision bits: candidate c
// gets comparator k's vote when c is on the side of k that k voted for.
inline int hits_decode_reference(std::span<const int> decisions) {
    const int K = static_cast<int>(decisions.size());
    int best_class = 1;
    int best_votes = -1;
    for (int c = 1; c <= K; ++c) {
        int votes = 0;
        for (int k = 1; k <= K; ++k) {
            const bool covered = decisions[static_cast<std::size_t>(k - 1)] == 1
                                     ? c < k
                                     : c >= k;
            if (covered) ++votes;
        }
        if (votes > best_votes) {
            best_votes = votes;
            best_class = c;
        }
    }
    return best_class;
}

inline std::vector<int> consistent_decisions(int y, int K) {
    std::vector<int> d(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) d[static_cast<std::size_t>(k - 1)] = y < k ? 1 : 0;
    return d;
}

// Small randomly initialized backbone for gradient fixtures.
inline ccnn::Backbone tiny_backbone(std::uint64_t seed, int image = 6,
                                    int embedding_dim = 4, int channels = 2,
                                    int hidden = 6) {
    ccnn::BackboneConfig cfg;
    cfg.input_shape = {1, image, image};
    cfg.conv_channels = channels;
    cfg.hidden1 = hidden;
    cfg.hidden2 = hidden;
    cfg.embedding_dim = embedding_dim;
    ccnn::Backbone backbone(cfg);
    ccnn::Rng rng(seed);
    backbone.init_params(rng);
    return backbone;
}

inline ccnn::Tensor random_tensor(const std::vector<int>& shape, ccnn::Rng& rng,
                                  double lo = -1.0, double hi = 1.0) {
    ccnn::Tensor t(shape);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

} // namespace oracle
