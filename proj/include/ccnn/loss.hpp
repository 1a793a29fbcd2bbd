#pragma once

#include <span>
#include <vector>

#include "ccnn/backbone.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

// Pairwise energy loss configuration. Same-class pairs are penalized by E^2,
// different-class pairs by max(0, margin - E)^2.
struct LossConfig {
    double margin = 1.0;

    void validate() const;
};

// Euclidean distance between two equal-length embeddings. Always >= 0.
double energy(const Embedding& a, const Embedding& b);

// 1 iff both samples carry the same class label, else 0.
int comparison_label(int class_a, int class_b);

// z=1 -> E^2, z=0 -> max(0, margin - E)^2. Requires e >= 0.
double comparative_loss(int z, double e, const LossConfig& cfg);

struct PairLossGrad {
    double loss = 0.0;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

// Analytic gradient of comparative_loss(z, energy(a, b)) with respect to both
// embeddings. At the two non-smooth points (coincident embeddings with z=0,
// and the hinge at E == margin) the gradient is defined as zero.
PairLossGrad comparative_loss_grad(int z, const Embedding& a, const Embedding& b,
                                   const LossConfig& cfg);

struct SweepResult {
    double loss = 0.0;
    // One gradient vector per input embedding, same length as the embeddings.
    std::vector<std::vector<double>> embedding_grads;
};

// Rotating-baseline sweep over precomputed embedding views: every element
// serves as the baseline exactly once, each baseline is compared against all
// other elements, and the per-baseline means are averaged. Labels decide the
// comparison target via comparison_label.
SweepResult sweep_embedding_grads(std::span<const std::span<const double>> embeddings,
                                  std::span<const int> labels,
                                  const LossConfig& cfg);

// A training batch of raw inputs with class labels. Inputs must share one
// shape; a batch needs at least two samples. Baselines rotate in index order.
struct PairBatch {
    std::vector<Tensor> inputs;
    std::vector<int> age_classes;
    std::vector<int> genders; // empty for single-task batches

    std::size_t size() const { return inputs.size(); }
    void validate() const;
};

// Runs the backbone over the batch, applies the rotating-baseline sweep with
// age classes as labels, and accumulates parameter gradients through every
// pair (baselines included). Returns the swept loss.
double baseline_sweep_loss(const PairBatch& batch, Backbone& backbone,
                           const LossConfig& cfg);

} // namespace ccnn
