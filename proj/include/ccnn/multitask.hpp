#pragma once

#include <utility>
#include <vector>

#include "ccnn/backbone.hpp"
#include "ccnn/loss.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

struct GenderPrototypes;

// Partition of a joint embedding into a leading age slice and a trailing
// gender slice; the two widths must sum to the backbone's embedding_dim.
struct HeadSplit {
    int age_dim = 70;
    int gender_dim = 10;

    int total() const { return age_dim + gender_dim; }
    void validate() const;
};

// Relative weights of the two task losses; at most one may be zero.
struct TaskWeights {
    double w_age = 1.0;
    double w_gender = 1.0;

    void validate() const;
};

// First age_dim components and remaining gender_dim components; their
// concatenation reconstructs the embedding exactly.
std::pair<Tensor, Tensor> split_embedding(const Embedding& e, const HeadSplit& split);

struct JointLossResult {
    double total = 0.0;
    double age_loss = 0.0;
    double gender_loss = 0.0;
};

// w_age * rotating-baseline sweep over age slices (labels = age classes)
// + w_gender * the same sweep over gender slices (labels = gender). Both
// terms backpropagate into the shared backbone; a zero-weight term is
// skipped entirely so its slice receives exactly zero gradient.
JointLossResult joint_loss(const PairBatch& batch, Backbone& backbone,
                           const HeadSplit& split, const LossConfig& cfg,
                           const TaskWeights& weights);

// Label of the nearer prototype in Euclidean distance; an exact tie
// resolves to 0.
int gender_decode(const Tensor& gender_slice, const GenderPrototypes& prototypes);

} // namespace ccnn
