#include "ccnn/multitask.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "ccnn/comparators.hpp"

namespace ccnn {

void HeadSplit::validate() const {
    if (age_dim < 1 || gender_dim < 1) {
        throw std::invalid_argument("head split dims must be positive, got " +
                                    std::to_string(age_dim) + "+" +
                                    std::to_string(gender_dim));
    }
}

void TaskWeights::validate() const {
    if (w_age < 0.0 || w_gender < 0.0) {
        throw std::invalid_argument("task weights must be nonnegative");
    }
    if (w_age == 0.0 && w_gender == 0.0) {
        throw std::invalid_argument("task weights must not both be zero");
    }
}

std::pair<Tensor, Tensor> split_embedding(const Embedding& e, const HeadSplit& split) {
    split.validate();
    if (static_cast<int>(e.size()) != split.total()) {
        throw std::invalid_argument("embedding of length " + std::to_string(e.size()) +
                                    " cannot be split " + std::to_string(split.age_dim) +
                                    "+" + std::to_string(split.gender_dim));
    }
    std::vector<double> age(e.data().begin(), e.data().begin() + split.age_dim);
    std::vector<double> gender(e.data().begin() + split.age_dim, e.data().end());
    return {Tensor({split.age_dim}, std::move(age)),
            Tensor({split.gender_dim}, std::move(gender))};
}

JointLossResult joint_loss(const PairBatch& batch, Backbone& backbone,
                           const HeadSplit& split, const LossConfig& cfg,
                           const TaskWeights& weights) {
    batch.validate();
    split.validate();
    weights.validate();
    if (split.total() != backbone.config().embedding_dim) {
        throw std::invalid_argument("head split " + std::to_string(split.age_dim) + "+" +
                                    std::to_string(split.gender_dim) +
                                    " does not match embedding dim " +
                                    std::to_string(backbone.config().embedding_dim));
    }
    if (weights.w_gender > 0.0 && batch.genders.size() != batch.size()) {
        throw std::invalid_argument("gender task is weighted but the batch carries no "
                                    "gender labels");
    }

    const std::size_t n = batch.size();
    std::vector<ForwardTrace> traces;
    traces.reserve(n);
    for (const Tensor& input : batch.inputs) {
        traces.push_back(backbone_forward(backbone, input).second);
    }

    const std::size_t age_dim = static_cast<std::size_t>(split.age_dim);
    const std::size_t gender_dim = static_cast<std::size_t>(split.gender_dim);
    std::vector<std::vector<double>> emb_grads(
        n, std::vector<double>(static_cast<std::size_t>(split.total()), 0.0));

    JointLossResult result;

    if (weights.w_age > 0.0) {
        std::vector<std::span<const double>> views;
        views.reserve(n);
        for (const ForwardTrace& t : traces) {
            views.emplace_back(t.embedding.data().data(), age_dim);
        }
        SweepResult sweep = sweep_embedding_grads(views, batch.age_classes, cfg);
        result.age_loss = sweep.loss;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < age_dim; ++d) {
                emb_grads[i][d] += weights.w_age * sweep.embedding_grads[i][d];
            }
        }
    }

    if (weights.w_gender > 0.0) {
        std::vector<std::span<const double>> views;
        views.reserve(n);
        for (const ForwardTrace& t : traces) {
            views.emplace_back(t.embedding.data().data() + age_dim, gender_dim);
        }
        SweepResult sweep = sweep_embedding_grads(views, batch.genders, cfg);
        result.gender_loss = sweep.loss;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < gender_dim; ++d) {
                emb_grads[i][age_dim + d] += weights.w_gender * sweep.embedding_grads[i][d];
            }
        }
    }

    result.total = weights.w_age * result.age_loss + weights.w_gender * result.gender_loss;

    for (std::size_t i = 0; i < n; ++i) {
        Tensor grad({split.total()}, std::move(emb_grads[i]));
        backbone_backward(backbone, traces[i], grad);
    }
    return result;
}

int gender_decode(const Tensor& gender_slice, const GenderPrototypes& prototypes) {
    const std::size_t dim = gender_slice.size();
    if (prototypes.female.size() != dim || prototypes.male.size() != dim) {
        throw std::invalid_argument(
            "gender prototypes missing or sized " + std::to_string(prototypes.female.size()) +
            "/" + std::to_string(prototypes.male.size()) + " for a slice of length " +
            std::to_string(dim));
    }
    double d_female = 0.0, d_male = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double df = gender_slice[i] - prototypes.female[i];
        const double dm = gender_slice[i] - prototypes.male[i];
        d_female += df * df;
        d_male += dm * dm;
    }
    return d_male < d_female ? 1 : 0;
}

} // namespace ccnn
