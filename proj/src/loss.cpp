#include "ccnn/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ccnn {

void LossConfig::validate() const {
    if (!(margin > 0.0)) {
        throw std::invalid_argument("loss margin must be positive, got " +
                                    std::to_string(margin));
    }
}

double energy(const Embedding& a, const Embedding& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("energy: embedding shapes differ, " +
                                    a.shape_string() + " vs " + b.shape_string());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

int comparison_label(int class_a, int class_b) {
    return class_a == class_b ? 1 : 0;
}

double comparative_loss(int z, double e, const LossConfig& cfg) {
    cfg.validate();
    if (e < 0.0) {
        throw std::invalid_argument("energy must be nonnegative, got " +
                                    std::to_string(e));
    }
    if (z == 1) return e * e;
    if (z == 0) {
        const double slack = cfg.margin - e;
        return slack > 0.0 ? slack * slack : 0.0;
    }
    throw std::invalid_argument("comparison label must be 0 or 1, got " +
                                std::to_string(z));
}

namespace {

// dL/dE at energy e, with the zero subgradient at E=0 (z=0) and E=margin.
double loss_denergy(int z, double e, const LossConfig& cfg) {
    if (z == 1) return 2.0 * e;
    const double slack = cfg.margin - e;
    return slack > 0.0 ? -2.0 * slack : 0.0;
}

} // namespace

PairLossGrad comparative_loss_grad(int z, const Embedding& a, const Embedding& b,
                                   const LossConfig& cfg) {
    cfg.validate();
    if (!a.same_shape(b)) {
        throw std::invalid_argument("comparative_loss_grad: embedding shapes differ, " +
                                    a.shape_string() + " vs " + b.shape_string());
    }
    if (z != 0 && z != 1) {
        throw std::invalid_argument("comparison label must be 0 or 1, got " +
                                    std::to_string(z));
    }

    PairLossGrad out;
    out.grad_a.assign(a.size(), 0.0);
    out.grad_b.assign(b.size(), 0.0);

    if (z == 1) {
        // E^2 = sum (a-b)^2 is smooth everywhere, including at E=0.
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
            out.grad_a[i] = 2.0 * d;
            out.grad_b[i] = -2.0 * d;
        }
        out.loss = sum;
        return out;
    }

    const double e = energy(a, b);
    out.loss = comparative_loss(0, e, cfg);
    if (e == 0.0 || e >= cfg.margin) {
        return out; // hinge inactive or coincident pair: zero subgradient
    }
    const double scale = loss_denergy(0, e, cfg) / e;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        out.grad_a[i] = scale * d;
        out.grad_b[i] = -scale * d;
    }
    return out;
}

SweepResult sweep_embedding_grads(std::span<const std::span<const double>> embeddings,
                                  std::span<const int> labels,
                                  const LossConfig& cfg) {
    cfg.validate();
    const std::size_t n = embeddings.size();
    if (n < 2) {
        throw std::invalid_argument("baseline sweep needs at least 2 samples, got " +
                                    std::to_string(n));
    }
    if (labels.size() != n) {
        throw std::invalid_argument("baseline sweep: " + std::to_string(n) +
                                    " embeddings but " + std::to_string(labels.size()) +
                                    " labels");
    }
    const std::size_t dim = embeddings[0].size();
    for (const auto& e : embeddings) {
        if (e.size() != dim) {
            throw std::invalid_argument("baseline sweep: embeddings have mixed lengths");
        }
    }

    SweepResult result;
    result.embedding_grads.assign(n, std::vector<double>(dim, 0.0));

    // loss = mean over baselines m of mean over i != m; every ordered pair
    // carries weight 1/(n*(n-1)).
    const double pair_weight = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));

    for (std::size_t m = 0; m < n; ++m) {
        const std::span<const double> base = embeddings[m];
        for (std::size_t i = 0; i < n; ++i) {
            if (i == m) continue;
            const std::span<const double> x = embeddings[i];
            const int z = comparison_label(labels[i], labels[m]);

            double sq = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = x[d] - base[d];
                sq += diff * diff;
            }

            if (z == 1) {
                result.loss += pair_weight * sq;
                const double s = 2.0 * pair_weight;
                for (std::size_t d = 0; d < dim; ++d) {
                    const double diff = x[d] - base[d];
                    result.embedding_grads[i][d] += s * diff;
                    result.embedding_grads[m][d] -= s * diff;
                }
            } else {
                const double e = std::sqrt(sq);
                const double slack = cfg.margin - e;
                if (slack <= 0.0) continue;
                result.loss += pair_weight * slack * slack;
                if (e == 0.0) continue; // zero subgradient at the coincident pair
                const double s = pair_weight * (-2.0 * slack) / e;
                for (std::size_t d = 0; d < dim; ++d) {
                    const double diff = x[d] - base[d];
                    result.embedding_grads[i][d] += s * diff;
                    result.embedding_grads[m][d] -= s * diff;
                }
            }
        }
    }
    return result;
}

void PairBatch::validate() const {
    if (inputs.size() < 2) {
        throw std::invalid_argument("pair batch needs at least 2 samples, got " +
                                    std::to_string(inputs.size()));
    }
    if (age_classes.size() != inputs.size()) {
        throw std::invalid_argument("pair batch: label count does not match input count");
    }
    if (!genders.empty() && genders.size() != inputs.size()) {
        throw std::invalid_argument("pair batch: gender count does not match input count");
    }
    for (const Tensor& t : inputs) {
        if (!t.same_shape(inputs.front())) {
            throw std::invalid_argument("pair batch inputs must share one shape; got " +
                                        inputs.front().shape_string() + " and " +
                                        t.shape_string());
        }
    }
}

double baseline_sweep_loss(const PairBatch& batch, Backbone& backbone,
                           const LossConfig& cfg) {
    batch.validate();
    const std::size_t n = batch.size();

    std::vector<ForwardTrace> traces;
    traces.reserve(n);
    for (const Tensor& input : batch.inputs) {
        traces.push_back(backbone_forward(backbone, input).second);
    }

    std::vector<std::span<const double>> views;
    views.reserve(n);
    for (const ForwardTrace& t : traces) {
        views.emplace_back(t.embedding.data());
    }

    SweepResult sweep = sweep_embedding_grads(views, batch.age_classes, cfg);

    const int dim = backbone.config().embedding_dim;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor grad({dim}, std::move(sweep.embedding_grads[i]));
        backbone_backward(backbone, traces[i], grad);
    }
    return sweep.loss;
}

} // namespace ccnn
