#include "ccnn/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ccnn/loss.hpp"

namespace ccnn {

double bce_from_logit(double z, int t) {
    if (t != 0 && t != 1) {
        throw std::invalid_argument("bce target must be 0 or 1, got " + std::to_string(t));
    }
    const double softplus = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
    return t == 1 ? softplus - z : softplus;
}

namespace {

struct BatchSample {
    const Sample* sample = nullptr;
    ForwardTrace trace;
    std::vector<double> emb_grad;
};

// Head forward + BCE over the batch for one comparator. Returns the mean BCE;
// head gradients and per-sample embedding gradients receive d(mean BCE)
// scaled by `weight`.
double head_bce_pass(BinaryComparator& comp, std::vector<BatchSample>& batch,
                     double weight) {
    const int head_dim = comp.head_input_dim();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (BatchSample& bs : batch) {
        double z = comp.head_b.value[0];
        for (int j = 0; j < head_dim; ++j) {
            z += comp.head_w.value[static_cast<std::size_t>(j)] *
                 bs.trace.embedding[static_cast<std::size_t>(j)];
        }
        const int target = binary_target(bs.sample->age_class, comp.threshold_class);
        loss += bce_from_logit(z, target);

        const double prob = 1.0 / (1.0 + std::exp(-z));
        const double dz = weight * inv_b * (prob - target);
        comp.head_b.grad[0] += dz;
        for (int j = 0; j < head_dim; ++j) {
            comp.head_w.grad[static_cast<std::size_t>(j)] +=
                dz * bs.trace.embedding[static_cast<std::size_t>(j)];
            bs.emb_grad[static_cast<std::size_t>(j)] +=
                dz * comp.head_w.value[static_cast<std::size_t>(j)];
        }
    }
    return loss * inv_b;
}

// Comparative sweep over slice [offset, offset+dim) of the embeddings; the
// returned loss is unweighted, gradients are scaled by `weight`.
double sweep_pass(std::vector<BatchSample>& batch, std::span<const int> labels,
                  std::size_t offset, std::size_t dim, double weight,
                  const LossConfig& loss_cfg) {
    if (batch.size() < 2 || weight == 0.0) return 0.0;
    std::vector<std::span<const double>> views;
    views.reserve(batch.size());
    for (const BatchSample& bs : batch) {
        views.emplace_back(bs.trace.embedding.data().data() + offset, dim);
    }
    SweepResult sweep = sweep_embedding_grads(views, labels, loss_cfg);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
            batch[i].emb_grad[offset + d] += weight * sweep.embedding_grads[i][d];
        }
    }
    return sweep.loss;
}

std::vector<BatchSample> forward_batch(const Backbone& backbone,
                                       const Dataset& dataset,
                                       const std::vector<std::size_t>& batch_idx,
                                       std::size_t emb_dim) {
    std::vector<BatchSample> batch;
    batch.reserve(batch_idx.size());
    for (std::size_t di : batch_idx) {
        BatchSample bs;
        bs.sample = &dataset.samples[di];
        bs.trace = backbone_forward(backbone, bs.sample->input).second;
        bs.emb_grad.assign(emb_dim, 0.0);
        batch.push_back(std::move(bs));
    }
    return batch;
}

std::vector<int> side_labels_for(const std::vector<BatchSample>& batch, int threshold) {
    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        labels[i] = binary_target(batch[i].sample->age_class, threshold);
    }
    return labels;
}

std::vector<int> gender_labels_for(const std::vector<BatchSample>& batch) {
    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        labels[i] = batch[i].sample->gender;
    }
    return labels;
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order,
                                                   int batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

void check_trainable(const ComparatorBank& bank, const Dataset& dataset,
                     const RunConfig& cfg) {
    bank.validate();
    dataset.validate();
    if (bank.size() != dataset.K) {
        throw std::invalid_argument("bank has K=" + std::to_string(bank.size()) +
                                    " but dataset has K=" + std::to_string(dataset.K));
    }
    if (dataset.train_idx.empty()) {
        throw std::invalid_argument("dataset has an empty training split");
    }
    if (bank.multitask() != cfg.multitask) {
        throw std::invalid_argument("bank and config disagree about multi-task mode");
    }
}

void backward_batch(Backbone& backbone, std::vector<BatchSample>& batch) {
    for (BatchSample& bs : batch) {
        const int dim = static_cast<int>(bs.emb_grad.size());
        Tensor grad({dim}, std::move(bs.emb_grad));
        backbone_backward(backbone, bs.trace, grad);
    }
}

} // namespace

TrainHistory train_comparator_bank(ComparatorBank& bank, const Dataset& dataset,
                                   const RunConfig& cfg, Rng& rng) {
    cfg.validate();
    check_trainable(bank, dataset, cfg);

    const LossConfig loss_cfg{cfg.margin};
    const int K = bank.size();
    const std::size_t age_dim = static_cast<std::size_t>(bank.age_dim);
    const std::size_t gender_dim = static_cast<std::size_t>(bank.gender_dim);
    const std::size_t emb_dim = age_dim + gender_dim;
    const double w_age = bank.multitask() ? cfg.w_age : 1.0;
    const double w_gender = bank.multitask() ? cfg.w_gender : 0.0;

    TrainHistory history;
    history.per_comparator.assign(static_cast<std::size_t>(K), {});

    if (!bank.shared_backbone) {
        // Independent comparators: each trains through its own full schedule.
        for (int ci = 0; ci < K; ++ci) {
            BinaryComparator& comp = bank.comparators[static_cast<std::size_t>(ci)];
            for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
                std::vector<std::size_t> order = dataset.train_idx;
                rng.shuffle(order);
                const auto batches = make_batches(std::move(order), cfg.batch_size);

                double epoch_loss = 0.0;
                for (const auto& batch_idx : batches) {
                    auto batch = forward_batch(*comp.backbone, dataset, batch_idx, emb_dim);

                    double total = head_bce_pass(comp, batch, 1.0);
                    const auto sides = side_labels_for(batch, comp.threshold_class);
                    total += cfg.lambda * w_age *
                             sweep_pass(batch, sides, 0, age_dim,
                                        cfg.lambda * w_age, loss_cfg);
                    if (w_gender > 0.0) {
                        const auto genders = gender_labels_for(batch);
                        total += cfg.lambda * w_gender *
                                 sweep_pass(batch, genders, age_dim, gender_dim,
                                            cfg.lambda * w_gender, loss_cfg);
                    }

                    backward_batch(*comp.backbone, batch);
                    std::vector<Param*> params = comp.backbone->params();
                    params.push_back(&comp.head_w);
                    params.push_back(&comp.head_b);
                    sgd_step(params, cfg.learning_rate);
                    epoch_loss += total;
                }
                history.per_comparator[static_cast<std::size_t>(ci)].push_back(
                    epoch_loss / static_cast<double>(batches.size()));
            }
        }
    } else {
        // One backbone, K heads, trained jointly:
        // loss = (1/K) sum_k [bce_k + lambda*w_age*sweep_k] + lambda*w_gender*gender_sweep.
        Backbone& backbone = *bank.comparators.front().backbone;
        const double inv_k = 1.0 / static_cast<double>(K);
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::vector<std::size_t> order = dataset.train_idx;
            rng.shuffle(order);
            const auto batches = make_batches(std::move(order), cfg.batch_size);

            std::vector<double> epoch_losses(static_cast<std::size_t>(K), 0.0);
            for (const auto& batch_idx : batches) {
                auto batch = forward_batch(backbone, dataset, batch_idx, emb_dim);

                for (int ci = 0; ci < K; ++ci) {
                    BinaryComparator& comp = bank.comparators[static_cast<std::size_t>(ci)];
                    double part = head_bce_pass(comp, batch, inv_k);
                    const auto sides = side_labels_for(batch, comp.threshold_class);
                    part += cfg.lambda * w_age *
                            sweep_pass(batch, sides, 0, age_dim,
                                       inv_k * cfg.lambda * w_age, loss_cfg);
                    epoch_losses[static_cast<std::size_t>(ci)] += part;
                }
                if (w_gender > 0.0) {
                    const auto genders = gender_labels_for(batch);
                    const double gender_loss =
                        sweep_pass(batch, genders, age_dim, gender_dim,
                                   cfg.lambda * w_gender, loss_cfg);
                    for (double& l : epoch_losses) {
                        l += cfg.lambda * w_gender * gender_loss;
                    }
                }

                backward_batch(backbone, batch);
                std::vector<Param*> params = backbone.params();
                for (BinaryComparator& comp : bank.comparators) {
                    params.push_back(&comp.head_w);
                    params.push_back(&comp.head_b);
                }
                sgd_step(params, cfg.learning_rate);
            }
            for (int ci = 0; ci < K; ++ci) {
                history.per_comparator[static_cast<std::size_t>(ci)].push_back(
                    epoch_losses[static_cast<std::size_t>(ci)] /
                    static_cast<double>(batches.size()));
            }
        }
    }

    if (bank.multitask()) {
        bank.gender_prototypes =
            compute_gender_prototypes(bank, dataset, dataset.train_idx);
    }
    return history;
}

std::pair<ComparatorBank, TrainHistory> train_from_config(const Dataset& dataset,
                                                          const RunConfig& cfg) {
    cfg.validate();
    dataset.validate();
    if (dataset.samples.empty()) {
        throw std::invalid_argument("cannot train on an empty dataset");
    }

    BackboneConfig bcfg;
    bcfg.input_shape = dataset.samples.front().input.shape();
    bcfg.conv_channels = cfg.conv_channels;
    bcfg.hidden1 = cfg.hidden1;
    bcfg.hidden2 = cfg.hidden2;
    bcfg.embedding_dim = cfg.effective_embedding_dim();

    Rng rng(cfg.seed);
    ComparatorBank bank = make_comparator_bank(
        dataset.K, bcfg, dataset.class_ages, cfg.effective_age_dim(),
        cfg.effective_gender_dim(), cfg.shared_backbone, rng);
    TrainHistory history = train_comparator_bank(bank, dataset, cfg, rng);
    return {std::move(bank), std::move(history)};
}

std::vector<GenderPrototypes> compute_gender_prototypes(
    const ComparatorBank& bank, const Dataset& dataset,
    std::span<const std::size_t> indices) {
    bank.validate();
    if (!bank.multitask()) {
        throw std::invalid_argument("gender prototypes require a multi-task bank");
    }
    const std::size_t age_dim = static_cast<std::size_t>(bank.age_dim);
    const std::size_t gender_dim = static_cast<std::size_t>(bank.gender_dim);

    std::vector<GenderPrototypes> prototypes;
    prototypes.reserve(static_cast<std::size_t>(bank.size()));
    for (const BinaryComparator& comp : bank.comparators) {
        GenderPrototypes proto;
        proto.female.assign(gender_dim, 0.0);
        proto.male.assign(gender_dim, 0.0);
        int n_female = 0, n_male = 0;
        for (std::size_t di : indices) {
            const Sample& s = dataset.samples[di];
            const Embedding emb = backbone_forward(*comp.backbone, s.input).first;
            std::vector<double>& acc = s.gender == 0 ? proto.female : proto.male;
            (s.gender == 0 ? n_female : n_male) += 1;
            for (std::size_t d = 0; d < gender_dim; ++d) {
                acc[d] += emb[age_dim + d];
            }
        }
        if (n_female == 0 || n_male == 0) {
            throw std::invalid_argument(
                "gender prototypes need at least one training sample per gender (got " +
                std::to_string(n_female) + " female, " + std::to_string(n_male) + " male)");
        }
        for (double& v : proto.female) v /= static_cast<double>(n_female);
        for (double& v : proto.male) v /= static_cast<double>(n_male);
        prototypes.push_back(std::move(proto));
    }
    return prototypes;
}

EvalReport evaluate_bank(const ComparatorBank& bank, const Dataset& dataset,
                         std::span<const std::size_t> indices, Decoder decoder,
                         int tolerance) {
    bank.validate();
    dataset.validate();
    if (bank.size() != dataset.K) {
        throw std::invalid_argument("checkpoint has K=" + std::to_string(bank.size()) +
                                    " comparators but the dataset has K=" +
                                    std::to_string(dataset.K) + " classes");
    }
    if (indices.empty()) {
        throw std::invalid_argument("evaluation split is empty");
    }

    std::vector<double> estimates, truths;
    std::vector<int> gender_est, gender_truth, truth_classes;
    estimates.reserve(indices.size());
    truths.reserve(indices.size());
    for (std::size_t di : indices) {
        const Sample& s = dataset.samples[di];
        estimates.push_back(predict_age(bank, s.input, decoder));
        truths.push_back(dataset.class_ages[static_cast<std::size_t>(s.age_class - 1)]);
        truth_classes.push_back(s.age_class);
        if (bank.multitask()) {
            gender_est.push_back(predict_gender(bank, s.input));
            gender_truth.push_back(s.gender);
        }
    }
    return make_report(estimates, truths, gender_est, gender_truth, tolerance,
                       truth_classes);
}

std::string history_csv(const TrainHistory& history) {
    std::ostringstream os;
    os << "comparator,epoch,loss\n";
    char buf[64];
    for (std::size_t k = 0; k < history.per_comparator.size(); ++k) {
        for (std::size_t e = 0; e < history.per_comparator[k].size(); ++e) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", k + 1, e + 1,
                          history.per_comparator[k][e]);
            os << buf;
        }
    }
    return os.str();
}

} // namespace ccnn
