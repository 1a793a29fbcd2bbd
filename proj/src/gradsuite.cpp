#include "ccnn/gradsuite.hpp"

#include <cmath>
#include <sstream>

#include "ccnn/backbone.hpp"
#include "ccnn/loss.hpp"
#include "ccnn/multitask.hpp"
#include "ccnn/train.hpp"

namespace ccnn {

namespace {

constexpr double kKinkGuard = 1e-3;

BackboneConfig suite_backbone_config() {
    BackboneConfig cfg;
    cfg.input_shape = {1, 6, 6};
    cfg.conv_channels = 2;
    cfg.hidden1 = 6;
    cfg.hidden2 = 6;
    cfg.embedding_dim = 6;
    return cfg;
}

bool trace_clear_of_kinks(const ForwardTrace& trace) {
    for (const Tensor* pre : {&trace.conv_pre, &trace.d1_pre, &trace.d2_pre}) {
        for (std::size_t i = 0; i < pre->size(); ++i) {
            if (std::abs((*pre)[i]) < kKinkGuard) return false;
        }
    }
    return true;
}

struct Fixture {
    Backbone backbone;
    std::vector<Tensor> inputs;
    std::vector<int> age_classes;
    std::vector<int> genders;

    Fixture() : backbone(suite_backbone_config()) {}
};

struct SliceSpec {
    std::size_t offset;
    std::size_t dim;
};

// Draws backbone parameters and n inputs, redrawing until every trace is
// kink-free and every pair energy over each guarded slice sits away from 0
// and from the margin.
Fixture make_fixture(std::uint64_t seed, std::size_t n, double margin,
                     std::vector<SliceSpec> slices = {}) {
    if (slices.empty()) {
        slices.push_back({0, static_cast<std::size_t>(
                                 suite_backbone_config().embedding_dim)});
    }
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(seed + attempt * 1000003ULL);
        Fixture f;
        f.backbone.init_params(rng);
        bool ok = true;
        std::vector<Embedding> embs;
        for (std::size_t i = 0; i < n; ++i) {
            Tensor input({1, 6, 6});
            for (double& v : input.data()) v = rng.uniform(-1.0, 1.0);
            const auto [emb, trace] = backbone_forward(f.backbone, input);
            if (!trace_clear_of_kinks(trace)) {
                ok = false;
                break;
            }
            f.inputs.push_back(std::move(input));
            embs.push_back(emb);
            f.age_classes.push_back(1 + static_cast<int>(rng.below(3)));
            f.genders.push_back(static_cast<int>(rng.below(2)));
        }
        if (!ok) continue;
        for (std::size_t i = 0; i < n && ok; ++i) {
            for (std::size_t j = i + 1; j < n && ok; ++j) {
                for (const SliceSpec& s : slices) {
                    double sq = 0.0;
                    for (std::size_t d = 0; d < s.dim; ++d) {
                        const double diff = embs[i][s.offset + d] - embs[j][s.offset + d];
                        sq += diff * diff;
                    }
                    const double e = std::sqrt(sq);
                    if (e < kKinkGuard || std::abs(e - margin) < kKinkGuard) {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if (ok) return f;
    }
}

std::vector<NamedParam> backbone_params(Backbone& net) {
    std::vector<NamedParam> out;
    const auto& names = Backbone::param_names();
    const auto ptrs = net.params();
    for (std::size_t i = 0; i < ptrs.size(); ++i) out.push_back({names[i], ptrs[i]});
    return out;
}

void record(GradSuiteResult& result, const std::string& what,
            const GradCheckReport& report) {
    ++result.checks;
    result.max_rel_err = std::max(result.max_rel_err, report.max_rel_err());
    if (!report.passed()) {
        result.passed = false;
        result.failures.push_back(what + ":\n" + report.to_string());
    }
}

// Mean BCE of the K=1 head over the fixture inputs plus lambda times the
// side-label sweep: the objective one trainer batch optimizes.
double batch_objective(Backbone& net, Param& head_w, Param& head_b,
                       const std::vector<Tensor>& inputs,
                       const std::vector<int>& targets,
                       const LossConfig& loss_cfg, double lambda, bool with_grad) {
    const std::size_t n = inputs.size();
    const std::size_t dim = static_cast<std::size_t>(net.config().embedding_dim);
    std::vector<ForwardTrace> traces;
    std::vector<std::vector<double>> emb_grads(n, std::vector<double>(dim, 0.0));
    for (const Tensor& x : inputs) traces.push_back(backbone_forward(net, x).second);

    double bce = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = head_b.value[0];
        for (std::size_t j = 0; j < dim; ++j) {
            z += head_w.value[j] * traces[i].embedding[j];
        }
        bce += bce_from_logit(z, targets[i]);
        if (with_grad) {
            const double dz = inv_n * (1.0 / (1.0 + std::exp(-z)) - targets[i]);
            head_b.grad[0] += dz;
            for (std::size_t j = 0; j < dim; ++j) {
                head_w.grad[j] += dz * traces[i].embedding[j];
                emb_grads[i][j] += dz * head_w.value[j];
            }
        }
    }
    bce *= inv_n;

    std::vector<std::span<const double>> views;
    for (const auto& t : traces) views.emplace_back(t.embedding.data());
    const SweepResult sweep = sweep_embedding_grads(views, targets, loss_cfg);

    if (with_grad) {
        for (std::size_t i = 0; i < n; ++i) {
            Tensor g({static_cast<int>(dim)});
            for (std::size_t j = 0; j < dim; ++j) {
                g[j] = emb_grads[i][j] + lambda * sweep.embedding_grads[i][j];
            }
            backbone_backward(net, traces[i], g);
        }
    }
    return bce + lambda * sweep.loss;
}

} // namespace

std::string GradSuiteResult::summary() const {
    std::ostringstream os;
    os << (passed ? "PASS" : "FAIL") << ": " << checks
       << " gradient checks, max relative error " << max_rel_err << "\n";
    for (const auto& f : failures) os << f;
    return os.str();
}

GradSuiteResult run_gradient_suite(std::uint64_t first_seed, int n_seeds,
                                   double step, double tol) {
    GradSuiteResult result;
    const LossConfig loss_cfg{1.0};

    for (int s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(s);
        const std::string tag = " (seed " + std::to_string(seed) + ")";

        { // Every layer via a linear probe of the embedding, input included.
            Fixture f = make_fixture(seed, 1, loss_cfg.margin);
            Rng rng(seed ^ 0xabcdef);
            Tensor probe({6});
            for (double& v : probe.data()) v = rng.uniform(-1.0, 1.0);
            Param input_param(f.inputs[0]);
            auto params = backbone_params(f.backbone);
            params.push_back({"input", &input_param});

            const auto loss = [&](bool with_grad) {
                const auto [emb, trace] = backbone_forward(f.backbone, input_param.value);
                double value = 0.0;
                for (std::size_t i = 0; i < emb.size(); ++i) value += probe[i] * emb[i];
                if (with_grad) {
                    const Tensor gi =
                        backbone_backward(f.backbone, trace, Tensor(probe));
                    for (std::size_t i = 0; i < gi.size(); ++i) {
                        input_param.grad[i] += gi[i];
                    }
                }
                return value;
            };
            record(result, "layer probe" + tag, finite_diff_check(loss, params, step, tol));
        }

        for (const int z : {0, 1}) { // Comparative loss through two forwards.
            Fixture f = make_fixture(seed * 2 + 17, 2, loss_cfg.margin);
            auto params = backbone_params(f.backbone);
            const auto loss = [&](bool with_grad) {
                const auto [e1, t1] = backbone_forward(f.backbone, f.inputs[0]);
                const auto [e2, t2] = backbone_forward(f.backbone, f.inputs[1]);
                const PairLossGrad g = comparative_loss_grad(z, e1, e2, loss_cfg);
                if (with_grad) {
                    backbone_backward(f.backbone, t1,
                                      Tensor({6}, std::vector<double>(g.grad_a)));
                    backbone_backward(f.backbone, t2,
                                      Tensor({6}, std::vector<double>(g.grad_b)));
                }
                return g.loss;
            };
            record(result, "comparative pair z=" + std::to_string(z) + tag,
                   finite_diff_check(loss, params, step, tol));
        }

        { // BCE head and the full batch objective.
            Fixture f = make_fixture(seed * 3 + 101, 4, loss_cfg.margin);
            Rng rng(seed ^ 0x5a5a5a);
            Param head_w({1, 6});
            Param head_b({1});
            for (double& v : head_w.value.data()) v = rng.uniform(-0.5, 0.5);
            head_b.value[0] = rng.uniform(-0.5, 0.5);
            std::vector<int> targets;
            for (std::size_t i = 0; i < f.inputs.size(); ++i) {
                targets.push_back(static_cast<int>(rng.below(2)));
            }

            auto params = backbone_params(f.backbone);
            params.push_back({"head_w", &head_w});
            params.push_back({"head_b", &head_b});

            const auto bce_only = [&](bool with_grad) {
                return batch_objective(f.backbone, head_w, head_b, f.inputs, targets,
                                       loss_cfg, 0.0, with_grad);
            };
            record(result, "bce head" + tag,
                   finite_diff_check(bce_only, params, step, tol));

            const auto full = [&](bool with_grad) {
                return batch_objective(f.backbone, head_w, head_b, f.inputs, targets,
                                       loss_cfg, 0.5, with_grad);
            };
            record(result, "batch objective" + tag,
                   finite_diff_check(full, params, step, tol));
        }

        { // Joint multi-task loss over a 4-sample batch.
            Fixture f = make_fixture(seed * 5 + 271, 4, loss_cfg.margin,
                                     {{0, 4}, {4, 2}});
            const HeadSplit split{4, 2};
            const TaskWeights weights{1.0, 1.0};
            PairBatch batch;
            batch.inputs = f.inputs;
            batch.age_classes = f.age_classes;
            batch.genders = f.genders;

            auto params = backbone_params(f.backbone);
            const auto loss = [&](bool with_grad) {
                if (with_grad) {
                    return joint_loss(batch, f.backbone, split, loss_cfg, weights).total;
                }
                std::vector<Embedding> embs;
                for (const auto& x : batch.inputs) {
                    embs.push_back(backbone_forward(f.backbone, x).first);
                }
                std::vector<std::span<const double>> age_views, gender_views;
                for (const auto& e : embs) {
                    age_views.emplace_back(e.data().data(), 4);
                    gender_views.emplace_back(e.data().data() + 4, 2);
                }
                return weights.w_age *
                           sweep_embedding_grads(age_views, batch.age_classes, loss_cfg)
                               .loss +
                       weights.w_gender *
                           sweep_embedding_grads(gender_views, batch.genders, loss_cfg)
                               .loss;
            };
            record(result, "joint multitask" + tag,
                   finite_diff_check(loss, params, step, tol));
        }
    }
    return result;
}

} // namespace ccnn
