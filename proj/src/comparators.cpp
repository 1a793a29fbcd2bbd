#include "ccnn/comparators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccnn/multitask.hpp"

namespace ccnn {

int binary_target(int y, int k) {
    return y < k ? 1 : 0;
}

ComparatorOutput comparator_forward(const BinaryComparator& comp, const Tensor& input) {
    if (!comp.backbone) {
        throw std::invalid_argument("comparator has no backbone");
    }
    ComparatorOutput out;
    out.embedding = backbone_forward(*comp.backbone, input).first;

    const int head_dim = comp.head_input_dim();
    if (head_dim > static_cast<int>(out.embedding.size())) {
        throw std::invalid_argument("comparator head reads " + std::to_string(head_dim) +
                                    " dims but embedding has " +
                                    std::to_string(out.embedding.size()));
    }
    double z = comp.head_b.value[0];
    for (int j = 0; j < head_dim; ++j) {
        z += comp.head_w.value[static_cast<std::size_t>(j)] * out.embedding[static_cast<std::size_t>(j)];
    }
    out.probability = 1.0 / (1.0 + std::exp(-z));
    out.decision = out.probability > 0.5 ? 1 : 0;
    return out;
}

void ComparatorBank::validate() const {
    const int K = size();
    if (K < 2) {
        throw std::invalid_argument("comparator bank needs at least 2 comparators, has " +
                                    std::to_string(K));
    }
    if (static_cast<int>(class_ages.size()) != K) {
        throw std::invalid_argument("bank has " + std::to_string(K) + " comparators but " +
                                    std::to_string(class_ages.size()) + " class ages");
    }
    for (int k = 1; k <= K; ++k) {
        const BinaryComparator& c = comparators[static_cast<std::size_t>(k - 1)];
        if (c.threshold_class != k) {
            throw std::invalid_argument("comparator at position " + std::to_string(k - 1) +
                                        " has threshold class " +
                                        std::to_string(c.threshold_class) +
                                        "; thresholds must be exactly 1.." + std::to_string(K));
        }
        if (!c.backbone) {
            throw std::invalid_argument("comparator " + std::to_string(k) + " has no backbone");
        }
        const int emb = c.backbone->config().embedding_dim;
        if (age_dim + gender_dim != emb) {
            throw std::invalid_argument("bank split " + std::to_string(age_dim) + "+" +
                                        std::to_string(gender_dim) +
                                        " does not match embedding dim " + std::to_string(emb));
        }
        if (c.head_input_dim() != age_dim || c.head_w.value.shape()[0] != 1) {
            throw std::invalid_argument("comparator " + std::to_string(k) +
                                        " head shape " + c.head_w.value.shape_string() +
                                        " does not match age slice width " +
                                        std::to_string(age_dim));
        }
    }
    if (multitask() && !gender_prototypes.empty() &&
        static_cast<int>(gender_prototypes.size()) != K) {
        throw std::invalid_argument("bank carries " + std::to_string(gender_prototypes.size()) +
                                    " gender prototypes for " + std::to_string(K) +
                                    " comparators");
    }
}

ComparatorBank make_comparator_bank(int K, const BackboneConfig& backbone_cfg,
                                    std::vector<double> class_ages,
                                    int age_dim, int gender_dim,
                                    bool shared_backbone, Rng& rng) {
    if (K < 2) {
        throw std::invalid_argument("comparator bank needs K >= 2, got " + std::to_string(K));
    }
    if (age_dim + gender_dim != backbone_cfg.embedding_dim) {
        throw std::invalid_argument("split " + std::to_string(age_dim) + "+" +
                                    std::to_string(gender_dim) +
                                    " does not match embedding dim " +
                                    std::to_string(backbone_cfg.embedding_dim));
    }

    ComparatorBank bank;
    bank.class_ages = std::move(class_ages);
    bank.shared_backbone = shared_backbone;
    bank.age_dim = age_dim;
    bank.gender_dim = gender_dim;

    std::shared_ptr<Backbone> shared;
    if (shared_backbone) {
        shared = std::make_shared<Backbone>(backbone_cfg);
        shared->init_params(rng);
    }

    const double head_bound = 1.0 / std::sqrt(static_cast<double>(age_dim));
    for (int k = 1; k <= K; ++k) {
        BinaryComparator comp;
        if (shared_backbone) {
            comp.backbone = shared;
        } else {
            comp.backbone = std::make_shared<Backbone>(backbone_cfg);
            comp.backbone->init_params(rng);
        }
        comp.head_w = Param({1, age_dim});
        comp.head_b = Param({1});
        for (double& v : comp.head_w.value.data()) v = rng.uniform(-head_bound, head_bound);
        comp.head_b.value[0] = rng.uniform(-head_bound, head_bound);
        comp.threshold_class = k;
        bank.comparators.push_back(std::move(comp));
    }
    bank.validate();
    return bank;
}

HitsMatrix::HitsMatrix(int K) : k_(K) {
    if (K < 1) {
        throw std::invalid_argument("hits matrix needs K >= 1, got " + std::to_string(K));
    }
    bits_.assign(static_cast<std::size_t>(K) * static_cast<std::size_t>(K), 0);
}

int HitsMatrix::at(int row_k, int col_c) const {
    if (row_k < 1 || row_k > k_ || col_c < 1 || col_c > k_) {
        throw std::out_of_range("hits matrix index (" + std::to_string(row_k) + "," +
                                std::to_string(col_c) + ") outside 1.." + std::to_string(k_));
    }
    return bits_[static_cast<std::size_t>(row_k - 1) * k_ + (col_c - 1)];
}

void HitsMatrix::set(int row_k, int col_c, int bit) {
    if (bit != 0 && bit != 1) {
        throw std::invalid_argument("hits matrix bit must be 0 or 1");
    }
    if (row_k < 1 || row_k > k_ || col_c < 1 || col_c > k_) {
        throw std::out_of_range("hits matrix index (" + std::to_string(row_k) + "," +
                                std::to_string(col_c) + ") outside 1.." + std::to_string(k_));
    }
    bits_[static_cast<std::size_t>(row_k - 1) * k_ + (col_c - 1)] =
        static_cast<unsigned char>(bit);
}

std::vector<int> HitsMatrix::column_sums() const {
    std::vector<int> sums(static_cast<std::size_t>(k_), 0);
    for (int k = 1; k <= k_; ++k) {
        for (int c = 1; c <= k_; ++c) {
            sums[static_cast<std::size_t>(c - 1)] += at(k, c);
        }
    }
    return sums;
}

void HitsMatrix::validate() const {
    for (int k = 1; k <= k_; ++k) {
        bool prefix = true, suffix = true;
        for (int c = 1; c <= k_; ++c) {
            const int want_prefix = c < k ? 1 : 0;
            const int want_suffix = c >= k ? 1 : 0;
            if (at(k, c) != want_prefix) prefix = false;
            if (at(k, c) != want_suffix) suffix = false;
        }
        if (!prefix && !suffix) {
            throw std::invalid_argument("hits matrix row " + std::to_string(k) +
                                        " is neither the {c<k} prefix nor the {c>=k} suffix");
        }
    }
}

namespace {

void require_bits(std::span<const int> decisions, const char* what) {
    if (decisions.empty()) {
        throw std::invalid_argument(std::string(what) + ": empty decision vector");
    }
    for (int d : decisions) {
        if (d != 0 && d != 1) {
            throw std::invalid_argument(std::string(what) + ": decision " +
                                        std::to_string(d) + " is not 0/1");
        }
    }
}

} // namespace

HitsMatrix hits_from_outputs(std::span<const int> decisions) {
    require_bits(decisions, "hits_from_outputs");
    const int K = static_cast<int>(decisions.size());
    HitsMatrix m(K);
    for (int k = 1; k <= K; ++k) {
        const bool younger = decisions[static_cast<std::size_t>(k - 1)] == 1;
        for (int c = 1; c <= K; ++c) {
            const bool hit = younger ? (c < k) : (c >= k);
            m.set(k, c, hit ? 1 : 0);
        }
    }
    return m;
}

int hits_decode(const HitsMatrix& matrix) {
    matrix.validate();
    const std::vector<int> sums = matrix.column_sums();
    int best = 1;
    for (int c = 2; c <= matrix.K(); ++c) {
        if (sums[static_cast<std::size_t>(c - 1)] > sums[static_cast<std::size_t>(best - 1)]) {
            best = c;
        }
    }
    return best;
}

int ranking_decode(std::span<const int> decisions) {
    require_bits(decisions, "ranking_decode");
    int count = 0;
    for (int d : decisions) count += 1 - d;
    return count;
}

void ClassProbabilities::validate() const {
    if (p.empty() || p.size() != class_ages.size()) {
        throw std::invalid_argument("class probabilities: " + std::to_string(p.size()) +
                                    " probabilities vs " + std::to_string(class_ages.size()) +
                                    " class ages");
    }
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) {
            throw std::invalid_argument("class probability " + std::to_string(v) +
                                        " is negative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("class probabilities sum to " + std::to_string(sum) +
                                    ", not 1 within 1e-6");
    }
}

double dex_decode(const ClassProbabilities& probs) {
    probs.validate();
    double expectation = 0.0;
    for (std::size_t c = 0; c < probs.p.size(); ++c) {
        expectation += probs.p[c] * probs.class_ages[c];
    }
    return expectation;
}

ClassProbabilities class_probabilities_from_comparators(std::span<const double> probabilities,
                                                        std::vector<double> class_ages) {
    const std::size_t K = probabilities.size();
    if (K == 0 || class_ages.size() != K) {
        throw std::invalid_argument("comparator probabilities and class ages must have equal "
                                    "nonzero length");
    }
    // probabilities[k-1] approximates P(age < k); class masses are the
    // increments of that curve, with P(age < K+1) pinned to 1.
    std::vector<double> q(K, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
        const double hi = (c + 1 < K) ? probabilities[c + 1] : 1.0;
        const double lo = probabilities[c];
        q[c] = std::max(0.0, hi - lo);
        total += q[c];
    }
    if (total <= 0.0) {
        std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(K));
    } else {
        for (double& v : q) v /= total;
    }
    return ClassProbabilities{std::move(q), std::move(class_ages)};
}

Decoder decoder_from_string(const std::string& name) {
    if (name == "hits") return Decoder::hits;
    if (name == "ranking") return Decoder::ranking;
    if (name == "dex") return Decoder::dex;
    throw std::invalid_argument("unknown decoder '" + name + "'; expected hits, ranking, or dex");
}

std::string decoder_to_string(Decoder d) {
    switch (d) {
        case Decoder::hits: return "hits";
        case Decoder::ranking: return "ranking";
        case Decoder::dex: return "dex";
    }
    throw std::logic_error("unhandled decoder");
}

double predict_age(const ComparatorBank& bank, const Tensor& input, Decoder decoder) {
    bank.validate();
    const int K = bank.size();

    std::vector<int> decisions(static_cast<std::size_t>(K));
    std::vector<double> probabilities(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const ComparatorOutput out =
            comparator_forward(bank.comparators[static_cast<std::size_t>(k)], input);
        decisions[static_cast<std::size_t>(k)] = out.decision;
        probabilities[static_cast<std::size_t>(k)] = out.probability;
    }

    switch (decoder) {
        case Decoder::hits: {
            const int cls = hits_decode(hits_from_outputs(decisions));
            return bank.class_ages[static_cast<std::size_t>(cls - 1)];
        }
        case Decoder::ranking: {
            const int count = ranking_decode(decisions);
            const int cls = std::clamp(count, 1, K);
            return bank.class_ages[static_cast<std::size_t>(cls - 1)];
        }
        case Decoder::dex: {
            return dex_decode(
                class_probabilities_from_comparators(probabilities, bank.class_ages));
        }
    }
    throw std::logic_error("unhandled decoder");
}

int predict_gender(const ComparatorBank& bank, const Tensor& input) {
    bank.validate();
    if (!bank.multitask()) {
        throw std::invalid_argument("gender prediction requires a multi-task bank");
    }
    if (bank.gender_prototypes.empty()) {
        throw std::invalid_argument("bank carries no gender prototypes; train or load a "
                                    "multi-task checkpoint first");
    }

    const HeadSplit split{bank.age_dim, bank.gender_dim};
    int votes = 0;
    for (int k = 0; k < bank.size(); ++k) {
        const BinaryComparator& comp = bank.comparators[static_cast<std::size_t>(k)];
        const Embedding emb = backbone_forward(*comp.backbone, input).first;
        const auto [age_slice, gender_slice] = split_embedding(emb, split);
        votes += gender_decode(gender_slice,
                               bank.gender_prototypes[static_cast<std::size_t>(k)]);
        if (bank.shared_backbone) {
            // One backbone, one slice; a vote per head would just repeat it.
            return votes;
        }
    }
    return 2 * votes > bank.size() ? 1 : 0;
}

} // namespace ccnn
