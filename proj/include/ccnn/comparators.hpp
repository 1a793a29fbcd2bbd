#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccnn/backbone.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

// Supervision target of threshold comparator k: 1 iff the true class is
// strictly younger than k, 0 for y >= k.
int binary_target(int y, int k);

// One threshold comparator: a backbone plus a dense->sigmoid binary head.
// The head reads the leading head_w columns of the embedding, which is the
// full embedding in single-task banks and the age slice in multi-task banks.
// Backbones are shared between comparators when the bank runs in
// shared-backbone mode, hence the shared_ptr.
struct BinaryComparator {
    std::shared_ptr<Backbone> backbone;
    Param head_w; // [1, head_input_dim]
    Param head_b; // [1]
    int threshold_class = 0;

    int head_input_dim() const { return head_w.value.shape()[1]; }
};

struct ComparatorOutput {
    int decision = 0;      // 1 = "younger than threshold"
    double probability = 0.5;
    Embedding embedding;
};

// probability = sigmoid(head(embedding)); decision = 1 iff probability > 0.5,
// so an exact 0.5 resolves to 0 ("older or equal").
ComparatorOutput comparator_forward(const BinaryComparator& comp, const Tensor& input);

struct GenderPrototypes {
    std::vector<double> female;
    std::vector<double> male;
};

// K binary comparators ordered by threshold class 1..K, plus the class-to-age
// mapping used by the decoders. Multi-task banks carry the embedding split
// and per-comparator gender prototypes.
struct ComparatorBank {
    std::vector<BinaryComparator> comparators;
    std::vector<double> class_ages; // representative age per class, length K
    bool shared_backbone = false;
    int age_dim = 0;    // head/age-slice width; equals embedding_dim when gender_dim == 0
    int gender_dim = 0; // 0 for single-task banks
    std::vector<GenderPrototypes> gender_prototypes; // per comparator, multi-task only

    int size() const { return static_cast<int>(comparators.size()); }
    bool multitask() const { return gender_dim > 0; }
    void validate() const;
};

// Freshly initialized bank: K comparators over the given backbone
// configuration, parameters drawn from one seeded stream in comparator order.
ComparatorBank make_comparator_bank(int K, const BackboneConfig& backbone_cfg,
                                    std::vector<double> class_ages,
                                    int age_dim, int gender_dim,
                                    bool shared_backbone, Rng& rng);

// K x K vote matrix; row k marks the candidate classes consistent with
// comparator k's decision: {c < k} for "younger", {c >= k} otherwise.
// Rows and columns are addressed by 1-based class index.
class HitsMatrix {
public:
    explicit HitsMatrix(int K);

    int K() const { return k_; }
    int at(int row_k, int col_c) const;
    void set(int row_k, int col_c, int bit);

    std::vector<int> column_sums() const;

    // Every row must be a contiguous prefix {c < k} or suffix {c >= k} of ones.
    void validate() const;

private:
    int k_ = 0;
    std::vector<unsigned char> bits_;
};

HitsMatrix hits_from_outputs(std::span<const int> decisions);

// Class with the maximum column sum; ties resolve to the smallest class.
int hits_decode(const HitsMatrix& matrix);

// Count of "older-or-equal" outputs: sum_k (1 - decision_k). For decisions
// consistent with true class y this is exactly y; ranges over [0, K].
int ranking_decode(std::span<const int> decisions);

// Softmax-style distribution over classes with representative ages.
struct ClassProbabilities {
    std::vector<double> p;
    std::vector<double> class_ages;

    void validate() const; // p >= 0 and sums to 1 within 1e-6
};

// Expected age under the class distribution.
double dex_decode(const ClassProbabilities& probs);

// Distribution over classes derived from the K comparator probabilities by
// differencing the implied "younger than k" curve; negative increments are
// clamped and the result renormalized (uniform when all mass vanishes).
ClassProbabilities class_probabilities_from_comparators(std::span<const double> probabilities,
                                                        std::vector<double> class_ages);

enum class Decoder { hits, ranking, dex };

Decoder decoder_from_string(const std::string& name);
std::string decoder_to_string(Decoder d);

// Runs all K comparators on the input and decodes an age estimate. Hits and
// ranking estimates are mapped through class_ages (a ranking count of 0
// clamps to class 1); dex interpolates between class ages.
double predict_age(const ComparatorBank& bank, const Tensor& input, Decoder decoder);

// Majority vote of per-comparator nearest-prototype decisions over the
// gender slice; ties resolve to 0. Requires a multi-task bank with prototypes.
int predict_gender(const ComparatorBank& bank, const Tensor& input);

} // namespace ccnn
