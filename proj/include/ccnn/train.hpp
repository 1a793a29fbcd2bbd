#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ccnn/comparators.hpp"
#include "ccnn/config.hpp"
#include "ccnn/dataset.hpp"
#include "ccnn/metrics.hpp"
#include "ccnn/rng.hpp"

namespace ccnn {

struct TrainHistory {
    // per_comparator[k][epoch]: mean batch loss of comparator k+1 (BCE plus
    // the weighted comparative term) over that epoch.
    std::vector<std::vector<double>> per_comparator;
};

// Numerically stable binary cross-entropy of a sigmoid head at logit z
// against target t in {0,1}; d/dz is sigmoid(z) - t.
double bce_from_logit(double z, int t);

// Trains every comparator against its binary threshold targets. Each batch
// optimizes BCE on the head plus lambda times the rotating-baseline sweep,
// with comparison labels taken from the side of the comparator's threshold
// (and from gender on the gender slice in multi-task mode). Separate-backbone
// banks train comparator by comparator; shared-backbone banks train all heads
// jointly. Rejects empty training splits and label/K mismatches up front.
// Multi-task banks leave training with gender prototypes computed over the
// training split.
TrainHistory train_comparator_bank(ComparatorBank& bank, const Dataset& dataset,
                                   const RunConfig& cfg, Rng& rng);

// make_comparator_bank + train_comparator_bank from one seeded stream.
std::pair<ComparatorBank, TrainHistory> train_from_config(const Dataset& dataset,
                                                          const RunConfig& cfg);

// Mean gender slice per gender over the given samples, one prototype pair per
// comparator. Rejects the call when either gender is absent.
std::vector<GenderPrototypes> compute_gender_prototypes(const ComparatorBank& bank,
                                                        const Dataset& dataset,
                                                        std::span<const std::size_t> indices);

// Runs the bank over the given dataset indices and assembles the metrics
// report (gender accuracy included for multi-task banks). The bank's class
// count must match the dataset's.
EvalReport evaluate_bank(const ComparatorBank& bank, const Dataset& dataset,
                         std::span<const std::size_t> indices, Decoder decoder,
                         int tolerance);

std::string history_csv(const TrainHistory& history);

} // namespace ccnn
