#pragma once

#include <cstdint>
#include <string>

namespace ccnn {

// Full training/evaluation configuration. Loaded from a flat key=value file;
// unknown keys are errors. embedding_dim 0 means "derive": 70 single-task,
// age_dim + gender_dim in multi-task mode.
struct RunConfig {
    std::uint64_t seed = 1;
    int classes = 10;         // K
    double bin_width = 1.0;   // years per age class
    int image_size = 16;
    double margin = 1.0;
    double lambda = 0.5;      // comparative-loss weight next to the BCE term
    double learning_rate = 0.02;
    int epochs = 30;
    int batch_size = 16;
    int age_dim = 70;
    int gender_dim = 10;
    double w_age = 1.0;
    double w_gender = 1.0;
    std::string decoder = "hits";
    int tolerance = 5;
    bool multitask = false;
    bool shared_backbone = false;

    // Backbone sizing.
    int conv_channels = 4;
    int hidden1 = 32;
    int hidden2 = 32;
    int embedding_dim = 0;

    int effective_embedding_dim() const;
    int effective_age_dim() const;    // head width: age_dim when multitask, else embedding
    int effective_gender_dim() const; // 0 when single-task

    void validate() const;
};

// Parses `key=value` lines; blank lines and lines starting with '#' are
// skipped. Unknown keys, duplicate keys, and unparseable values are errors
// naming the offending line.
RunConfig parse_config_file(const std::string& path);

RunConfig parse_config_text(const std::string& text, const std::string& origin);

std::string config_to_text(const RunConfig& cfg);

} // namespace ccnn
