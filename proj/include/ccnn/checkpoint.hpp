#pragma once

#include <string>

#include "ccnn/backbone.hpp"
#include "ccnn/comparators.hpp"

namespace ccnn {

// Versioned JSON checkpoints. Loading validates the format version and every
// layer shape before touching parameters, so a failed load never yields a
// partial model. Doubles serialize to shortest round-trip form; identical
// models produce byte-identical files.
inline constexpr int kCheckpointFormatVersion = 1;

std::string backbone_to_json(const Backbone& backbone);
Backbone backbone_from_json(const std::string& text);

void save_backbone(const Backbone& backbone, const std::string& path);
Backbone load_backbone(const std::string& path);

std::string bank_to_json(const ComparatorBank& bank, const std::string& decoder_default);

struct LoadedBank {
    ComparatorBank bank;
    std::string decoder_default;
};

LoadedBank bank_from_json(const std::string& text);

void save_bank(const ComparatorBank& bank, const std::string& decoder_default,
               const std::string& path);
LoadedBank load_bank(const std::string& path);

} // namespace ccnn
