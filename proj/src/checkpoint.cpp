#include "ccnn/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ccnn {

using nlohmann::json;

namespace {

json param_to_json(const Param& p) {
    return json{{"shape", p.value.shape()}, {"values", p.value.data()}};
}

Param param_from_json(const json& j, const std::vector<int>& expected_shape,
                      const std::string& name) {
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape != expected_shape) {
        throw std::runtime_error("checkpoint layer '" + name + "' has shape " +
                                 shape_to_string(shape) + ", expected " +
                                 shape_to_string(expected_shape));
    }
    auto values = j.at("values").get<std::vector<double>>();
    return Param(Tensor(shape, std::move(values)));
}

json backbone_to_json_obj(const Backbone& backbone) {
    const BackboneConfig& cfg = backbone.config();
    json layers = json::array();
    const auto params = backbone.params();
    const auto& names = Backbone::param_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        json layer = param_to_json(*params[i]);
        layer["name"] = names[i];
        layers.push_back(std::move(layer));
    }
    return json{{"format_version", kCheckpointFormatVersion},
                {"embedding_dim", cfg.embedding_dim},
                {"input_shape", cfg.input_shape},
                {"conv_channels", cfg.conv_channels},
                {"hidden1", cfg.hidden1},
                {"hidden2", cfg.hidden2},
                {"seed", backbone.init_seed},
                {"layers", layers}};
}

void check_version(const json& j, const std::string& what) {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
        throw std::runtime_error(what + ": unknown format_version " +
                                 std::to_string(version) + " (this build reads version " +
                                 std::to_string(kCheckpointFormatVersion) + ")");
    }
}

Backbone backbone_from_json_obj(const json& j) {
    check_version(j, "backbone checkpoint");

    BackboneConfig cfg;
    cfg.input_shape = j.at("input_shape").get<std::vector<int>>();
    cfg.embedding_dim = j.at("embedding_dim").get<int>();
    cfg.conv_channels = j.at("conv_channels").get<int>();
    cfg.hidden1 = j.at("hidden1").get<int>();
    cfg.hidden2 = j.at("hidden2").get<int>();

    Backbone backbone(cfg);
    backbone.init_seed = j.at("seed").get<std::uint64_t>();

    const json& layers = j.at("layers");
    const auto params = backbone.params();
    const auto& names = Backbone::param_names();
    if (layers.size() != params.size()) {
        throw std::runtime_error("backbone checkpoint has " + std::to_string(layers.size()) +
                                 " layers, expected " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const json& layer = layers[i];
        if (layer.at("name").get<std::string>() != names[i]) {
            throw std::runtime_error("backbone checkpoint layer " + std::to_string(i) +
                                     " is '" + layer.at("name").get<std::string>() +
                                     "', expected '" + names[i] + "'");
        }
        *params[i] = param_from_json(layer, params[i]->value.shape(), names[i]);
    }
    return backbone;
}

std::string dump_stable(const json& j) {
    // Two-space indent; nlohmann emits object keys sorted, so identical
    // models serialize to identical bytes.
    return j.dump(2) + "\n";
}

json parse_or_fail(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw std::runtime_error(what + ": corrupt JSON");
    }
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

} // namespace

std::string backbone_to_json(const Backbone& backbone) {
    return dump_stable(backbone_to_json_obj(backbone));
}

Backbone backbone_from_json(const std::string& text) {
    try {
        return backbone_from_json_obj(parse_or_fail(text, "backbone checkpoint"));
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("backbone checkpoint: ") + e.what());
    }
}

void save_backbone(const Backbone& backbone, const std::string& path) {
    write_file(path, backbone_to_json(backbone));
}

Backbone load_backbone(const std::string& path) {
    return backbone_from_json(read_file(path));
}

std::string bank_to_json(const ComparatorBank& bank, const std::string& decoder_default) {
    bank.validate();
    decoder_from_string(decoder_default);

    json comparators = json::array();
    for (const BinaryComparator& comp : bank.comparators) {
        json c{{"threshold_class", comp.threshold_class},
               {"head_w", param_to_json(comp.head_w)},
               {"head_b", param_to_json(comp.head_b)}};
        if (!bank.shared_backbone) {
            c["backbone"] = backbone_to_json_obj(*comp.backbone);
        }
        comparators.push_back(std::move(c));
    }

    json j{{"format_version", kCheckpointFormatVersion},
           {"kind", "comparator_bank"},
           {"K", bank.size()},
           {"decoder", decoder_default},
           {"class_ages", bank.class_ages},
           {"age_dim", bank.age_dim},
           {"gender_dim", bank.gender_dim},
           {"shared_backbone", bank.shared_backbone},
           {"comparators", comparators}};
    if (bank.shared_backbone) {
        j["backbone"] = backbone_to_json_obj(*bank.comparators.front().backbone);
    }
    if (!bank.gender_prototypes.empty()) {
        json protos = json::array();
        for (const GenderPrototypes& p : bank.gender_prototypes) {
            protos.push_back(json{{"female", p.female}, {"male", p.male}});
        }
        j["gender_prototypes"] = std::move(protos);
    }
    return dump_stable(j);
}

LoadedBank bank_from_json(const std::string& text) {
    try {
        const json j = parse_or_fail(text, "bank checkpoint");
        check_version(j, "bank checkpoint");
        if (j.at("kind").get<std::string>() != "comparator_bank") {
            throw std::runtime_error("bank checkpoint: kind '" +
                                     j.at("kind").get<std::string>() +
                                     "' is not a comparator bank");
        }

        LoadedBank loaded;
        loaded.decoder_default = j.at("decoder").get<std::string>();
        decoder_from_string(loaded.decoder_default);

        ComparatorBank& bank = loaded.bank;
        const int K = j.at("K").get<int>();
        bank.class_ages = j.at("class_ages").get<std::vector<double>>();
        bank.age_dim = j.at("age_dim").get<int>();
        bank.gender_dim = j.at("gender_dim").get<int>();
        bank.shared_backbone = j.at("shared_backbone").get<bool>();

        const json& comparators = j.at("comparators");
        if (static_cast<int>(comparators.size()) != K) {
            throw std::runtime_error("bank checkpoint claims K=" + std::to_string(K) +
                                     " but carries " + std::to_string(comparators.size()) +
                                     " comparators");
        }

        std::shared_ptr<Backbone> shared;
        if (bank.shared_backbone) {
            shared = std::make_shared<Backbone>(backbone_from_json_obj(j.at("backbone")));
        }

        for (const json& c : comparators) {
            BinaryComparator comp;
            comp.threshold_class = c.at("threshold_class").get<int>();
            if (bank.shared_backbone) {
                comp.backbone = shared;
            } else {
                comp.backbone =
                    std::make_shared<Backbone>(backbone_from_json_obj(c.at("backbone")));
            }
            comp.head_w = param_from_json(c.at("head_w"), {1, bank.age_dim}, "head_w");
            comp.head_b = param_from_json(c.at("head_b"), {1}, "head_b");
            bank.comparators.push_back(std::move(comp));
        }

        if (j.contains("gender_prototypes")) {
            for (const json& p : j.at("gender_prototypes")) {
                GenderPrototypes proto;
                proto.female = p.at("female").get<std::vector<double>>();
                proto.male = p.at("male").get<std::vector<double>>();
                bank.gender_prototypes.push_back(std::move(proto));
            }
        }

        bank.validate();
        return loaded;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("bank checkpoint: ") + e.what());
    }
}

void save_bank(const ComparatorBank& bank, const std::string& decoder_default,
               const std::string& path) {
    write_file(path, bank_to_json(bank, decoder_default));
}

LoadedBank load_bank(const std::string& path) {
    return bank_from_json(read_file(path));
}

} // namespace ccnn
