#include "ccnn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ccnn/comparators.hpp"

namespace ccnn {

int RunConfig::effective_embedding_dim() const {
    if (embedding_dim > 0) return embedding_dim;
    return multitask ? age_dim + gender_dim : 70;
}

int RunConfig::effective_age_dim() const {
    return multitask ? age_dim : effective_embedding_dim();
}

int RunConfig::effective_gender_dim() const {
    return multitask ? gender_dim : 0;
}

void RunConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0)) {
            throw std::invalid_argument(std::string("config: ") + name +
                                        " must be positive, got " + std::to_string(v));
        }
    };
    positive(classes, "classes");
    if (classes < 2) throw std::invalid_argument("config: classes must be >= 2");
    positive(bin_width, "bin_width");
    positive(image_size, "image_size");
    if (image_size < 3) throw std::invalid_argument("config: image_size must be >= 3");
    positive(margin, "margin");
    if (lambda < 0) throw std::invalid_argument("config: lambda must be nonnegative");
    positive(learning_rate, "learning_rate");
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
    positive(age_dim, "age_dim");
    positive(gender_dim, "gender_dim");
    if (w_age < 0 || w_gender < 0) {
        throw std::invalid_argument("config: task weights must be nonnegative");
    }
    if (multitask && w_age == 0 && w_gender == 0) {
        throw std::invalid_argument("config: task weights must not both be zero");
    }
    decoder_from_string(decoder); // throws for anything but hits/ranking/dex
    if (tolerance < 0) throw std::invalid_argument("config: tolerance must be nonnegative");
    positive(conv_channels, "conv_channels");
    positive(hidden1, "hidden1");
    positive(hidden2, "hidden2");
    if (embedding_dim < 0) {
        throw std::invalid_argument("config: embedding_dim must be nonnegative");
    }
    if (multitask && embedding_dim > 0 && embedding_dim != age_dim + gender_dim) {
        throw std::invalid_argument("config: embedding_dim " + std::to_string(embedding_dim) +
                                    " does not equal age_dim + gender_dim = " +
                                    std::to_string(age_dim + gender_dim));
    }
}

namespace {

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument(where + ": expected true/false, got '" + v + "'");
}

template <class T>
T parse_num(const std::string& v, const std::string& where) {
    std::istringstream is(v);
    T out{};
    is >> out;
    if (is.fail() || !is.eof()) {
        throw std::invalid_argument(where + ": cannot parse value '" + v + "'");
    }
    return out;
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::string where = origin + " line " + std::to_string(lineno);

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(where + ": expected key=value, got '" + line + "'");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (!seen.insert(key).second) {
            throw std::invalid_argument(where + ": duplicate key '" + key + "'");
        }

        if (key == "seed") cfg.seed = parse_num<std::uint64_t>(value, where);
        else if (key == "classes") cfg.classes = parse_num<int>(value, where);
        else if (key == "bin_width") cfg.bin_width = parse_num<double>(value, where);
        else if (key == "image_size") cfg.image_size = parse_num<int>(value, where);
        else if (key == "margin") cfg.margin = parse_num<double>(value, where);
        else if (key == "lambda") cfg.lambda = parse_num<double>(value, where);
        else if (key == "learning_rate") cfg.learning_rate = parse_num<double>(value, where);
        else if (key == "epochs") cfg.epochs = parse_num<int>(value, where);
        else if (key == "batch_size") cfg.batch_size = parse_num<int>(value, where);
        else if (key == "age_dim") cfg.age_dim = parse_num<int>(value, where);
        else if (key == "gender_dim") cfg.gender_dim = parse_num<int>(value, where);
        else if (key == "w_age") cfg.w_age = parse_num<double>(value, where);
        else if (key == "w_gender") cfg.w_gender = parse_num<double>(value, where);
        else if (key == "decoder") cfg.decoder = value;
        else if (key == "tolerance") cfg.tolerance = parse_num<int>(value, where);
        else if (key == "multitask") cfg.multitask = parse_bool(value, where);
        else if (key == "shared_backbone") cfg.shared_backbone = parse_bool(value, where);
        else if (key == "conv_channels") cfg.conv_channels = parse_num<int>(value, where);
        else if (key == "hidden1") cfg.hidden1 = parse_num<int>(value, where);
        else if (key == "hidden2") cfg.hidden2 = parse_num<int>(value, where);
        else if (key == "embedding_dim") cfg.embedding_dim = parse_num<int>(value, where);
        else {
            throw std::invalid_argument(where + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open config file");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "seed=" << cfg.seed << "\n"
       << "classes=" << cfg.classes << "\n"
       << "bin_width=" << cfg.bin_width << "\n"
       << "image_size=" << cfg.image_size << "\n"
       << "margin=" << cfg.margin << "\n"
       << "lambda=" << cfg.lambda << "\n"
       << "learning_rate=" << cfg.learning_rate << "\n"
       << "epochs=" << cfg.epochs << "\n"
       << "batch_size=" << cfg.batch_size << "\n"
       << "age_dim=" << cfg.age_dim << "\n"
       << "gender_dim=" << cfg.gender_dim << "\n"
       << "w_age=" << cfg.w_age << "\n"
       << "w_gender=" << cfg.w_gender << "\n"
       << "decoder=" << cfg.decoder << "\n"
       << "tolerance=" << cfg.tolerance << "\n"
       << "multitask=" << (cfg.multitask ? "true" : "false") << "\n"
       << "shared_backbone=" << (cfg.shared_backbone ? "true" : "false") << "\n"
       << "conv_channels=" << cfg.conv_channels << "\n"
       << "hidden1=" << cfg.hidden1 << "\n"
       << "hidden2=" << cfg.hidden2 << "\n"
       << "embedding_dim=" << cfg.embedding_dim << "\n";
    return os.str();
}

} // namespace ccnn
