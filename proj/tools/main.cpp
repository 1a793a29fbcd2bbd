// Command-line front end: synthetic dataset generation, training, evaluation,
// prediction, and gradient verification.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccnn/checkpoint.hpp"
#include "ccnn/config.hpp"
#include "ccnn/dataset.hpp"
#include "ccnn/gradsuite.hpp"
#include "ccnn/metrics.hpp"
#include "ccnn/train.hpp"

namespace fs = std::filesystem;
using namespace ccnn;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool multitask = false;
};

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) cfg = parse_config_file(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.multitask) cfg.multitask = true;
    cfg.validate();
    return cfg;
}

std::span<const std::size_t> pick_split(const Dataset& data, const std::string& split,
                                        std::vector<std::size_t>& all_storage) {
    if (split == "train") return data.train_idx;
    if (split == "val") return data.val_idx;
    if (split == "test") return data.test_idx;
    if (split == "all") {
        all_storage.resize(data.samples.size());
        for (std::size_t i = 0; i < all_storage.size(); ++i) all_storage[i] = i;
        return all_storage;
    }
    throw std::invalid_argument("unknown split '" + split +
                                "'; expected train, val, test, or all");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path + ": write failed");
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, int classes,
              int per_class, int image_size, double noise, double bin_width) {
    const Dataset data = synth_generate(seed, classes, per_class, image_size, noise);
    write_dataset(data, out_dir, bin_width);
    std::cout << "wrote " << data.samples.size() << " samples ("
              << data.train_idx.size() << " train / " << data.val_idx.size()
              << " val / " << data.test_idx.size() << " test) to " << out_dir
              << std::endl;
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& dataset_path,
              const std::string& checkpoint_path, std::string history_path,
              const std::string& decoder_flag) {
    RunConfig cfg = resolve_config(opts);
    if (!decoder_flag.empty()) cfg.decoder = decoder_flag;
    cfg.validate();

    const Dataset data = load_manifest(dataset_path, cfg.classes, cfg.bin_width);
    const auto [bank, history] = train_from_config(data, cfg);
    save_bank(bank, cfg.decoder, checkpoint_path);

    if (history_path.empty()) history_path = checkpoint_path + ".history.csv";
    write_text_file(history_path, history_csv(history));

    std::cout << "trained " << bank.size() << " comparators ("
              << (cfg.multitask ? "multi-task" : "single-task") << ") on "
              << data.train_idx.size() << " samples; checkpoint: " << checkpoint_path
              << std::endl;
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& dataset_path,
             const std::string& checkpoint_path, const std::string& report_path,
             const std::string& decoder_flag, int tolerance_flag,
             const std::string& split, const std::string& method, std::string db) {
    RunConfig cfg = resolve_config(opts);
    if (tolerance_flag >= 0) cfg.tolerance = tolerance_flag;

    const LoadedBank loaded = load_bank(checkpoint_path);
    const std::string decoder_name =
        decoder_flag.empty() ? loaded.decoder_default : decoder_flag;
    const Decoder decoder = decoder_from_string(decoder_name);

    const Dataset data = load_manifest(dataset_path, cfg.classes, cfg.bin_width);
    std::vector<std::size_t> all_storage;
    const auto indices = pick_split(data, split, all_storage);

    const EvalReport report =
        evaluate_bank(loaded.bank, data, indices, decoder, cfg.tolerance);

    if (db.empty()) db = fs::path(dataset_path).parent_path().filename().string();
    if (!report_path.empty()) write_text_file(report_path, report_csv(report, method, db));
    std::cout << report_text(report, method, db);
    return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& decoder_flag,
                const std::vector<std::string>& inputs) {
    const LoadedBank loaded = load_bank(checkpoint_path);
    const std::string decoder_name =
        decoder_flag.empty() ? loaded.decoder_default : decoder_flag;
    const Decoder decoder = decoder_from_string(decoder_name);

    char buf[64];
    for (const std::string& path : inputs) {
        const Tensor image = read_pgm(path);
        const double age = predict_age(loaded.bank, image, decoder);
        std::snprintf(buf, sizeof(buf), "%.6g", age);
        std::cout << buf;
        if (loaded.bank.multitask()) {
            std::cout << " " << predict_gender(loaded.bank, image);
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int seeds, double step, double tol) {
    const GradSuiteResult result = run_gradient_suite(seed, seeds, step, tol);
    std::cout << result.summary();
    return result.passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Comparative-CNN ordinal age and gender estimation toolkit"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* synth = app.add_subcommand("synth", "generate a synthetic PGM dataset");
    std::string synth_out;
    std::uint64_t synth_seed = 1;
    int synth_classes = 10, synth_per_class = 100, synth_image = 16;
    double synth_noise = 0.1, synth_bin = 1.0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--classes", synth_classes, "number of age classes");
    synth->add_option("--per-class", synth_per_class, "samples per class");
    synth->add_option("--image-size", synth_image, "square image side");
    synth->add_option("--noise", synth_noise, "gaussian noise sigma");
    synth->add_option("--bin-width", synth_bin, "years per class in the manifest");

    auto* train = app.add_subcommand("train", "train a comparator bank");
    std::string train_dataset, train_checkpoint, train_history, train_decoder;
    train->add_option("--config", common.config_path, "key=value config file");
    auto* train_seed = train->add_option("--seed", common.seed, "seed override");
    train->add_flag("--multitask", common.multitask, "enable the gender task");
    train->add_option("--dataset", train_dataset, "manifest.csv path")->required();
    train->add_option("--checkpoint", train_checkpoint, "checkpoint output path")
        ->required();
    train->add_option("--history", train_history, "loss history CSV path");
    train->add_option("--decoder", train_decoder,
                      "default decoder stored in the checkpoint");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_dataset, eval_checkpoint, eval_report, eval_decoder;
    std::string eval_split = "test", eval_method = "comparative-cnn", eval_db;
    int eval_tolerance = -1;
    eval->add_option("--config", common.config_path, "key=value config file");
    auto* eval_seed = eval->add_option("--seed", common.seed, "seed override");
    eval->add_option("--dataset", eval_dataset, "manifest.csv path")->required();
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
    eval->add_option("--report", eval_report, "report CSV output path");
    eval->add_option("--decoder", eval_decoder, "hits, ranking, or dex");
    eval->add_option("--tolerance", eval_tolerance, "tolerance in years");
    eval->add_option("--split", eval_split, "train, val, test, or all");
    eval->add_option("--method", eval_method, "method name in the report");
    eval->add_option("--db", eval_db, "dataset name in the report");

    auto* predict = app.add_subcommand("predict", "predict ages for PGM images");
    std::string predict_checkpoint, predict_decoder;
    std::vector<std::string> predict_inputs;
    predict->add_option("--checkpoint", predict_checkpoint, "checkpoint path")
        ->required();
    predict->add_option("--decoder", predict_decoder, "hits, ranking, or dex");
    predict->add_option("inputs", predict_inputs, "PGM image paths")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    std::uint64_t gc_seed = 1;
    int gc_seeds = 20;
    double gc_step = 1e-5, gc_tol = 1e-4;
    gradcheck->add_option("--seed", gc_seed, "first seed");
    gradcheck->add_option("--seeds", gc_seeds, "number of seeds");
    gradcheck->add_option("--step", gc_step, "finite-difference step");
    gradcheck->add_option("--tol", gc_tol, "relative error tolerance");

    CLI11_PARSE(app, argc, argv);
    common.seed_set = train_seed->count() > 0 || eval_seed->count() > 0;

    try {
        if (*synth) {
            return cmd_synth(synth_out, synth_seed, synth_classes, synth_per_class,
                             synth_image, synth_noise, synth_bin);
        }
        if (*train) {
            return cmd_train(common, train_dataset, train_checkpoint, train_history,
                             train_decoder);
        }
        if (*eval) {
            return cmd_eval(common, eval_dataset, eval_checkpoint, eval_report,
                            eval_decoder, eval_tolerance, eval_split, eval_method,
                            eval_db);
        }
        if (*predict) {
            return cmd_predict(predict_checkpoint, predict_decoder, predict_inputs);
        }
        if (*gradcheck) {
            return cmd_gradcheck(gc_seed, gc_seeds, gc_step, gc_tol);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
