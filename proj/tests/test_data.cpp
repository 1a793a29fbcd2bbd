#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ccnn/config.hpp"
#include "ccnn/dataset.hpp"

using namespace ccnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ccnn_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

} // namespace

TEST_CASE("synthetic generation geometry at zero noise") {
    // K equal to the image height puts exactly k bright rows in class k.
    const int k_classes = 8;
    const Dataset data = synth_generate(1, k_classes, 2, 8, 0.0);
    for (const Sample& s : data.samples) {
        const int h = s.input.shape()[1];
        const int w = s.input.shape()[2];
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const double v = s.input[static_cast<std::size_t>(r) * w + c];
                // The gender gradient shifts rows by at most 0.125 around the
                // 0/1 base before clamping.
                if (r < s.age_class) {
                    CHECK(v >= 0.5);
                } else {
                    CHECK(v <= 0.5);
                }
            }
        }
    }
}

TEST_CASE("synthetic generation is deterministic and split is balanced") {
    const Dataset a = synth_generate(9, 5, 20, 8, 0.1);
    const Dataset b = synth_generate(9, 5, 20, 8, 0.1);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].id == b.samples[i].id);
        CHECK(a.samples[i].age_class == b.samples[i].age_class);
        CHECK(a.samples[i].gender == b.samples[i].gender);
        REQUIRE(a.samples[i].input.size() == b.samples[i].input.size());
        for (std::size_t j = 0; j < a.samples[i].input.size(); ++j) {
            CHECK(a.samples[i].input[j] == b.samples[i].input[j]);
        }
    }

    // Disjoint, exhaustive, and every class present in every split.
    std::set<std::size_t> seen;
    for (const auto* part : {&a.train_idx, &a.val_idx, &a.test_idx}) {
        std::set<int> classes;
        for (std::size_t i : *part) {
            CHECK(seen.insert(i).second);
            classes.insert(a.samples[i].age_class);
        }
        CHECK(classes.size() == 5);
    }
    CHECK(seen.size() == a.samples.size());

    CHECK_THROWS_AS(synth_generate(1, 1, 5, 8, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(synth_generate(1, 5, 0, 8, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(synth_generate(1, 5, 5, 2, 0.1), std::invalid_argument);
}

TEST_CASE("class-mean brightness increases strictly with the class index") {
    const int K = 10;
    const Dataset data = synth_generate(33, K, 50, 16, 0.1);
    std::vector<double> mean(static_cast<std::size_t>(K), 0.0);
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    for (const Sample& s : data.samples) {
        double sum = 0.0;
        for (std::size_t i = 0; i < s.input.size(); ++i) sum += s.input[i];
        mean[static_cast<std::size_t>(s.age_class - 1)] +=
            sum / static_cast<double>(s.input.size());
        count[static_cast<std::size_t>(s.age_class - 1)] += 1;
    }
    for (int k = 0; k < K; ++k) mean[static_cast<std::size_t>(k)] /= count[static_cast<std::size_t>(k)];
    for (int k = 1; k < K; ++k) {
        CHECK(mean[static_cast<std::size_t>(k)] > mean[static_cast<std::size_t>(k - 1)]);
    }
}

TEST_CASE("pgm round trip stays within one quantization step") {
    TempDir tmp;
    Dataset data = synth_generate(4, 4, 3, 8, 0.1);
    const std::string path = (tmp.path / "img.pgm").string();
    write_pgm(data.samples[0].input, path);
    const Tensor back = read_pgm(path);
    REQUIRE(back.shape() == data.samples[0].input.shape());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(std::abs(back[i] - data.samples[0].input[i]) <= 1.0 / 255.0);
    }
}

TEST_CASE("dataset write + manifest reload round trip") {
    TempDir tmp;
    const Dataset data = synth_generate(6, 5, 8, 8, 0.1);
    write_dataset(data, tmp.path.string());

    const Dataset back = load_manifest((tmp.path / "manifest.csv").string(), 5, 1.0);
    REQUIRE(back.samples.size() == data.samples.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        CHECK(back.samples[i].id == data.samples[i].id); // manifest order preserved
        CHECK(back.samples[i].age_class == data.samples[i].age_class);
        CHECK(back.samples[i].gender == data.samples[i].gender);
        for (std::size_t j = 0; j < data.samples[i].input.size(); ++j) {
            CHECK(std::abs(back.samples[i].input[j] - data.samples[i].input[j]) <=
                  1.0 / 255.0);
        }
    }
    CHECK(back.train_idx == data.train_idx);
    CHECK(back.test_idx == data.test_idx);
}

TEST_CASE("manifest loading errors name the offending row") {
    TempDir tmp;
    const Dataset data = synth_generate(8, 3, 2, 8, 0.0);
    write_dataset(data, tmp.path.string());
    const std::string manifest = (tmp.path / "manifest.csv").string();

    const auto rewrite_row = [&](int row, const std::string& replacement) {
        std::ifstream in(manifest);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        lines[static_cast<std::size_t>(row - 1)] = replacement;
        std::ofstream out(manifest);
        for (const auto& l : lines) out << l << "\n";
    };

    SUBCASE("bad age") {
        rewrite_row(3, "x,images/synth_k1_i0.pgm,abc,0");
        try {
            load_manifest(manifest, 3, 1.0);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 3") != std::string::npos);
            CHECK(msg.find("abc") != std::string::npos);
        }
    }
    SUBCASE("age outside the class range") {
        rewrite_row(2, "x,images/synth_k1_i0.pgm,99,0");
        try {
            load_manifest(manifest, 3, 1.0);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }
    SUBCASE("missing image file") {
        rewrite_row(2, "x,images/nope.pgm,1.5,0");
        try {
            load_manifest(manifest, 3, 1.0);
            FAIL("expected an error");
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 2") != std::string::npos);
            CHECK(msg.find("nope.pgm") != std::string::npos);
        }
    }
    SUBCASE("bad gender") {
        rewrite_row(4, "x,images/synth_k2_i0.pgm,1.5,2");
        CHECK_THROWS_AS(load_manifest(manifest, 3, 1.0), std::runtime_error);
    }
    SUBCASE("wrong header") {
        rewrite_row(1, "id,file,age,gender");
        CHECK_THROWS_AS(load_manifest(manifest, 3, 1.0), std::runtime_error);
    }
}

TEST_CASE("config files parse, reject unknown keys, and round trip") {
    TempDir tmp;
    const std::string path = (tmp.path / "run.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment\n"
            << "seed=9\n"
            << "classes=7\n"
            << "learning_rate=0.005\n"
            << "decoder=ranking\n"
            << "multitask=true\n";
    }
    const RunConfig cfg = parse_config_file(path);
    CHECK(cfg.seed == 9);
    CHECK(cfg.classes == 7);
    CHECK(cfg.learning_rate == doctest::Approx(0.005));
    CHECK(cfg.decoder == "ranking");
    CHECK(cfg.multitask);

    const RunConfig back = parse_config_text(config_to_text(cfg), "roundtrip");
    CHECK(back.seed == cfg.seed);
    CHECK(back.classes == cfg.classes);
    CHECK(back.decoder == cfg.decoder);

    CHECK_THROWS_AS(parse_config_text("mystery=1\n", "t"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("seed=1\nseed=2\n", "t"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("classes=1\n", "t"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("decoder=magic\n", "t"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("epochs\n", "t"), std::invalid_argument);
}
