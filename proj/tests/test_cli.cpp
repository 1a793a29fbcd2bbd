#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Drives the installed binary end to end through a shell. The binary path
// arrives via the CCNN_CLI environment variable set by CTest.

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("CCNN_CLI");
    REQUIRE_MESSAGE(p != nullptr, "CCNN_CLI must point at the ccnn binary");
    return p;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("ccnn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string run_capture(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const std::string cmd = cli_path() + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 0);
    std::ifstream in(out);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_config(const fs::path& p) {
    std::ofstream out(p);
    out << "seed=11\nclasses=5\nimage_size=10\nepochs=8\nbatch_size=8\n"
        << "learning_rate=0.02\nconv_channels=4\nhidden1=24\nhidden2=24\n"
        << "embedding_dim=16\n";
}

} // namespace

TEST_CASE("cli rejects unknown flags and bad inputs with nonzero exits") {
    CHECK(run("--definitely-not-a-flag") != 0);
    CHECK(run("train --dataset missing.csv") != 0); // missing --checkpoint
    CHECK(run("train --dataset /nonexistent/manifest.csv --checkpoint /tmp/x.json") != 0);
    CHECK(run("predict --checkpoint /nonexistent.json some.pgm") != 0);
    CHECK(run("eval --dataset a --checkpoint b --decoder magic") != 0);
}

TEST_CASE("synth/train/eval reruns are byte-identical and predict works") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.cfg";
    write_config(cfg);

    const std::string synth_args = "synth --out " + (tmp.path / "data").string() +
                                   " --seed 3 --classes 5 --per-class 20"
                                   " --image-size 10 --noise 0.08";
    REQUIRE(run(synth_args) == 0);
    const std::string manifest = (tmp.path / "data" / "manifest.csv").string();

    const auto train_once = [&](const std::string& name) {
        const std::string ckpt = (tmp.path / name).string();
        REQUIRE(run("train --config " + cfg.string() + " --dataset " + manifest +
                    " --checkpoint " + ckpt) == 0);
        return ckpt;
    };
    const std::string ckpt1 = train_once("bank1.json");
    const std::string ckpt2 = train_once("bank2.json");
    CHECK(slurp(ckpt1) == slurp(ckpt2));
    CHECK(slurp(ckpt1 + ".history.csv") == slurp(ckpt2 + ".history.csv"));

    const auto eval_once = [&](const std::string& name, const std::string& extra) {
        const std::string report = (tmp.path / name).string();
        REQUIRE(run("eval --config " + cfg.string() + " --dataset " + manifest +
                    " --checkpoint " + ckpt1 + " --report " + report + " --db synth " +
                    extra) == 0);
        return slurp(report);
    };
    const std::string report1 = eval_once("r1.csv", "");
    const std::string report2 = eval_once("r2.csv", "");
    CHECK(report1 == report2);
    CHECK(report1.find("method,dataset,n,mae,tolerance,tolerance_accuracy,"
                       "gender_accuracy") == 0);

    // Decoder choices disagree by at most one class on a clean sample.
    const std::string probe = (tmp.path / "data" / "images" / "synth_k3_i0.pgm").string();
    const std::string hits = run_capture(
        "predict --checkpoint " + ckpt1 + " --decoder hits " + probe, tmp.path);
    const std::string ranking = run_capture(
        "predict --checkpoint " + ckpt1 + " --decoder ranking " + probe, tmp.path);
    const double hits_age = std::stod(hits);
    const double ranking_age = std::stod(ranking);
    CHECK(std::abs(hits_age - ranking_age) <= 1.0);

    // Mismatched class count between config and checkpoint is refused.
    const fs::path bad_cfg = tmp.path / "bad.cfg";
    {
        std::ofstream out(bad_cfg);
        out << "classes=7\nimage_size=10\n";
    }
    CHECK(run("eval --config " + bad_cfg.string() + " --dataset " + manifest +
              " --checkpoint " + ckpt1) != 0);
}

TEST_CASE("multitask training predicts gender and gradcheck passes") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "seed=11\nclasses=4\nimage_size=10\nepochs=8\nbatch_size=8\n"
            << "learning_rate=0.02\nconv_channels=4\nhidden1=24\nhidden2=24\n"
            << "age_dim=12\ngender_dim=4\nmultitask=true\n";
    }
    REQUIRE(run("synth --out " + (tmp.path / "data").string() +
                " --seed 5 --classes 4 --per-class 20 --image-size 10 --noise 0.08") == 0);
    const std::string manifest = (tmp.path / "data" / "manifest.csv").string();
    const std::string ckpt = (tmp.path / "bank.json").string();
    REQUIRE(run("train --config " + cfg.string() + " --dataset " + manifest +
                " --checkpoint " + ckpt) == 0);

    const std::string probe = (tmp.path / "data" / "images" / "synth_k2_i0.pgm").string();
    const std::string line =
        run_capture("predict --checkpoint " + ckpt + " " + probe, tmp.path);
    // "age gender"
    std::istringstream fields(line);
    double age = -1;
    int gender = -1;
    fields >> age >> gender;
    CHECK(age >= 0.0);
    CHECK((gender == 0 || gender == 1));

    CHECK(run("gradcheck --seed 7 --seeds 3") == 0);
}

TEST_CASE("eval splits and the dex decoder are reachable from the cli") {
    TempDir tmp;
    const fs::path cfg = tmp.path / "run.cfg";
    write_config(cfg);
    REQUIRE(run("synth --out " + (tmp.path / "data").string() +
                " --seed 3 --classes 5 --per-class 20 --image-size 10 --noise 0.08") == 0);
    const std::string manifest = (tmp.path / "data" / "manifest.csv").string();
    const std::string ckpt = (tmp.path / "bank.json").string();
    REQUIRE(run("train --config " + cfg.string() + " --dataset " + manifest +
                " --checkpoint " + ckpt) == 0);

    for (const std::string split : {"train", "val", "test", "all"}) {
        CHECK(run("eval --config " + cfg.string() + " --dataset " + manifest +
                  " --checkpoint " + ckpt + " --split " + split) == 0);
    }
    CHECK(run("eval --config " + cfg.string() + " --dataset " + manifest +
              " --checkpoint " + ckpt + " --split nope") != 0);

    const std::string probe = (tmp.path / "data" / "images" / "synth_k4_i2.pgm").string();
    const std::string dex = run_capture(
        "predict --checkpoint " + ckpt + " --decoder dex " + probe, tmp.path);
    const double age = std::stod(dex);
    CHECK(age >= 0.0);
    CHECK(age <= 5.0);
}
