#include "ccnn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ccnn/rng.hpp"

namespace fs = std::filesystem;

namespace ccnn {

void Dataset::validate() const {
    if (K < 2) {
        throw std::invalid_argument("dataset needs K >= 2 classes, has " + std::to_string(K));
    }
    if (static_cast<int>(class_ages.size()) != K) {
        throw std::invalid_argument("dataset has " + std::to_string(class_ages.size()) +
                                    " class ages for K=" + std::to_string(K));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        if (s.age_class < 1 || s.age_class > K) {
            throw std::invalid_argument("sample " + s.id + " has class " +
                                        std::to_string(s.age_class) + " outside 1.." +
                                        std::to_string(K));
        }
        if (s.gender != 0 && s.gender != 1) {
            throw std::invalid_argument("sample " + s.id + " has gender " +
                                        std::to_string(s.gender) + ", expected 0 or 1");
        }
    }
    std::set<std::size_t> seen;
    for (const auto* part : {&train_idx, &val_idx, &test_idx}) {
        for (std::size_t i : *part) {
            if (i >= samples.size() || !seen.insert(i).second) {
                throw std::invalid_argument("dataset split is not a disjoint partition");
            }
        }
    }
    if (seen.size() != samples.size()) {
        throw std::invalid_argument("dataset split does not cover all samples");
    }
}

void assign_split(Dataset& dataset) {
    dataset.train_idx.clear();
    dataset.val_idx.clear();
    dataset.test_idx.clear();
    // Position within the sample's own class decides the split, so every
    // class lands in every partition regardless of source ordering.
    std::map<int, std::size_t> per_class_position;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const std::size_t slot = per_class_position[dataset.samples[i].age_class]++ % 20;
        if (slot < 14) {
            dataset.train_idx.push_back(i);
        } else if (slot < 17) {
            dataset.val_idx.push_back(i);
        } else {
            dataset.test_idx.push_back(i);
        }
    }
}

Dataset synth_generate(std::uint64_t seed, int K, int n_per_class, int image_size,
                       double noise_sigma) {
    if (K < 2) {
        throw std::invalid_argument("synth_generate needs K >= 2, got " + std::to_string(K));
    }
    if (n_per_class < 1) {
        throw std::invalid_argument("synth_generate needs n_per_class >= 1, got " +
                                    std::to_string(n_per_class));
    }
    if (image_size < 3) {
        throw std::invalid_argument("synth_generate needs image_size >= 3, got " +
                                    std::to_string(image_size));
    }
    if (noise_sigma < 0.0) {
        throw std::invalid_argument("noise sigma must be nonnegative");
    }

    const int h = image_size;
    const int w = image_size;
    Rng rng(seed);
    Dataset dataset;
    dataset.K = K;
    dataset.class_ages.resize(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
        dataset.class_ages[static_cast<std::size_t>(k - 1)] = static_cast<double>(k);
    }

    // Interleave classes so the positional split stays class-balanced.
    for (int i = 0; i < n_per_class; ++i) {
        for (int k = 1; k <= K; ++k) {
            Sample s;
            s.age_class = k;
            s.gender = static_cast<int>(rng.below(2));
            s.id = "synth_k" + std::to_string(k) + "_i" + std::to_string(i);

            const int bright_rows = static_cast<int>(
                std::lround(static_cast<double>(k) * h / static_cast<double>(K)));
            std::vector<double> pixels(static_cast<std::size_t>(h) * w, 0.0);
            const double grad_amp = 0.25;
            for (int r = 0; r < h; ++r) {
                const double base = r < bright_rows ? 1.0 : 0.0;
                for (int c = 0; c < w; ++c) {
                    const double ramp =
                        w > 1 ? (static_cast<double>(c) / (w - 1) - 0.5) : 0.0;
                    const double gradient = (s.gender == 1 ? 1.0 : -1.0) * grad_amp * ramp;
                    double v = base + gradient + noise_sigma * rng.normal();
                    pixels[static_cast<std::size_t>(r) * w + c] = std::clamp(v, 0.0, 1.0);
                }
            }
            s.input = Tensor({1, h, w}, std::move(pixels));
            dataset.samples.push_back(std::move(s));
        }
    }
    assign_split(dataset);
    dataset.validate();
    return dataset;
}

namespace {

int pgm_next_value(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines between header tokens.
    while (true) {
        int ch = in.peek();
        if (ch == '#') {
            std::string comment;
            std::getline(in, comment);
            continue;
        }
        if (std::isspace(ch)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) {
        throw std::runtime_error(path + ": truncated PGM header");
    }
    return value;
}

} // namespace

Tensor read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open image");
    }
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") {
        throw std::runtime_error(path + ": not an 8-bit grayscale PGM (magic '" +
                                 magic + "')");
    }
    const int w = pgm_next_value(in, path);
    const int h = pgm_next_value(in, path);
    const int maxval = pgm_next_value(in, path);
    if (w < 1 || h < 1 || maxval != 255) {
        throw std::runtime_error(path + ": unsupported PGM geometry " + std::to_string(w) +
                                 "x" + std::to_string(h) + " maxval " +
                                 std::to_string(maxval));
    }

    std::vector<double> pixels(static_cast<std::size_t>(w) * h, 0.0);
    if (magic == "P5") {
        in.get(); // single whitespace after the header
        std::vector<unsigned char> raw(pixels.size());
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
            throw std::runtime_error(path + ": truncated PGM pixel data");
        }
        for (std::size_t i = 0; i < raw.size(); ++i) {
            pixels[i] = static_cast<double>(raw[i]) / 255.0;
        }
    } else {
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            int v = 0;
            if (!(in >> v) || v < 0 || v > 255) {
                throw std::runtime_error(path + ": bad ASCII PGM pixel at index " +
                                         std::to_string(i));
            }
            pixels[i] = static_cast<double>(v) / 255.0;
        }
    }
    return Tensor({1, h, w}, std::move(pixels));
}

void write_pgm(const Tensor& image, const std::string& path) {
    if (image.shape().size() != 3 || image.shape()[0] != 1) {
        throw std::invalid_argument("write_pgm expects a [1,H,W] tensor, got " +
                                    image.shape_string());
    }
    const int h = image.shape()[1];
    const int w = image.shape()[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

} // namespace

Dataset load_manifest(const std::string& path, int K, double bin_width) {
    if (K < 2) {
        throw std::invalid_argument("load_manifest needs K >= 2, got " + std::to_string(K));
    }
    if (!(bin_width > 0.0)) {
        throw std::invalid_argument("bin width must be positive");
    }
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open manifest");
    }
    const fs::path base = fs::path(path).parent_path();

    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path + ": empty manifest");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,path,age,gender") {
        throw std::runtime_error(path + ": expected header 'id,path,age,gender', got '" +
                                 line + "'");
    }

    Dataset dataset;
    dataset.K = K;
    dataset.class_ages.resize(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
        dataset.class_ages[static_cast<std::size_t>(k - 1)] =
            (static_cast<double>(k) - 0.5) * bin_width;
    }

    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + " row " + std::to_string(row);

        const auto fields = split_csv_row(line);
        if (fields.size() != 4) {
            throw std::runtime_error(where + ": expected 4 fields, got " +
                                     std::to_string(fields.size()));
        }

        Sample s;
        s.id = fields[0];

        double age = 0.0;
        try {
            std::size_t consumed = 0;
            age = std::stod(fields[2], &consumed);
            if (consumed != fields[2].size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw std::runtime_error(where + ": invalid age '" + fields[2] + "'");
        }
        if (age < 0.0) {
            throw std::runtime_error(where + ": negative age " + fields[2]);
        }
        const int cls = static_cast<int>(std::floor(age / bin_width)) + 1;
        if (cls < 1 || cls > K) {
            throw std::runtime_error(where + ": age " + fields[2] + " maps to class " +
                                     std::to_string(cls) + " outside 1.." + std::to_string(K));
        }
        s.age_class = cls;

        if (fields[3] == "0") {
            s.gender = 0;
        } else if (fields[3] == "1") {
            s.gender = 1;
        } else {
            throw std::runtime_error(where + ": invalid gender '" + fields[3] +
                                     "', expected 0 or 1");
        }

        const fs::path img = fs::path(fields[1]).is_absolute()
                                 ? fs::path(fields[1])
                                 : base / fields[1];
        if (!fs::exists(img)) {
            throw std::runtime_error(where + ": image not found: " + img.string());
        }
        try {
            s.input = read_pgm(img.string());
        } catch (const std::exception& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
        dataset.samples.push_back(std::move(s));
    }
    if (dataset.samples.empty()) {
        throw std::runtime_error(path + ": manifest has no data rows");
    }
    assign_split(dataset);
    dataset.validate();
    return dataset;
}

void write_dataset(const Dataset& dataset, const std::string& dir, double bin_width) {
    dataset.validate();
    const fs::path root(dir);
    fs::create_directories(root / "images");

    std::ofstream manifest(root / "manifest.csv");
    if (!manifest) {
        throw std::runtime_error((root / "manifest.csv").string() +
                                 ": cannot open for writing");
    }
    manifest << "id,path,age,gender\n";
    for (const Sample& s : dataset.samples) {
        const std::string rel = "images/" + s.id + ".pgm";
        write_pgm(s.input, (root / rel).string());
        // Bin center, so floor(age/bin)+1 restores the class on reload.
        const double age = (static_cast<double>(s.age_class) - 0.5) * bin_width;
        char age_buf[32];
        std::snprintf(age_buf, sizeof(age_buf), "%.6g", age);
        manifest << s.id << "," << rel << "," << age_buf << "," << s.gender << "\n";
    }
    if (!manifest) {
        throw std::runtime_error((root / "manifest.csv").string() + ": write failed");
    }
}

} // namespace ccnn
