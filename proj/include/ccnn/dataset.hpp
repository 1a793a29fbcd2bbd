#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/tensor.hpp"

namespace ccnn {

struct Sample {
    Tensor input; // [C,H,W], values in [0,1]
    int age_class = 0;
    int gender = 0; // 0 female, 1 male
    std::string id;
};

// Labeled samples with a disjoint, exhaustive train/validation/test split.
// Iteration order is the source order (generation or manifest order).
struct Dataset {
    std::vector<Sample> samples;
    int K = 0;
    std::vector<double> class_ages; // representative age per class, length K
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    std::vector<std::size_t> test_idx;

    void validate() const;
};

// Grayscale ordinal images: class k lights the top round(k*H/K) rows, gender
// flips a left/right intensity gradient, and Gaussian noise is added; values
// clamp to [0,1]. class_ages[k-1] = k. Deterministic given the seed.
Dataset synth_generate(std::uint64_t seed, int K, int n_per_class, int image_size,
                       double noise_sigma);

// 8-bit binary (P5) or ASCII (P2) grayscale PGM, scaled to [0,1].
Tensor read_pgm(const std::string& path);

// Writes binary P5; values are clamped to [0,1] and quantized to 0..255.
void write_pgm(const Tensor& image, const std::string& path);

// CSV manifest with header id,path,age,gender; image paths resolve relative
// to the manifest's directory. Ages map to classes by floor(age/bin)+1 and
// class_ages holds the bin centers. Any malformed row, unreadable image, or
// out-of-range label fails with the offending row number.
Dataset load_manifest(const std::string& path, int K, double bin_width);

// Writes <dir>/manifest.csv plus <dir>/images/<id>.pgm. Ages are written as
// the class's bin center so reloading with the same bin width reproduces the
// class labels.
void write_dataset(const Dataset& dataset, const std::string& dir,
                   double bin_width = 1.0);

// Deterministic 70/15/15 split by position: of every 20 consecutive samples,
// 14 train, 3 validation, 3 test.
void assign_split(Dataset& dataset);

} // namespace ccnn
