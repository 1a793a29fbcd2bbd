#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccnn {

// Mean absolute error between estimates and ground truth; lists must have
// equal nonzero length.
double mae(std::span<const double> estimates, std::span<const double> truths);

// Fraction of samples with |estimate - truth| <= t years.
double tolerance_accuracy(std::span<const double> estimates,
                          std::span<const double> truths, int tolerance);

struct PerClassError {
    int class_index = 0;
    int count = 0;
    double mean_abs_error = 0.0;
};

struct EvalReport {
    int n = 0;
    double mae = 0.0;
    int tolerance = 5;
    double tolerance_accuracy = 0.0;
    std::optional<double> gender_accuracy;
    std::vector<PerClassError> per_class;
};

// Assembles the full report. truth_classes, when provided, keys the
// per-class histogram (otherwise truths are rounded to the nearest integer).
// Gender vectors may be empty, in which case gender accuracy is omitted.
EvalReport make_report(std::span<const double> estimates,
                       std::span<const double> truths,
                       std::span<const int> gender_estimates,
                       std::span<const int> gender_truths,
                       int tolerance,
                       std::span<const int> truth_classes = {});

// "Method, DB, 2.77, 90.2%" summary line.
std::string report_row(const EvalReport& report, const std::string& method,
                       const std::string& dataset);

// CSV with the fixed header
// method,dataset,n,mae,tolerance,tolerance_accuracy,gender_accuracy.
// Two renderings of the same inputs are byte-identical.
std::string report_csv(const EvalReport& report, const std::string& method,
                       const std::string& dataset);

// Aligned plain-text table including the per-class histogram.
std::string report_text(const EvalReport& report, const std::string& method,
                        const std::string& dataset);

} // namespace ccnn
