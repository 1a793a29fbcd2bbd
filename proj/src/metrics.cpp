#include "ccnn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ccnn {

namespace {

void require_paired(std::size_t a, std::size_t b, const char* what) {
    if (a == 0) {
        throw std::invalid_argument(std::string(what) + ": empty input");
    }
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": " + std::to_string(a) +
                                    " estimates vs " + std::to_string(b) + " truths");
    }
}

// Shortest float form that round-trips the displayed precision, e.g. 2.77,
// 0, 3.3333. Fixed formatting keeps renderings byte-identical.
std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string format_percent(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100.0);
    return buf;
}

} // namespace

double mae(std::span<const double> estimates, std::span<const double> truths) {
    require_paired(estimates.size(), truths.size(), "mae");
    double sum = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        sum += std::abs(estimates[i] - truths[i]);
    }
    return sum / static_cast<double>(estimates.size());
}

double tolerance_accuracy(std::span<const double> estimates,
                          std::span<const double> truths, int tolerance) {
    require_paired(estimates.size(), truths.size(), "tolerance_accuracy");
    if (tolerance < 0) {
        throw std::invalid_argument("tolerance must be nonnegative, got " +
                                    std::to_string(tolerance));
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        if (std::abs(estimates[i] - truths[i]) <= static_cast<double>(tolerance)) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(estimates.size());
}

EvalReport make_report(std::span<const double> estimates,
                       std::span<const double> truths,
                       std::span<const int> gender_estimates,
                       std::span<const int> gender_truths,
                       int tolerance,
                       std::span<const int> truth_classes) {
    EvalReport report;
    report.n = static_cast<int>(estimates.size());
    report.mae = mae(estimates, truths);
    report.tolerance = tolerance;
    report.tolerance_accuracy = tolerance_accuracy(estimates, truths, tolerance);

    if (!gender_truths.empty()) {
        require_paired(gender_estimates.size(), gender_truths.size(), "gender accuracy");
        if (gender_estimates.size() != estimates.size()) {
            throw std::invalid_argument("gender labels do not cover all samples");
        }
        std::size_t hits = 0;
        for (std::size_t i = 0; i < gender_truths.size(); ++i) {
            if (gender_estimates[i] == gender_truths[i]) ++hits;
        }
        report.gender_accuracy =
            static_cast<double>(hits) / static_cast<double>(gender_truths.size());
    }

    if (!truth_classes.empty() && truth_classes.size() != truths.size()) {
        throw std::invalid_argument("truth class list does not cover all samples");
    }
    std::map<int, std::pair<int, double>> per_class; // class -> (count, abs error sum)
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const int cls = truth_classes.empty()
                            ? static_cast<int>(std::llround(truths[i]))
                            : truth_classes[i];
        auto& [count, err_sum] = per_class[cls];
        ++count;
        err_sum += std::abs(estimates[i] - truths[i]);
    }
    for (const auto& [cls, agg] : per_class) {
        report.per_class.push_back(
            {cls, agg.first, agg.second / static_cast<double>(agg.first)});
    }
    return report;
}

std::string report_row(const EvalReport& report, const std::string& method,
                       const std::string& dataset) {
    return method + ", " + dataset + ", " + format_number(report.mae) + ", " +
           format_percent(report.tolerance_accuracy);
}

std::string report_csv(const EvalReport& report, const std::string& method,
                       const std::string& dataset) {
    std::ostringstream os;
    os << "method,dataset,n,mae,tolerance,tolerance_accuracy,gender_accuracy\n";
    os << method << "," << dataset << "," << report.n << ","
       << format_number(report.mae) << "," << report.tolerance << ","
       << format_number(report.tolerance_accuracy) << ",";
    if (report.gender_accuracy) {
        os << format_number(*report.gender_accuracy);
    }
    os << "\n";
    return os.str();
}

std::string report_text(const EvalReport& report, const std::string& method,
                        const std::string& dataset) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %-12s %6s %8s %5s %9s %8s\n",
                  "Method", "DB", "n", "MAE", "Tol", "Accuracy", "Gender");
    os << line;
    std::snprintf(line, sizeof(line), "%-20s %-12s %6d %8s %5d %9s %8s\n",
                  method.c_str(), dataset.c_str(), report.n,
                  format_number(report.mae).c_str(), report.tolerance,
                  format_percent(report.tolerance_accuracy).c_str(),
                  report.gender_accuracy ? format_percent(*report.gender_accuracy).c_str()
                                         : "-");
    os << line;
    if (!report.per_class.empty()) {
        os << "per-class error:\n";
        for (const PerClassError& pc : report.per_class) {
            std::snprintf(line, sizeof(line), "  class %3d  n=%-5d mae=%s\n",
                          pc.class_index, pc.count,
                          format_number(pc.mean_abs_error).c_str());
            os << line;
        }
    }
    return os.str();
}

} // namespace ccnn
