#include "ccnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ccnn {

bool GradCheckReport::passed() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const GradCheckEntry& e) { return e.pass; });
}

double GradCheckReport::max_rel_err() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_err);
    return m;
}

std::string GradCheckReport::to_string() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << (e.pass ? "  ok  " : " FAIL ") << e.name
           << "  max_rel_err=" << e.max_rel_err
           << " (" << e.scalar_count << " scalars)\n";
    }
    return os.str();
}

GradCheckReport finite_diff_check(const GradCheckLoss& loss,
                                  std::span<const NamedParam> params,
                                  double step, double tol) {
    if (!(step > 0.0) || !(tol > 0.0)) {
        throw std::invalid_argument("finite_diff_check requires step > 0 and tol > 0");
    }

    for (const auto& np : params) np.param->zero_grad();
    loss(true);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& np : params) analytic.push_back(np.param->grad.data());

    GradCheckReport report;
    report.step = step;
    report.tol = tol;

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi].param;
        GradCheckEntry entry;
        entry.name = params[pi].name;
        entry.scalar_count = p.value.size();

        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + step;
            const double f_plus = loss(false);
            p.value[i] = saved - step;
            const double f_minus = loss(false);
            p.value[i] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[pi][i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-6});
            entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
        }
        entry.pass = entry.max_rel_err <= tol;
        report.entries.push_back(std::move(entry));
    }

    for (const auto& np : params) np.param->zero_grad();
    return report;
}

} // namespace ccnn
