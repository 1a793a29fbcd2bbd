#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccnn/tensor.hpp"

namespace ccnn {

struct NamedParam {
    std::string name;
    Param* param;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t scalar_count = 0;
    bool pass = true;
};

struct GradCheckReport {
    double step = 0.0;
    double tol = 0.0;
    std::vector<GradCheckEntry> entries;

    bool passed() const;
    double max_rel_err() const;
    std::string to_string() const;
};

// The loss callable computes a scalar from the current parameter values;
// with_grad=true must additionally accumulate analytic gradients into the
// params' grad tensors (which arrive zeroed).
using GradCheckLoss = std::function<double(bool with_grad)>;

// Compares analytic gradients against (f(t+h)-f(t-h))/2h per scalar.
// Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator so
// genuinely-zero gradients do not flag finite-difference noise.
GradCheckReport finite_diff_check(const GradCheckLoss& loss,
                                  std::span<const NamedParam> params,
                                  double step, double tol);

} // namespace ccnn
