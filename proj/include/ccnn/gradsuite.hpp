#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/gradcheck.hpp"

namespace ccnn {

struct GradSuiteResult {
    bool passed = true;
    double max_rel_err = 0.0;
    int checks = 0;
    std::vector<std::string> failures;
    std::string summary() const;
};

// Finite-difference verification of every gradient path: each backbone layer
// (and the input), the comparative pair loss on both label values, the
// sigmoid/BCE head, the per-batch training objective (BCE + weighted sweep),
// and the joint multi-task loss. One fixture set per seed. Central
// differences are meaningless within a step of a ReLU kink or of the hinge,
// so fixtures whose activations or pair energies fall inside a guard band
// are redrawn deterministically.
GradSuiteResult run_gradient_suite(std::uint64_t first_seed, int n_seeds,
                                   double step, double tol);

} // namespace ccnn
