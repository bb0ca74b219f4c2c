#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "organct/nn/params.hpp"

namespace organct {

// Scalar-valued forward pass built fresh for every evaluation (parameters may
// have been perturbed in between).
using ScalarForward = std::function<double(const nn::ParamStore&)>;
// Analytic gradients for the same forward pass.
using GradForward = std::function<nn::GradMap(const nn::ParamStore&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    int checked = 0;
};

// Central finite differences on a random subset of parameter entries
// (`probes` entries per tensor, or every entry when the tensor is smaller),
// compared against the analytic gradient. Relative error uses
// |a - n| / (|a| + |n| + 1e-3); the floor absorbs difference-quotient
// roundoff on near-zero gradients.
GradCheckResult check_gradients(nn::ParamStore& params, const ScalarForward& f,
                                const GradForward& g, int probes = 3,
                                double eps = 1e-5, std::uint64_t seed = 0);

}  // namespace organct
