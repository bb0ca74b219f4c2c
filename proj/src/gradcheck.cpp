#include "organct/gradcheck.hpp"

#include <cmath>

#include "organct/util.hpp"

namespace organct {

GradCheckResult check_gradients(nn::ParamStore& params, const ScalarForward& f,
                                const GradForward& g, int probes, double eps,
                                std::uint64_t seed) {
    const nn::GradMap analytic = g(params);
    GradCheckResult result;
    std::uint64_t state = seed ^ 0x67726164ULL;
    for (auto& [name, grad] : analytic) {
        nn::Mat& p = params.at(name);
        const int total = int(p.size());
        for (int k = 0; k < probes; ++k) {
            int idx;
            if (total <= probes) {
                if (k >= total) break;
                idx = k;
            } else {
                idx = int(splitmix64(state) % std::uint64_t(total));
            }
            const int r = idx / int(p.cols()), c = idx % int(p.cols());
            const double saved = p(r, c);
            p(r, c) = saved + eps;
            const double fp = f(params);
            p(r, c) = saved - eps;
            const double fm = f(params);
            p(r, c) = saved;
            const double numeric = (fp - fm) / (2 * eps);
            const double a = grad(r, c);
            // the additive floor keeps finite-difference roundoff on
            // near-zero gradients from reading as a large relative error
            const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-3);
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_param = name;
            }
            ++result.checked;
        }
    }
    return result;
}

}  // namespace organct
