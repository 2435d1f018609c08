// Finite-difference verification of the reverse pass. The numeric side is a
// central difference, independent of any backward code path.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sttran/params.hpp"
#include "sttran/tensor.hpp"

namespace sttran {

struct GradCheckOptions {
    double h = 1e-5;
    // 0 = check every entry; otherwise a deterministic stride subsample per tensor
    std::size_t max_entries_per_tensor = 0;
    // negative control: perturb one analytic gradient entry before comparing
    bool corrupt_analytic = false;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

// f() must rebuild the loss graph from the current parameter values and be
// deterministic (dropout disabled). Relative error uses a unit floor so that
// near-zero gradients compare absolutely.
template <typename S>
GradCheckReport grad_check(std::vector<Parameter<S>>& params, const std::function<Tensor<S>()>& f,
                           GradCheckOptions opts = {}) {
    static_assert(sizeof(S) == 8, "grad_check expects 64-bit scalars");

    for (auto& p : params) p.tensor.zero_grad();
    Tensor<S> loss = f();
    loss.backward();

    std::vector<std::vector<S>> analytic;
    for (auto& p : params) {
        auto& node = *p.tensor.node();
        node.ensure_grad();
        analytic.push_back(node.grad);
    }
    if (opts.corrupt_analytic && !analytic.empty() && !analytic[0].empty())
        analytic[0][0] = analytic[0][0] * S(1.5) + S(0.25);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& node = *params[pi].tensor.node();
        const std::size_t n = node.value.size();
        std::size_t stride = 1;
        if (opts.max_entries_per_tensor > 0 && n > opts.max_entries_per_tensor)
            stride = (n + opts.max_entries_per_tensor - 1) / opts.max_entries_per_tensor;
        for (std::size_t j = 0; j < n; j += stride) {
            const S orig = node.value[j];
            node.value[j] = orig + static_cast<S>(opts.h);
            const double fp = static_cast<double>(f().item());
            node.value[j] = orig - static_cast<S>(opts.h);
            const double fm = static_cast<double>(f().item());
            node.value[j] = orig;
            const double numeric = (fp - fm) / (2.0 * opts.h);
            const double a = static_cast<double>(analytic[pi][j]);
            const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
            const double rel = std::fabs(a - numeric) / denom;
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = params[pi].name;
                report.worst_index = j;
            }
        }
    }
    return report;
}

}  // namespace sttran
