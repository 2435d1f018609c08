// Gradient clipping and AdamW (decoupled weight decay).
#pragma once

#include <cmath>
#include <vector>

#include "sttran/params.hpp"
#include "sttran/tensor.hpp"

namespace sttran {

// Scales all gradients by max_norm/g when the global L2 norm g exceeds
// max_norm. Returns the pre-clip norm.
template <typename S>
double clip_global_norm(std::vector<Tensor<S>>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        for (S g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const S s = static_cast<S>(max_norm / norm);
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            auto& node = *p.node();
            for (auto& g : node.grad) g *= s;
        }
    }
    return norm;
}

struct AdamWOptions {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Weight decay is applied to the parameter directly (not through the
// moments); moments are bias-corrected.
template <typename S>
class AdamW {
public:
    AdamW(std::vector<Tensor<S>> params, AdamWOptions opts) : params_(std::move(params)), opts_(opts) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].numel(), S(0));
            v_[i].assign(params_[i].numel(), S(0));
        }
    }

    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& node = *params_[i].node();
            const bool has_grad = !node.grad.empty();
            for (std::size_t j = 0; j < node.value.size(); ++j) {
                const double g = has_grad ? static_cast<double>(node.grad[j]) : 0.0;
                double m = opts_.beta1 * static_cast<double>(m_[i][j]) + (1.0 - opts_.beta1) * g;
                double v = opts_.beta2 * static_cast<double>(v_[i][j]) + (1.0 - opts_.beta2) * g * g;
                m_[i][j] = static_cast<S>(m);
                v_[i][j] = static_cast<S>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                double w = static_cast<double>(node.value[j]);
                w -= opts_.lr * opts_.weight_decay * w;  // decoupled decay
                w -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
                node.value[j] = static_cast<S>(w);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    std::uint64_t step_count() const { return step_count_; }
    void set_step_count(std::uint64_t s) { step_count_ = s; }
    const AdamWOptions& options() const { return opts_; }
    std::vector<std::vector<S>>& first_moments() { return m_; }
    std::vector<std::vector<S>>& second_moments() { return v_; }
    const std::vector<Tensor<S>>& params() const { return params_; }

private:
    std::vector<Tensor<S>> params_;
    AdamWOptions opts_;
    std::vector<std::vector<S>> m_, v_;
    std::uint64_t step_count_ = 0;
};

}  // namespace sttran
