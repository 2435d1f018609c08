// Named parameter registry with seeded, order-deterministic initialization.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sttran/rng.hpp"
#include "sttran/tensor.hpp"

namespace sttran {

template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> tensor;
    bool trainable = true;  // false for persistent buffers (running stats, tables)
};

enum class Init { zeros, ones, xavier_uniform, normal_002, table };

// Registration order defines both the initialization stream and the
// checkpoint layout, so building the same model twice from the same seed
// yields bit-identical parameters.
template <typename S>
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : rng_(mix64(seed, hash_str("param-init"))) {}

    Tensor<S> add(const std::string& name, Shape shape, Init init, bool trainable = true) {
        check_contract(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
        std::vector<S> data(shape_numel(shape));
        switch (init) {
            case Init::zeros:
                break;
            case Init::ones:
                std::fill(data.begin(), data.end(), S(1));
                break;
            case Init::xavier_uniform: {
                check_contract(shape.size() >= 2, "xavier init needs a matrix: " + name);
                double fan_in = 1, fan_out = 1;
                if (shape.size() == 2) {
                    fan_in = static_cast<double>(shape[0]);
                    fan_out = static_cast<double>(shape[1]);
                } else {  // conv [Co,Ci,kh,kw]
                    const double rf = static_cast<double>(shape[2] * shape[3]);
                    fan_in = static_cast<double>(shape[1]) * rf;
                    fan_out = static_cast<double>(shape[0]) * rf;
                }
                const double a = std::sqrt(6.0 / (fan_in + fan_out));
                for (auto& v : data) v = static_cast<S>(rng_.uniform(-a, a));
                break;
            }
            case Init::normal_002:
                for (auto& v : data) v = static_cast<S>(rng_.normal(0.0, 0.02));
                break;
            case Init::table: {
                // semantic-embedding rows; unit-ish scale per dimension
                const double std = 1.0 / std::sqrt(static_cast<double>(shape.back()));
                for (auto& v : data) v = static_cast<S>(rng_.normal(0.0, std));
                break;
            }
        }
        Tensor<S> t(std::move(shape), std::move(data), trainable);
        index_[name] = params_.size();
        params_.push_back(Parameter<S>{name, t, trainable});
        return t;
    }

    Tensor<S> get(const std::string& name) const {
        auto it = index_.find(name);
        check_contract(it != index_.end(), "unknown parameter: " + name);
        return params_[it->second].tensor;
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Parameter<S>>& all() { return params_; }
    const std::vector<Parameter<S>>& all() const { return params_; }

    std::vector<Tensor<S>> trainable() const {
        std::vector<Tensor<S>> out;
        for (const auto& p : params_)
            if (p.trainable) out.push_back(p.tensor);
        return out;
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.tensor.numel();
        return n;
    }

private:
    Rng rng_;
    std::vector<Parameter<S>> params_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace sttran
