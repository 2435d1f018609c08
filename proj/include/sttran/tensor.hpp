// Dense tensor with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a tape node. Ops build the graph eagerly;
// backward() walks reachable nodes in reverse creation order (creation order
// is a valid topological order since parents always exist before children),
// accumulates gradients, then detaches the tape so intermediate buffers can
// be reclaimed. Gradients on leaves persist until zero_grad().
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "sttran/common.hpp"

namespace sttran {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

// Records whether new ops should be taped. Forward-only paths (evaluation,
// prediction) wrap themselves in a NoGradGuard to skip graph construction.
inline bool& grad_enabled() {
    static thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename S>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<S> value;
        std::vector<S> grad;  // allocated lazily, zero-filled
        bool requires_grad = false;
        std::uint64_t id = 0;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;  // pushes node.grad into parents

        void ensure_grad() {
            if (grad.size() != value.size()) grad.assign(value.size(), S(0));
        }
        void detach() {
            parents.clear();
            backward_fn = nullptr;
        }
    };

    Tensor() = default;

    Tensor(Shape shape, std::vector<S> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor data size " + std::to_string(data.size()) + " does not match shape " +
                                 shape_str(shape));
        node_ = std::make_shared<Node>();
        node_->shape = std::move(shape);
        node_->value = std::move(data);
        node_->requires_grad = requires_grad && grad_enabled();
        node_->id = next_id();
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<S> data(shape_numel(shape), S(0));
        return Tensor(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor scalar(S v) { return Tensor({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t ndim() const { return node_->shape.size(); }

    const std::vector<S>& data() const { return node_->value; }
    std::vector<S>& data() { return node_->value; }
    const std::vector<S>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }

    S item() const {
        check_contract(numel() == 1, "item() requires a scalar tensor, got shape " + shape_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
    }

    std::shared_ptr<Node> node() const { return node_; }

    // Creates a taped result node. Parents that do not require grad are still
    // kept alive but receive no gradient.
    static Tensor make_op(Shape shape, std::vector<S> value, std::vector<Tensor> inputs,
                          std::function<void(Node&)> backward_fn) {
        Tensor out(std::move(shape), std::move(value));
        bool needs = false;
        for (const auto& t : inputs) needs = needs || t.node_->requires_grad;
        if (needs && grad_enabled()) {
            out.node_->requires_grad = true;
            out.node_->parents.reserve(inputs.size());
            for (auto& t : inputs) out.node_->parents.push_back(t.node_);
            out.node_->backward_fn = std::move(backward_fn);
        }
        return out;
    }

    // Reverse pass from a scalar loss. Post: every requires_grad node
    // reachable from the loss has a populated grad; the tape is cleared.
    void backward() {
        check_contract(numel() == 1, "backward() requires a scalar loss, got shape " + shape_str(shape()));
        check_contract(node_->requires_grad, "backward() on a tensor that does not require grad");

        // Collect reachable grad-requiring nodes; sort by id descending.
        std::vector<std::shared_ptr<Node>> order;
        collect(node_, order);
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->id > b->id; });

        node_->ensure_grad();
        node_->grad[0] = S(1);
        for (auto& n : order) {
            if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
        }
        for (auto& n : order) n->detach();
    }

private:
    static std::uint64_t next_id() {
        static thread_local std::uint64_t counter = 0;
        return ++counter;
    }

    static void collect(const std::shared_ptr<Node>& root, std::vector<std::shared_ptr<Node>>& out) {
        std::vector<std::shared_ptr<Node>> stack{root};
        std::unordered_set<const Node*> seen;
        while (!stack.empty()) {
            auto n = stack.back();
            stack.pop_back();
            if (!seen.insert(n.get()).second) continue;
            out.push_back(n);
            for (auto& p : n->parents)
                if (p->requires_grad) stack.push_back(p);
        }
    }

    std::shared_ptr<Node> node_;
};

// Accumulate src into the grad buffer of a node (allocating if needed).
template <typename S>
void accumulate_grad(typename Tensor<S>::Node& node, const S* src) {
    node.ensure_grad();
    for (std::size_t i = 0; i < node.grad.size(); ++i) node.grad[i] += src[i];
}

}  // namespace sttran
