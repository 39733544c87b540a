#include "bbnas/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "bbnas/common/error.hpp"

namespace bbnas::ad {

namespace {

std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

thread_local bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::vector<double>& Node::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    require(numel(shape) == values.size(), ErrorKind::shape_mismatch,
            "tensor: shape " + to_string(shape) + " does not match " +
                std::to_string(values.size()) + " values");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    n->leaf = true;
    n->id = next_id();
    return Tensor(std::move(n));
}

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->id = next_id();
    for (auto& p : parents) {
        if (g_grad_enabled && p.defined() && p.requires_grad()) {
            require(!p.node()->consumed, ErrorKind::state,
                    "tensor: operand belongs to a graph already consumed by backward");
            n->requires_grad = true;
        }
    }
    if (n->requires_grad) {
        n->leaf = false;
        // Positional parents are kept (including constants) so backward
        // closures can index them; constants simply never get a grad.
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node_);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = numel(shape);
    return make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = numel(shape);
    return make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    return make_leaf(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return make_leaf(Shape{}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    require(defined(), ErrorKind::state, "tensor: undefined");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    require(axis < s.size(), ErrorKind::invalid_argument,
            "tensor: axis " + std::to_string(axis) + " out of range for " + to_string(s));
    return s[axis];
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const {
    require(defined(), ErrorKind::state, "tensor: undefined");
    return node_->value;
}

std::span<double> Tensor::mutable_data() {
    require(defined() && node_->leaf, ErrorKind::state, "tensor: only leaves are writable");
    return node_->value;
}

double Tensor::item() const {
    require(size() == 1, ErrorKind::shape_mismatch,
            "tensor: item() on shape " + to_string(shape()));
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->leaf; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    require(has_grad(), ErrorKind::state, "tensor: no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return node_->grad_buffer(); }

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
    if (node_) {
        node_->grad.clear();
        node_->grad.shrink_to_fit();
    }
}

std::uint64_t Tensor::id() const { return node_ ? node_->id : 0; }

Tensor Tensor::detach(bool requires_grad) const {
    return make_leaf(shape(), node_->value, requires_grad);
}

BackwardStats backward(const Tensor& loss) {
    require(loss.defined(), ErrorKind::state, "backward: undefined loss");
    Node* root = loss.node();
    require(root->value.size() == 1, ErrorKind::shape_mismatch,
            "backward: loss must be scalar, got shape " + to_string(root->shape));
    require(!root->consumed, ErrorKind::state,
            "backward: graph already consumed; run forward again");
    require(root->requires_grad, ErrorKind::state,
            "backward: loss does not depend on any trainable tensor");

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    BackwardStats stats;
    root->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        ++stats.nodes_visited;
        if (n->leaf) {
            ++stats.leaves_reached;
            continue;
        }
        n->grad_buffer();
        if (n->backward_fn) n->backward_fn(*n);
    }
    // Release intermediate state; leaves keep their accumulated grads.
    for (Node* n : order) {
        if (n->leaf) continue;
        n->backward_fn = nullptr;
        n->parents.clear();
        n->grad.clear();
        n->grad.shrink_to_fit();
        n->consumed = true;
    }
    return stats;
}

}  // namespace bbnas::ad
