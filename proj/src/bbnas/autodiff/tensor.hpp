#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bbnas::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;

// Dense row-major float64 array. A Tensor is a shared handle onto a graph
// node; copies alias the same storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;

    std::span<const double> data() const;
    // Writable storage; only leaves may be mutated.
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t flat) const { return data()[flat]; }

    bool requires_grad() const;
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();
    void clear_grad();

    std::uint64_t id() const;

    // Leaf copy with the same values and no graph history.
    Tensor detach(bool requires_grad = false) const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                              std::function<void(Node&)>);
    friend Tensor make_leaf(Shape, std::vector<double>, bool);

    std::shared_ptr<Node> node_;
};

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads self.grad and accumulates into parents' grads.
    std::function<void(Node& self)> backward_fn;

    std::vector<double>& grad_buffer();
};

Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad);

// Build an operation result. Parents that do not require grad are dropped;
// when none remain the result is a constant leaf and backward_fn is ignored.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward_fn);

// While alive on a thread, operations record no graph history.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

struct BackwardStats {
    std::size_t nodes_visited = 0;
    std::size_t leaves_reached = 0;
};

// Reverse-mode sweep from a scalar loss. Each reachable node is visited once
// in reverse topological order; leaf gradients accumulate. The graph is
// released afterwards, so a second call on the same loss is rejected.
BackwardStats backward(const Tensor& loss);

}  // namespace bbnas::ad
