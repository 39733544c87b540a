#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bbnas/nas/primitives.hpp"

namespace bbnas::nas {

// Two input nodes, n_nodes - 3 internal nodes, one output node.
struct CellSpec {
    std::size_t n_nodes = 5;
    bool reduction = false;
    std::size_t width = 8;

    std::size_t n_internal() const { return n_nodes - 3; }
    std::size_t n_edges() const;
    std::size_t out_channels() const { return n_internal() * width; }
};

// sum_{j=1..n_internal} (j + 1)
std::size_t edge_count(std::size_t n_internal);
// Row of the architecture matrix for the edge source -> internal node j
// (source 0 and 1 are the cell inputs, source m+2 is internal node m).
std::size_t edge_index(std::size_t node, std::size_t source);

class Cell {
public:
    Cell(const CellSpec& spec, const OpSet& ops, std::size_t c_prev_prev, std::size_t c_prev,
         bool reduction_prev, ParamFactory& factory, const std::string& prefix, Role role);

    Cell(const Cell&) = delete;
    Cell& operator=(const Cell&) = delete;
    Cell(Cell&&) = default;

    const CellSpec& spec() const { return spec_; }

    // ReLU + 1x1 convolution bringing both inputs to the cell width; stride 2
    // on prev_prev when the preceding cell was a reduction.
    std::pair<Tensor, Tensor> preprocess(const Tensor& prev_prev, const Tensor& prev) const;

    // Node sums over mixed edges; output is the channel concatenation of the
    // internal nodes. alphas is [n_edges, |ops|].
    Tensor forward_nodes(const Tensor& s0, const Tensor& s1, const Tensor& alphas) const;

    Tensor forward(const Tensor& prev_prev, const Tensor& prev, const Tensor& alphas) const;

private:
    CellSpec spec_;
    std::size_t n_ops_;
    bool reduction_prev_;
    Parameter* pre0_;
    Parameter* pre1_;
    std::vector<std::vector<PrimitivePtr>> edges_;
};

}  // namespace bbnas::nas
