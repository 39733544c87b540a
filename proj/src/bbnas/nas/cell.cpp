#include "bbnas/nas/cell.hpp"

#include "bbnas/autodiff/ops.hpp"
#include "bbnas/common/error.hpp"

namespace bbnas::nas {

std::size_t edge_count(std::size_t n_internal) {
    std::size_t n = 0;
    for (std::size_t j = 1; j <= n_internal; ++j) n += j + 1;
    return n;
}

std::size_t CellSpec::n_edges() const { return edge_count(n_internal()); }

std::size_t edge_index(std::size_t node, std::size_t source) {
    require(source < node + 2, ErrorKind::invalid_argument,
            "edge_index: source " + std::to_string(source) + " is not before node " +
                std::to_string(node));
    return edge_count(node) + source;
}

Cell::Cell(const CellSpec& spec, const OpSet& ops, std::size_t c_prev_prev, std::size_t c_prev,
           bool reduction_prev, ParamFactory& factory, const std::string& prefix, Role role)
    : spec_(spec), n_ops_(ops.size()), reduction_prev_(reduction_prev) {
    require(spec.n_nodes >= 4, ErrorKind::invalid_argument,
            "cell: need at least 4 nodes, got " + std::to_string(spec.n_nodes));
    pre0_ = &factory.conv(prefix + ".pre0", role, spec.width, c_prev_prev, 1);
    pre1_ = &factory.conv(prefix + ".pre1", role, spec.width, c_prev, 1);
    for (std::size_t j = 0; j < spec.n_internal(); ++j)
        for (std::size_t src = 0; src < j + 2; ++src) {
            const std::size_t stride = (spec.reduction && src < 2) ? 2 : 1;
            const std::string ep = prefix + ".e" + std::to_string(edge_index(j, src));
            std::vector<PrimitivePtr> row;
            for (const auto& name : ops.names())
                row.push_back(make_primitive(name, spec.width, stride, factory, ep + "." + name, role));
            edges_.push_back(std::move(row));
        }
}

std::pair<Tensor, Tensor> Cell::preprocess(const Tensor& prev_prev, const Tensor& prev) const {
    ad::Conv2dOptions o0;
    o0.stride = reduction_prev_ ? 2 : 1;
    Tensor s0 = ad::conv2d(ad::relu(prev_prev), pre0_->value(), std::nullopt, o0);
    Tensor s1 = ad::conv2d(ad::relu(prev), pre1_->value(), std::nullopt, {});
    return {s0, s1};
}

Tensor Cell::forward_nodes(const Tensor& s0, const Tensor& s1, const Tensor& alphas) const {
    require(alphas.rank() == 2 && alphas.dim(0) == spec_.n_edges() && alphas.dim(1) == n_ops_,
            ErrorKind::shape_mismatch,
            "cell: alphas " + ad::to_string(alphas.shape()) + ", expected [" +
                std::to_string(spec_.n_edges()) + "," + std::to_string(n_ops_) + "]");
    std::vector<Tensor> nodes{s0, s1};
    for (std::size_t j = 0; j < spec_.n_internal(); ++j) {
        Tensor acc;
        for (std::size_t src = 0; src < j + 2; ++src) {
            const std::size_t e = edge_index(j, src);
            Tensor y = mixed_op_forward(nodes[src], ad::select_row(alphas, e), edges_[e]);
            acc = acc.defined() ? ad::add(acc, y) : y;
        }
        nodes.push_back(acc);
    }
    std::vector<Tensor> internal(nodes.begin() + 2, nodes.end());
    return ad::concat(internal, 1);
}

Tensor Cell::forward(const Tensor& prev_prev, const Tensor& prev, const Tensor& alphas) const {
    auto [s0, s1] = preprocess(prev_prev, prev);
    return forward_nodes(s0, s1, alphas);
}

}  // namespace bbnas::nas
