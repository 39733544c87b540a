#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbnas/autodiff/parameter.hpp"
#include "bbnas/common/rng.hpp"

namespace bbnas::nas {

using ad::Parameter;
using ad::ParameterStore;
using ad::Role;
using ad::Tensor;

// Registers freshly initialized parameters under a common role.
class ParamFactory {
public:
    ParamFactory(ParameterStore& store, Rng& rng) : store_(store), rng_(rng) {}

    // He-normal filter bank [out, in, k, k].
    Parameter& conv(const std::string& name, Role role, std::size_t out, std::size_t in,
                    std::size_t k);
    Parameter& normal(const std::string& name, Role role, ad::Shape shape, double stddev);
    Parameter& zeros(const std::string& name, Role role, ad::Shape shape);

    ParameterStore& store() { return store_; }

private:
    ParameterStore& store_;
    Rng& rng_;
};

class Primitive {
public:
    virtual ~Primitive() = default;
    virtual std::string_view name() const = 0;
    virtual Tensor forward(const Tensor& x) const = 0;
};

using PrimitivePtr = std::unique_ptr<Primitive>;

// Candidate operations, in a fixed order so architecture indices stay stable.
class OpSet {
public:
    explicit OpSet(std::vector<std::string> names);

    // {zero, skip, conv3x3-relu, maxpool3x3}
    static OpSet desk();
    // {zero, skip, maxpool3x3, avgpool3x3, sepconv3x3, sepconv5x5, dilconv3x3, dilconv5x5}
    static OpSet full();
    static OpSet by_name(std::string_view which);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    std::size_t index_of(std::string_view op) const;
    bool contains(std::string_view op) const;
    std::size_t zero_index() const { return index_of("zero"); }

    bool operator==(const OpSet&) const = default;

private:
    std::vector<std::string> names_;
};

bool is_known_primitive(std::string_view name);

// Instantiate one primitive at the given channel width and stride
// (stride 2 only on reduction-cell input edges).
PrimitivePtr make_primitive(std::string_view name, std::size_t channels, std::size_t stride,
                            ParamFactory& factory, const std::string& prefix, Role role);

// sum_o softmax(alpha_edge)_o * o(x)
Tensor mixed_op_forward(const Tensor& x, const Tensor& alpha_edge,
                        std::span<const PrimitivePtr> ops);

}  // namespace bbnas::nas
