#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bbnas/autodiff/tensor.hpp"

namespace bbnas::ad {

enum class Role {
    backbone_weight,
    head_ins_weight,
    head_cls_weight,
    arch_bb,
    arch_ins,
    arch_cls,
};

inline constexpr Role kAllRoles[] = {Role::backbone_weight, Role::head_ins_weight,
                                     Role::head_cls_weight, Role::arch_bb,
                                     Role::arch_ins,        Role::arch_cls};

std::string_view role_name(Role role);
bool is_arch(Role role);

// Trainable leaf with its optimizer state. The role is fixed at construction.
class Parameter {
public:
    Parameter(std::string name, Role role, Tensor value);

    const std::string& name() const { return name_; }
    Role role() const { return role_; }
    Tensor& value() { return value_; }
    const Tensor& value() const { return value_; }
    std::vector<double>& momentum() { return momentum_; }
    const std::vector<double>& momentum() const { return momentum_; }

private:
    std::string name_;
    Role role_;
    Tensor value_;
    std::vector<double> momentum_;
};

// Owns parameters with stable addresses, in registration order.
class ParameterStore {
public:
    Parameter& add(std::string name, Role role, Tensor value);

    std::size_t size() const { return params_.size(); }
    Parameter& operator[](std::size_t i) { return *params_[i]; }
    const Parameter& operator[](std::size_t i) const { return *params_[i]; }
    Parameter* find(std::string_view name);

    std::vector<Parameter*> all();
    std::vector<Parameter*> with_role(Role role);
    std::vector<Parameter*> weights();
    std::vector<Parameter*> arch();

    void zero_grad();

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

struct SgdOptions {
    double lr = 0.0;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

struct SgdReport {
    std::size_t updated = 0;
    std::size_t skipped_without_grad = 0;
};

// v <- momentum*v + grad + weight_decay*value; value <- value - lr*v.
// Grads are cleared afterwards. Parameters with no grad are skipped.
SgdReport sgd_step(const std::vector<Parameter*>& params, const SgdOptions& opts);

}  // namespace bbnas::ad
