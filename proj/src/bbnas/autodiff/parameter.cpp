#include "bbnas/autodiff/parameter.hpp"

#include "bbnas/common/error.hpp"

namespace bbnas::ad {

std::string_view role_name(Role role) {
    switch (role) {
        case Role::backbone_weight: return "backbone-weight";
        case Role::head_ins_weight: return "head-ins-weight";
        case Role::head_cls_weight: return "head-cls-weight";
        case Role::arch_bb: return "arch-bb";
        case Role::arch_ins: return "arch-ins";
        case Role::arch_cls: return "arch-cls";
    }
    return "unknown";
}

bool is_arch(Role role) {
    return role == Role::arch_bb || role == Role::arch_ins || role == Role::arch_cls;
}

Parameter::Parameter(std::string name, Role role, Tensor value)
    : name_(std::move(name)), role_(role), value_(std::move(value)) {
    require(value_.defined() && value_.is_leaf(), ErrorKind::invalid_argument,
            "parameter '" + name_ + "': value must be a leaf tensor");
    if (!value_.requires_grad()) value_ = value_.detach(true);
    momentum_.assign(value_.size(), 0.0);
}

Parameter& ParameterStore::add(std::string name, Role role, Tensor value) {
    require(find(name) == nullptr, ErrorKind::invalid_argument,
            "parameter store: duplicate name '" + name + "'");
    params_.push_back(std::make_unique<Parameter>(std::move(name), role, std::move(value)));
    return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
    for (auto& p : params_)
        if (p->name() == name) return p.get();
    return nullptr;
}

std::vector<Parameter*> ParameterStore::all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<Parameter*> ParameterStore::with_role(Role role) {
    std::vector<Parameter*> out;
    for (auto& p : params_)
        if (p->role() == role) out.push_back(p.get());
    return out;
}

std::vector<Parameter*> ParameterStore::weights() {
    std::vector<Parameter*> out;
    for (auto& p : params_)
        if (!is_arch(p->role())) out.push_back(p.get());
    return out;
}

std::vector<Parameter*> ParameterStore::arch() {
    std::vector<Parameter*> out;
    for (auto& p : params_)
        if (is_arch(p->role())) out.push_back(p.get());
    return out;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->value().clear_grad();
}

SgdReport sgd_step(const std::vector<Parameter*>& params, const SgdOptions& opts) {
    SgdReport report;
    for (Parameter* p : params) {
        Tensor& t = p->value();
        if (!t.has_grad()) {
            ++report.skipped_without_grad;
            continue;
        }
        auto g = t.grad();
        auto w = t.mutable_data();
        auto& v = p->momentum();
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = opts.momentum * v[i] + g[i] + opts.weight_decay * w[i];
            w[i] -= opts.lr * v[i];
        }
        t.clear_grad();
        ++report.updated;
    }
    return report;
}

}  // namespace bbnas::ad
