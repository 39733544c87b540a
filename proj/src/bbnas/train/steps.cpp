#include "bbnas/train/steps.hpp"

#include <cmath>
#include <string>

#include "bbnas/autodiff/ops.hpp"
#include "bbnas/common/error.hpp"

namespace bbnas::train {

using ad::Role;

ad::Tensor step_loss(const bbn::BBNModel& model, const BilateralBatch& batch,
                     const StepContext& ctx) {
    if (!ctx.bilateral) return ad::cross_entropy(model.forward_single(batch.x_ins), batch.y_ins);
    const auto logits = model.forward(batch.x_ins, batch.x_cls, ctx.mu);
    return bbn::training_loss(logits, batch.y_ins, batch.y_cls, ctx.mu, ctx.form);
}

namespace {

bool head_gated(Role role, const StepContext& ctx) {
    const bool ins = role == Role::head_ins_weight || role == Role::arch_ins;
    const bool cls = role == Role::head_cls_weight || role == Role::arch_cls;
    if (!ctx.bilateral) return cls;
    return (ins && ctx.mu == 0.0) || (cls && ctx.mu == 1.0);
}

}  // namespace

std::vector<ad::Parameter*> active_weights(bbn::BBNModel& model, const StepContext& ctx,
                                           bool freeze_backbone) {
    std::vector<ad::Parameter*> out;
    for (auto* p : model.params().weights()) {
        if (head_gated(p->role(), ctx)) continue;
        if (freeze_backbone && p->role() == Role::backbone_weight) continue;
        out.push_back(p);
    }
    return out;
}

WeightStepReport weight_step(bbn::BBNModel& model, const BilateralBatch& batch,
                             const StepContext& ctx, const ad::SgdOptions& opts,
                             bool freeze_backbone) {
    model.params().zero_grad();
    WeightStepReport rep;
    ad::Tensor loss;
    ad::Tensor mixed;
    if (ctx.bilateral) {
        const auto logits = model.forward(batch.x_ins, batch.x_cls, ctx.mu);
        mixed = logits.mixed;
        loss = bbn::training_loss(logits, batch.y_ins, batch.y_cls, ctx.mu, ctx.form);
    } else {
        mixed = model.forward_single(batch.x_ins);
        loss = ad::cross_entropy(mixed, batch.y_ins);
    }
    rep.loss = loss.item();
    require(std::isfinite(rep.loss), ErrorKind::numeric,
            "training loss is not finite (mu=" + std::to_string(ctx.mu) +
                ", lr=" + std::to_string(opts.lr) + ")");
    {
        const auto z = mixed.data();
        const std::size_t n = mixed.dim(0), c = mixed.dim(1);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t arg = 0;
            for (std::size_t k = 1; k < c; ++k)
                if (z[i * c + k] > z[i * c + arg]) arg = k;
            if (static_cast<int>(arg) == batch.y_ins[i]) ++hits;
        }
        rep.correct = static_cast<double>(hits) / static_cast<double>(n);
    }
    ad::backward(loss);
    double sq = 0.0;
    for (auto* p : model.params().with_role(Role::backbone_weight))
        if (p->value().has_grad())
            for (double g : p->value().grad()) sq += g * g;
    rep.backbone_grad_norm = std::sqrt(sq);
    ad::sgd_step(active_weights(model, ctx, freeze_backbone), opts);
    model.params().zero_grad();
    return rep;
}

ArchStepReport arch_step(bbn::BBNModel& model, const BilateralBatch& train,
                         const BilateralBatch& val, const StepContext& ctx, ArchOrder order,
                         double xi_w, const ArchLrs& lrs, double momentum) {
    BBNObjective obj(model, train, val, ctx);
    const auto arch = obj.arch_params();
    const auto g = arch_gradient(obj, order, xi_w);

    ArchStepReport rep;
    rep.val_loss = g.val_loss;
    rep.correction_skipped = g.correction_skipped;

    for (std::size_t i = 0; i < arch.size(); ++i) {
        ad::Parameter* p = arch[i];
        double lr = 0.0;
        switch (p->role()) {
            case Role::arch_bb: lr = lrs.backbone; break;
            case Role::arch_ins: lr = lrs.ins; break;
            case Role::arch_cls: lr = lrs.cls; break;
            default: break;
        }
        if (lr == 0.0 || head_gated(p->role(), ctx)) continue;
        auto grad = p->value().mutable_grad();
        std::copy(g.grads[i].begin(), g.grads[i].end(), grad.begin());
        ad::sgd_step({p}, ad::SgdOptions{lr, momentum, 0.0});
    }
    model.params().zero_grad();
    return rep;
}

}  // namespace bbnas::train
