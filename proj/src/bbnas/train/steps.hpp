#pragma once

#include "bbnas/bbn/probe.hpp"
#include "bbnas/train/bilevel.hpp"

namespace bbnas::train {

using BilateralBatch = bbn::ProbeBatch;

struct StepContext {
    bool bilateral = true;  // false: ins head only, CE on x_ins
    double mu = 1.0;
    bbn::LossForm form = bbn::LossForm::mixed_logits;
};

ad::Tensor step_loss(const bbn::BBNModel& model, const BilateralBatch& batch,
                     const StepContext& ctx);

// Weight parameters that take part in an update at this context: a head
// whose mixing coefficient is exactly zero is gated out, and in single-head
// training the cls head never moves.
std::vector<ad::Parameter*> active_weights(bbn::BBNModel& model, const StepContext& ctx,
                                           bool freeze_backbone);

struct WeightStepReport {
    double loss = 0.0;
    double backbone_grad_norm = 0.0;
    double correct = 0.0;  // fraction of rows whose mixed argmax hits y_ins
};

// Forward on the training batch, backward, one SGD step on the active
// weights. Architecture parameters are left untouched.
WeightStepReport weight_step(bbn::BBNModel& model, const BilateralBatch& batch,
                             const StepContext& ctx, const ad::SgdOptions& opts,
                             bool freeze_backbone = false);

struct ArchLrs {
    double backbone = 0.0;
    double ins = 0.0;
    double cls = 0.0;
};

struct ArchStepReport {
    double val_loss = 0.0;
    bool correction_skipped = false;
};

class BBNObjective : public BilevelObjective {
public:
    BBNObjective(bbn::BBNModel& model, const BilateralBatch& train, const BilateralBatch& val,
                 const StepContext& ctx)
        : model_(model), train_(train), val_(val), ctx_(ctx) {}

    std::vector<ad::Parameter*> weight_params() override { return model_.params().weights(); }
    std::vector<ad::Parameter*> arch_params() override { return model_.params().arch(); }
    ad::Tensor train_loss() override { return step_loss(model_, train_, ctx_); }
    ad::Tensor val_loss() override { return step_loss(model_, val_, ctx_); }

private:
    bbn::BBNModel& model_;
    const BilateralBatch& train_;
    const BilateralBatch& val_;
    StepContext ctx_;
};

// Architecture update from validation batches. Each alpha block moves at its
// own learning rate; a block whose rate is zero or whose head is gated out
// keeps both its value and its momentum. Weights are unchanged on return.
ArchStepReport arch_step(bbn::BBNModel& model, const BilateralBatch& train,
                         const BilateralBatch& val, const StepContext& ctx, ArchOrder order,
                         double xi_w, const ArchLrs& lrs, double momentum);

}  // namespace bbnas::train
