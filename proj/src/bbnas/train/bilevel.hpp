#pragma once

#include <vector>

#include "bbnas/autodiff/parameter.hpp"
#include "bbnas/train/config.hpp"

namespace bbnas::train {

// The two losses of a bilevel problem, each rebuilt from the current
// parameter values on every call.
class BilevelObjective {
public:
    virtual ~BilevelObjective() = default;
    virtual std::vector<ad::Parameter*> weight_params() = 0;
    virtual std::vector<ad::Parameter*> arch_params() = 0;
    virtual ad::Tensor train_loss() = 0;
    virtual ad::Tensor val_loss() = 0;
};

struct ArchGradient {
    std::vector<std::vector<double>> grads;  // one per arch_params() entry
    double val_loss = 0.0;
    double val_weight_grad_norm = 0.0;  // ||grad_w' L_val|| (second order only)
    bool correction_skipped = false;
};

// first: grad_alpha L_val(w, alpha).
// second: w' = w - xi_w grad_w L_train(w, alpha), then
//   grad_alpha L_val(w', alpha) - xi_w * H dw'
// where H dw' = (grad_alpha L_train(w+) - grad_alpha L_train(w-)) / (2 eps),
// w+- = w +- eps dw', dw' = grad_w' L_val(w', alpha), eps = 0.01 / ||dw'||.
// Weights are restored bit-exactly and all grads are cleared on return.
ArchGradient arch_gradient(BilevelObjective& obj, ArchOrder order, double xi_w);

}  // namespace bbnas::train
