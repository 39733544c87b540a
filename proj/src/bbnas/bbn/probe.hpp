#pragma once

#include <array>
#include <span>
#include <vector>

#include "bbnas/bbn/model.hpp"

namespace bbnas::bbn {

inline constexpr std::size_t kRoleCount = 6;

struct RoleGradients {
    std::array<std::vector<double>, kRoleCount> flat;  // indexed by ad::Role
    std::array<double, kRoleCount> norm{};
};

struct ProbeBatch {
    Tensor x_ins;
    std::vector<int> y_ins;
    Tensor x_cls;
    std::vector<int> y_cls;
};

struct GradientReport {
    LossForm form = LossForm::decomposed;
    RoleGradients at_ins;  // mu = 1
    RoleGradients at_cls;  // mu = 0
    std::vector<double> mus;
    std::vector<RoleGradients> at_mu;
    // max |g(mu) - (mu g_ins + (1-mu) g_cls)| per mu and role
    std::vector<std::array<double, kRoleCount>> linearity_residual;

    double max_linearity_residual() const;
    // max / min backbone (weights + alphas) gradient norm over the mu list
    double backbone_norm_ratio() const;
    // max |g_bb(mu) - g_bb(mu')| over all pairs of probed mus, backbone roles
    double backbone_mu_spread() const;
};

// Gradient of the training loss at one mu, grouped by role, parameters in
// store order. Leaves grads cleared.
RoleGradients gradients_at(BBNModel& model, const ProbeBatch& batch, double mu, LossForm form);

// Evaluates the loss at mu=1, mu=0 and each requested mu on the same batch
// and weights, and measures how far each gradient is from the convex
// combination of the two endpoint gradients. Rejects a run whose mu=1 pass is
// not bit-identical when repeated.
GradientReport gradient_probe(BBNModel& model, const ProbeBatch& batch,
                              std::span<const double> mus, LossForm form);

}  // namespace bbnas::bbn
