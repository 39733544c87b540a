#include "bbnas/bbn/probe.hpp"

#include <algorithm>
#include <cmath>

#include "bbnas/common/error.hpp"

namespace bbnas::bbn {

namespace {

bool is_backbone(std::size_t role) {
    return role == static_cast<std::size_t>(ad::Role::backbone_weight) ||
           role == static_cast<std::size_t>(ad::Role::arch_bb);
}

double backbone_norm(const RoleGradients& g) {
    double s = 0.0;
    for (std::size_t r = 0; r < kRoleCount; ++r)
        if (is_backbone(r)) s += g.norm[r] * g.norm[r];
    return std::sqrt(s);
}

}  // namespace

RoleGradients gradients_at(BBNModel& model, const ProbeBatch& batch, double mu, LossForm form) {
    auto& store = model.params();
    store.zero_grad();
    Logits logits = model.forward(batch.x_ins, batch.x_cls, mu);
    ad::backward(training_loss(logits, batch.y_ins, batch.y_cls, mu, form));
    RoleGradients out;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& p = store[i];
        auto& dst = out.flat[static_cast<std::size_t>(p.role())];
        if (p.value().has_grad()) {
            auto g = p.value().grad();
            dst.insert(dst.end(), g.begin(), g.end());
        } else {
            dst.insert(dst.end(), p.value().size(), 0.0);
        }
    }
    for (std::size_t r = 0; r < kRoleCount; ++r) {
        double s = 0.0;
        for (double v : out.flat[r]) s += v * v;
        out.norm[r] = std::sqrt(s);
    }
    store.zero_grad();
    return out;
}

GradientReport gradient_probe(BBNModel& model, const ProbeBatch& batch,
                              std::span<const double> mus, LossForm form) {
    GradientReport rep;
    rep.form = form;
    rep.at_ins = gradients_at(model, batch, 1.0, form);
    const RoleGradients again = gradients_at(model, batch, 1.0, form);
    for (std::size_t r = 0; r < kRoleCount; ++r)
        require(again.flat[r] == rep.at_ins.flat[r], ErrorKind::state,
                "gradient probe: repeated pass differs; computation is not deterministic");
    rep.at_cls = gradients_at(model, batch, 0.0, form);
    for (double mu : mus) {
        check_mu(mu);
        RoleGradients g = gradients_at(model, batch, mu, form);
        std::array<double, kRoleCount> res{};
        for (std::size_t r = 0; r < kRoleCount; ++r) {
            const auto& gi = rep.at_ins.flat[r];
            const auto& gc = rep.at_cls.flat[r];
            for (std::size_t k = 0; k < g.flat[r].size(); ++k) {
                const double expect = mu * gi[k] + (1.0 - mu) * gc[k];
                res[r] = std::max(res[r], std::abs(g.flat[r][k] - expect));
            }
        }
        rep.mus.push_back(mu);
        rep.at_mu.push_back(std::move(g));
        rep.linearity_residual.push_back(res);
    }
    return rep;
}

double GradientReport::max_linearity_residual() const {
    double m = 0.0;
    for (const auto& row : linearity_residual)
        for (double v : row) m = std::max(m, v);
    return m;
}

double GradientReport::backbone_norm_ratio() const {
    if (at_mu.empty()) return 1.0;
    double lo = INFINITY, hi = 0.0;
    for (const auto& g : at_mu) {
        const double n = backbone_norm(g);
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    return lo > 0.0 ? hi / lo : INFINITY;
}

double GradientReport::backbone_mu_spread() const {
    double m = 0.0;
    for (std::size_t a = 0; a < at_mu.size(); ++a)
        for (std::size_t b = a + 1; b < at_mu.size(); ++b)
            for (std::size_t r = 0; r < kRoleCount; ++r) {
                if (!is_backbone(r)) continue;
                for (std::size_t k = 0; k < at_mu[a].flat[r].size(); ++k)
                    m = std::max(m, std::abs(at_mu[a].flat[r][k] - at_mu[b].flat[r][k]));
            }
    return m;
}

}  // namespace bbnas::bbn
