#include "bbnas/train/bilevel.hpp"

#include <algorithm>
#include <cmath>

#include "bbnas/common/error.hpp"

namespace bbnas::train {

namespace {

using ad::Parameter;

void clear_grads(const std::vector<Parameter*>& a, const std::vector<Parameter*>& b) {
    for (auto* p : a) p->value().clear_grad();
    for (auto* p : b) p->value().clear_grad();
}

std::vector<std::vector<double>> take_grads(const std::vector<Parameter*>& ps) {
    std::vector<std::vector<double>> out;
    out.reserve(ps.size());
    for (auto* p : ps) {
        const auto& t = p->value();
        if (t.has_grad()) {
            auto g = t.grad();
            out.emplace_back(g.begin(), g.end());
        } else {
            out.emplace_back(t.size(), 0.0);
        }
    }
    return out;
}

double checked_backward(const ad::Tensor& loss, const char* what) {
    const double v = loss.item();
    require(std::isfinite(v), ErrorKind::numeric, std::string(what) + " loss is not finite");
    ad::backward(loss);
    return v;
}

// w = base + s * dir, written into the live parameters.
void set_weights(const std::vector<Parameter*>& ws, const std::vector<std::vector<double>>& base,
                 double s, const std::vector<std::vector<double>>& dir) {
    for (std::size_t i = 0; i < ws.size(); ++i) {
        auto v = ws[i]->value().mutable_data();
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = base[i][k] + s * dir[i][k];
    }
}

void restore(const std::vector<Parameter*>& ws, const std::vector<std::vector<double>>& saved) {
    for (std::size_t i = 0; i < ws.size(); ++i) {
        auto v = ws[i]->value().mutable_data();
        std::copy(saved[i].begin(), saved[i].end(), v.begin());
    }
}

}  // namespace

ArchGradient arch_gradient(BilevelObjective& obj, ArchOrder order, double xi_w) {
    const auto ws = obj.weight_params();
    const auto as = obj.arch_params();
    clear_grads(ws, as);
    ArchGradient out;

    if (order == ArchOrder::first) {
        out.val_loss = checked_backward(obj.val_loss(), "validation");
        out.grads = take_grads(as);
        clear_grads(ws, as);
        return out;
    }

    std::vector<std::vector<double>> saved;
    saved.reserve(ws.size());
    for (auto* p : ws) {
        auto d = p->value().data();
        saved.emplace_back(d.begin(), d.end());
    }

    checked_backward(obj.train_loss(), "training");
    const auto g_train = take_grads(ws);
    clear_grads(ws, as);

    try {
        set_weights(ws, saved, -xi_w, g_train);
        out.val_loss = checked_backward(obj.val_loss(), "validation");
        out.grads = take_grads(as);
        const auto dw = take_grads(ws);
        clear_grads(ws, as);

        double sq = 0.0;
        for (const auto& g : dw)
            for (double x : g) sq += x * x;
        out.val_weight_grad_norm = std::sqrt(sq);

        if (out.val_weight_grad_norm > 0.0 && xi_w != 0.0) {
            const double eps = 0.01 / out.val_weight_grad_norm;
            set_weights(ws, saved, eps, dw);
            checked_backward(obj.train_loss(), "training");
            const auto gp = take_grads(as);
            clear_grads(ws, as);
            set_weights(ws, saved, -eps, dw);
            checked_backward(obj.train_loss(), "training");
            const auto gm = take_grads(as);
            clear_grads(ws, as);
            for (std::size_t i = 0; i < out.grads.size(); ++i)
                for (std::size_t k = 0; k < out.grads[i].size(); ++k)
                    out.grads[i][k] -= xi_w * (gp[i][k] - gm[i][k]) / (2.0 * eps);
        } else {
            out.correction_skipped = true;
        }
    } catch (...) {
        restore(ws, saved);
        clear_grads(ws, as);
        throw;
    }

    restore(ws, saved);
    return out;
}

}  // namespace bbnas::train
