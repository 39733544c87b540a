#include "bbnas/bbn/model.hpp"

#include <cmath>

#include "bbnas/autodiff/ops.hpp"
#include "bbnas/common/error.hpp"

namespace bbnas::bbn {

using ad::Role;

bool is_reduction_layer(std::size_t layer, std::size_t layers) {
    return layer == layers / 3 || layer == 2 * layers / 3;
}

void check_mu(double mu) {
    require(mu >= 0.0 && mu <= 1.0, ErrorKind::invalid_argument,
            "mixing ratio " + std::to_string(mu) + " outside [0,1]");
}

BBNModel::BBNModel(const ModelConfig& cfg) : cfg_(cfg) {
    require(cfg.layers >= 1 && cfg.width >= 1 && cfg.num_classes >= 2 && cfg.in_channels >= 1,
            ErrorKind::invalid_argument, "model: layers, width, channels must be positive and classes >= 2");
    require(cfg.n_nodes >= 4, ErrorKind::invalid_argument, "model: cells need at least 4 nodes");
    Rng rng(cfg.seed);
    nas::ParamFactory f(store_, rng);

    stem_w_ = &f.conv("stem.w", Role::backbone_weight, cfg.width, cfg.in_channels, 3);
    stem_b_ = &f.zeros("stem.b", Role::backbone_weight, {cfg.width});

    std::size_t c_pp = cfg.width, c_p = cfg.width, c_cur = cfg.width;
    bool reduction_prev = false;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        nas::CellSpec spec;
        spec.n_nodes = cfg.n_nodes;
        spec.reduction = is_reduction_layer(i, cfg.layers);
        if (spec.reduction) c_cur *= 2;
        spec.width = c_cur;
        cells_.emplace_back(spec, cfg.ops, c_pp, c_p, reduction_prev, f,
                            "bb.cell" + std::to_string(i), Role::backbone_weight);
        reduction_prev = spec.reduction;
        c_pp = c_p;
        c_p = spec.out_channels();
    }

    nas::CellSpec head_spec;
    head_spec.n_nodes = cfg.n_nodes;
    head_spec.reduction = false;
    head_spec.width = c_cur;
    const std::size_t feat = head_spec.out_channels();
    auto make_head = [&](Head& h, const std::string& prefix, Role role) {
        h.cell = std::make_unique<nas::Cell>(head_spec, cfg.ops, c_pp, c_p, reduction_prev, f,
                                             prefix + ".cell", role);
        h.fc_w = &f.normal(prefix + ".fc.w", role, {cfg.num_classes, feat},
                           1.0 / std::sqrt(static_cast<double>(feat)));
        h.fc_b = &f.zeros(prefix + ".fc.b", role, {cfg.num_classes});
    };
    make_head(ins_, "ins", Role::head_ins_weight);
    make_head(cls_, "cls", Role::head_cls_weight);

    const std::size_t E = head_spec.n_edges(), K = cfg.ops.size();
    alpha_bb_normal_ = &f.normal("alpha.bb_normal", Role::arch_bb, {E, K}, 1e-3);
    alpha_bb_reduce_ = &f.normal("alpha.bb_reduce", Role::arch_bb, {E, K}, 1e-3);
    alpha_ins_ = &f.normal("alpha.ins", Role::arch_ins, {E, K}, 1e-3);
    alpha_cls_ = &f.normal("alpha.cls", Role::arch_cls, {E, K}, 1e-3);
}

BBNModel::Features BBNModel::backbone(const Tensor& x) const {
    require(x.rank() == 4 && x.dim(1) == cfg_.in_channels, ErrorKind::shape_mismatch,
            "model: input " + ad::to_string(x.shape()) + " does not have " +
                std::to_string(cfg_.in_channels) + " channels");
    ad::Conv2dOptions o;
    o.padding = 1;
    Tensor s = ad::conv2d(x, stem_w_->value(), stem_b_->value(), o);
    Features f{s, s};
    for (const auto& cell : cells_) {
        const Tensor& alpha =
            cell.spec().reduction ? alpha_bb_reduce_->value() : alpha_bb_normal_->value();
        Tensor out = cell.forward(f.prev_prev, f.prev, alpha);
        f.prev_prev = f.prev;
        f.prev = out;
    }
    return f;
}

Tensor BBNModel::head_forward(const Head& head, const Parameter& alpha, const Features& f) const {
    Tensor h = head.cell->forward(f.prev_prev, f.prev, alpha.value());
    return ad::linear(ad::global_avg_pool(h), head.fc_w->value(), head.fc_b->value());
}

Logits BBNModel::forward(const Tensor& batch_ins, const Tensor& batch_cls, double mu) const {
    check_mu(mu);
    require(batch_ins.shape() == batch_cls.shape(), ErrorKind::shape_mismatch,
            "model: instance batch " + ad::to_string(batch_ins.shape()) +
                " and class batch " + ad::to_string(batch_cls.shape()) + " differ");
    const std::size_t b = batch_ins.dim(0);
    const Tensor both[] = {batch_ins, batch_cls};
    Features f = backbone(ad::concat(both, 0));
    Features fi{ad::slice_rows(f.prev_prev, 0, b), ad::slice_rows(f.prev, 0, b)};
    Features fc{ad::slice_rows(f.prev_prev, b, 2 * b), ad::slice_rows(f.prev, b, 2 * b)};
    Logits out;
    out.o_ins = head_forward(ins_, *alpha_ins_, fi);
    out.o_cls = head_forward(cls_, *alpha_cls_, fc);
    out.mixed = ad::add(ad::scale(out.o_ins, mu), ad::scale(out.o_cls, 1.0 - mu));
    return out;
}

Tensor BBNModel::forward_single(const Tensor& batch) const {
    return head_forward(ins_, *alpha_ins_, backbone(batch));
}

HeadLogits BBNModel::heads(const Tensor& batch) const {
    Features f = backbone(batch);
    return {head_forward(ins_, *alpha_ins_, f), head_forward(cls_, *alpha_cls_, f)};
}

nas::Genotype BBNModel::genotype() const {
    return nas::derive_genotype(alpha_bb_normal_->value().data(), alpha_bb_reduce_->value().data(),
                                alpha_ins_->value().data(), alpha_cls_->value().data(),
                                cfg_.n_nodes - 3, cfg_.ops);
}

void BBNModel::clone_ins_head_into_cls() {
    for (std::size_t i = 0; i < store_.size(); ++i) {
        Parameter& p = store_[i];
        if (p.role() != Role::head_ins_weight) continue;
        Parameter* twin = store_.find("cls" + p.name().substr(3));
        require(twin != nullptr, ErrorKind::state, "model: no cls twin for " + p.name());
        auto src = p.value().data();
        std::copy(src.begin(), src.end(), twin->value().mutable_data().begin());
    }
    auto a = alpha_ins_->value().data();
    std::copy(a.begin(), a.end(), alpha_cls_->value().mutable_data().begin());
}

Tensor bbn_loss(const Tensor& mixed_logits, std::span<const int> y_ins,
                std::span<const int> y_cls, double mu) {
    check_mu(mu);
    return ad::add(ad::scale(ad::cross_entropy(mixed_logits, y_ins), mu),
                   ad::scale(ad::cross_entropy(mixed_logits, y_cls), 1.0 - mu));
}

Tensor decomposed_loss(const Tensor& o_ins, const Tensor& o_cls, std::span<const int> y_ins,
                       std::span<const int> y_cls, double mu) {
    check_mu(mu);
    return ad::add(ad::scale(ad::cross_entropy(o_ins, y_ins), mu),
                   ad::scale(ad::cross_entropy(o_cls, y_cls), 1.0 - mu));
}

std::string_view loss_form_name(LossForm form) {
    return form == LossForm::mixed_logits ? "mixed" : "decomposed";
}

LossForm parse_loss_form(std::string_view name) {
    if (name == "mixed") return LossForm::mixed_logits;
    if (name == "decomposed") return LossForm::decomposed;
    fail(ErrorKind::invalid_argument, "unknown loss form '" + std::string(name) + "'");
}

Tensor training_loss(const Logits& logits, std::span<const int> y_ins,
                     std::span<const int> y_cls, double mu, LossForm form) {
    return form == LossForm::mixed_logits ? bbn_loss(logits.mixed, y_ins, y_cls, mu)
                                          : decomposed_loss(logits.o_ins, logits.o_cls, y_ins, y_cls, mu);
}

std::vector<Prediction> mix_and_predict(const HeadLogits& logits, double mu) {
    check_mu(mu);
    const std::size_t n = logits.ins.dim(0), c = logits.ins.dim(1);
    auto a = logits.ins.data(), b = logits.cls.data();
    std::vector<Prediction> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& pr = out[i];
        pr.probs.resize(c);
        double m = -INFINITY;
        for (std::size_t k = 0; k < c; ++k) {
            pr.probs[k] = mu * a[i * c + k] + (1.0 - mu) * b[i * c + k];
            m = std::max(m, pr.probs[k]);
        }
        double z = 0.0;
        for (auto& v : pr.probs) {
            v = std::exp(v - m);
            z += v;
        }
        for (auto& v : pr.probs) v /= z;
        std::size_t best = 0;
        for (std::size_t k = 1; k < c; ++k)
            if (pr.probs[k] > pr.probs[best]) best = k;
        pr.label = static_cast<int>(best);
    }
    return out;
}

std::vector<Prediction> inference(const BBNModel& model, const Tensor& x, double mu_test) {
    check_mu(mu_test);
    ad::NoGradGuard no_grad;
    return mix_and_predict(model.heads(x), mu_test);
}

}  // namespace bbnas::bbn
