#include <cstdio>

#include "bbnas/autodiff/gradcheck.hpp"
#include "bbnas/autodiff/ops.hpp"
#include "bbnas/bbn/model.hpp"
#include "bbnas/harness/commands.hpp"
#include "bbnas/nas/cell.hpp"

namespace bbnas::harness {

namespace {

using ad::Tensor;

constexpr double kH = 1e-5;

Tensor randn(ad::Shape shape, Rng& rng, bool grad = true) {
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = rng.normal();
    return Tensor::from(std::move(shape), std::move(v), grad);
}

// Contract an output with fixed random weights so every coordinate matters.
Tensor probe(const Tensor& out, const Tensor& r) { return ad::sum(ad::mul(out, r)); }

struct Suite {
    Rng rng;
    GradcheckReport report;

    explicit Suite(std::uint64_t seed) : rng(seed) {}

    void run(const std::string& name, const std::function<Tensor()>& loss,
             const std::vector<Tensor>& leaves, std::size_t coords = 0) {
        const auto r = ad::gradcheck(name, loss, leaves, coords, kH, rng);
        report.max_rel_err = std::max(report.max_rel_err, r.max_rel_err);
        char line[160];
        std::snprintf(line, sizeof line, "%-28s coords=%-4zu max_rel_err=%.3e\n", name.c_str(),
                      r.coords, r.max_rel_err);
        report.text += line;
    }

    // out = f(inputs); loss = sum(out * R)
    void unary(const std::string& name, ad::Shape in, const std::function<Tensor(const Tensor&)>& f) {
        Tensor x = randn(in, rng);
        Tensor r = randn(f(x.detach()).shape(), rng, false);
        run(name, [&] { return probe(f(x), r); }, {x});
    }
};

}  // namespace

GradcheckReport gradcheck_suite(std::uint64_t seed) {
    Suite s(seed);

    s.unary("relu", {3, 5}, [](const Tensor& x) { return ad::relu(x); });
    s.unary("scale", {3, 5}, [](const Tensor& x) { return ad::scale(x, -1.7); });
    s.unary("add_scalar", {4}, [](const Tensor& x) { return ad::add_scalar(x, 0.3); });
    s.unary("softmax_axis1", {3, 4}, [](const Tensor& x) { return ad::softmax(x, 1); });
    s.unary("softmax_axis0", {3, 4}, [](const Tensor& x) { return ad::softmax(x, 0); });
    s.unary("mean", {2, 3}, [](const Tensor& x) { return ad::mean(x); });
    s.unary("slice_rows", {4, 3}, [](const Tensor& x) { return ad::slice_rows(x, 1, 3); });
    s.unary("select_row", {4, 3}, [](const Tensor& x) { return ad::select_row(x, 2); });
    s.unary("reshape", {2, 6}, [](const Tensor& x) { return ad::reshape(x, {3, 4}); });
    s.unary("max_pool2d", {2, 2, 4, 4}, [](const Tensor& x) { return ad::max_pool2d(x, 2); });
    s.unary("avg_pool2d", {2, 2, 4, 4}, [](const Tensor& x) { return ad::avg_pool2d(x, 2); });
    s.unary("max_pool_3x3_pad1", {1, 2, 5, 5}, [](const Tensor& x) { return ad::max_pool(x, 3, 1, 1); });
    s.unary("avg_pool_3x3_s2", {1, 2, 5, 5}, [](const Tensor& x) { return ad::avg_pool(x, 3, 2, 1); });
    s.unary("global_avg_pool", {2, 3, 3, 3}, [](const Tensor& x) { return ad::global_avg_pool(x); });

    {
        Tensor a = randn({3, 4}, s.rng), b = randn({3, 4}, s.rng), r = randn({3, 4}, s.rng, false);
        s.run("add", [&] { return probe(ad::add(a, b), r); }, {a, b});
        s.run("sub", [&] { return probe(ad::sub(a, b), r); }, {a, b});
        s.run("mul", [&] { return probe(ad::mul(a, b), r); }, {a, b});
    }
    {
        Tensor a = randn({2, 3}, s.rng), b = randn({2, 5}, s.rng), r = randn({2, 8}, s.rng, false);
        s.run("concat_axis1", [&] {
            const Tensor parts[] = {a, b};
            return probe(ad::concat(parts, 1), r);
        }, {a, b});
    }
    {
        Tensor x = randn({4, 5}, s.rng), w = randn({3, 5}, s.rng), b = randn({3}, s.rng);
        Tensor r = randn({4, 3}, s.rng, false);
        s.run("linear", [&] { return probe(ad::linear(x, w, b), r); }, {x, w, b});
    }
    {
        Tensor t0 = randn({2, 3}, s.rng), t1 = randn({2, 3}, s.rng), t2 = randn({2, 3}, s.rng);
        Tensor w = randn({3}, s.rng), r = randn({2, 3}, s.rng, false);
        s.run("weighted_sum", [&] {
            const Tensor terms[] = {t0, t1, t2};
            return probe(ad::weighted_sum(terms, w), r);
        }, {t0, t1, t2, w});
    }
    {
        Tensor x = randn({2, 2, 5, 5}, s.rng), f = randn({3, 2, 3, 3}, s.rng), b = randn({3}, s.rng);
        ad::Conv2dOptions o;
        o.stride = 2;
        o.padding = 1;
        Tensor r = randn(ad::conv2d(x.detach(), f.detach(), b.detach(), o).shape(), s.rng, false);
        s.run("conv2d_s2_p1", [&] { return probe(ad::conv2d(x, f, b, o), r); }, {x, f, b});
    }
    {
        Tensor x = randn({1, 4, 6, 6}, s.rng), f = randn({4, 2, 3, 3}, s.rng);
        ad::Conv2dOptions o;
        o.padding = 2;
        o.dilation = 2;
        o.groups = 2;
        Tensor r = randn(ad::conv2d(x.detach(), f.detach(), std::nullopt, o).shape(), s.rng, false);
        s.run("conv2d_dil2_groups2", [&] { return probe(ad::conv2d(x, f, std::nullopt, o), r); }, {x, f});
    }
    {
        Tensor br = randn({1, 4, 2, 2}, s.rng), x = randn({1, 2, 4, 4}, s.rng), p = randn({4, 2, 1, 1}, s.rng);
        Tensor r = randn({1, 4, 2, 2}, s.rng, false);
        s.run("residual_add_projection", [&] { return probe(ad::residual_add(br, x, p, 2), r); }, {br, x, p});
        Tensor y = randn({1, 4, 2, 2}, s.rng);
        s.run("residual_add_identity", [&] { return probe(ad::residual_add(br, y), r); }, {br, y});
    }
    {
        Tensor z = randn({4, 3}, s.rng);
        const std::vector<int> y{0, 2, 1, 2};
        s.run("cross_entropy", [&] { return ad::cross_entropy(z, y); }, {z});
    }
    {
        ad::ParameterStore store;
        Rng init(derive_seed(seed, 3));
        nas::ParamFactory fac(store, init);
        nas::CellSpec spec;
        spec.n_nodes = 5;
        spec.width = 3;
        spec.reduction = true;
        nas::Cell cell(spec, nas::OpSet::full(), 2, 2, false, fac, "c", ad::Role::backbone_weight);
        Tensor s0 = randn({1, 2, 4, 4}, s.rng), s1 = randn({1, 2, 4, 4}, s.rng);
        Tensor alpha = randn({spec.n_edges(), nas::OpSet::full().size()}, s.rng);
        Tensor r = randn(cell.forward(s0.detach(), s1.detach(), alpha.detach()).shape(), s.rng, false);
        std::vector<Tensor> leaves{s0, s1, alpha};
        for (auto* p : store.all()) leaves.push_back(p->value());
        s.run("cell_full_reduction", [&] { return probe(cell.forward(s0, s1, alpha), r); }, leaves, 40);
    }

    for (std::uint64_t k = 0; k < 3; ++k) {
        const std::uint64_t sd = seed + k;
        Rng rng(derive_seed(sd, 5));
        bbn::ModelConfig mc;
        mc.in_channels = 1;
        mc.image_size = 8;
        mc.num_classes = 3;
        mc.layers = 4;
        mc.width = 8;
        mc.n_nodes = 5;
        mc.seed = sd;
        bbn::BBNModel model(mc);
        Tensor xi = randn({4, 1, 8, 8}, rng, false), xc = randn({4, 1, 8, 8}, rng, false);
        std::vector<int> yi, yc;
        for (int i = 0; i < 4; ++i) {
            yi.push_back(static_cast<int>(rng.below(3)));
            yc.push_back(static_cast<int>(rng.below(3)));
        }
        const double mu = rng.uniform();
        std::vector<Tensor> leaves;
        for (auto* p : model.params().all()) leaves.push_back(p->value());
        auto loss = [&] {
            const auto lg = model.forward(xi, xc, mu);
            return bbn::bbn_loss(lg.mixed, yi, yc, mu);
        };
        s.run("desk_supernet_seed" + std::to_string(sd), loss, leaves, 20);
        std::vector<Tensor> alphas;
        for (auto* p : model.params().arch()) alphas.push_back(p->value());
        s.run("desk_supernet_alpha_seed" + std::to_string(sd), loss, alphas, 20);
    }

    char tail[96];
    std::snprintf(tail, sizeof tail, "max_rel_err=%.3e\n", s.report.max_rel_err);
    s.report.text += tail;
    return s.report;
}

}  // namespace bbnas::harness
