#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "support/fd.hpp"
#include "bbnas/autodiff/gradcheck.hpp"
#include "bbnas/autodiff/ops.hpp"
#include "bbnas/autodiff/parameter.hpp"
#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"

using namespace bbnas;
using namespace bbnas::ad;

namespace {

Tensor randn(Shape s, Rng& rng, bool grad = true) {
    std::vector<double> v(numel(s));
    for (auto& x : v) x = rng.normal();
    return Tensor::from(std::move(s), std::move(v), grad);
}

// Checks every coordinate of every leaf against the test-side difference.
double max_fd_error(const std::function<Tensor()>& build, std::vector<Tensor> leaves) {
    for (auto& l : leaves) l.clear_grad();
    backward(build());
    const auto value = [&] {
        NoGradGuard ng;
        return build().item();
    };
    double worst = 0.0;
    for (auto& l : leaves) {
        std::vector<double> g(l.grad().begin(), l.grad().end());
        for (std::size_t i = 0; i < l.size(); ++i)
            worst = std::max(worst, fd::rel_err(g[i], fd::partial(value, l, i)));
    }
    return worst;
}

// Direct loop convolution, no padding tricks shared with the library.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, std::size_t stride,
                               std::size_t pad, std::size_t dil, std::size_t groups) {
    const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto F = w.dim(0), Cg = w.dim(1), K = w.dim(2);
    const auto Ho = (H + 2 * pad - dil * (K - 1) - 1) / stride + 1;
    const auto Wo = (W + 2 * pad - dil * (K - 1) - 1) / stride + 1;
    const auto Fg = F / groups;
    std::vector<double> out(N * F * Ho * Wo, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                    double acc = 0.0;
                    const auto g = f / Fg;
                    for (std::size_t c = 0; c < Cg; ++c)
                        for (std::size_t ky = 0; ky < K; ++ky)
                            for (std::size_t kx = 0; kx < K; ++kx) {
                                const long iy = long(oy * stride + ky * dil) - long(pad);
                                const long ix = long(ox * stride + kx * dil) - long(pad);
                                if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) continue;
                                const auto ci = g * Cg + c;
                                acc += x.at(((n * C + ci) * H + iy) * W + ix) *
                                       w.at(((f * Cg + c) * K + ky) * K + kx);
                            }
                    out[((n * F + f) * Ho + oy) * Wo + ox] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("elementwise gradients by hand") {
    auto a = Tensor::from({3}, {1.0, -2.0, 3.0}, true);
    auto b = Tensor::from({3}, {4.0, 5.0, -6.0}, true);
    backward(sum(mul(add(a, b), a)));  // sum((a+b)*a) -> d/da = 2a+b, d/db = a
    CHECK(a.grad()[0] == doctest::Approx(6.0));
    CHECK(a.grad()[1] == doctest::Approx(1.0));
    CHECK(a.grad()[2] == doctest::Approx(0.0));
    CHECK(b.grad()[1] == doctest::Approx(-2.0));
}

TEST_CASE("relu gradient is zero on the negative side") {
    auto a = Tensor::from({4}, {-1.0, 0.5, -0.25, 2.0}, true);
    backward(sum(relu(a)));
    CHECK(a.grad()[0] == 0.0);
    CHECK(a.grad()[1] == 1.0);
    CHECK(a.grad()[2] == 0.0);
    CHECK(a.grad()[3] == 1.0);
}

TEST_CASE("shared leaf accumulates from every use") {
    auto x = Tensor::from({1}, {3.0}, true);
    backward(sum(add(mul(x, x), scale(x, 2.0))));  // x^2 + 2x
    CHECK(x.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("backward consumes the graph") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    auto loss = sum(mul(x, x));
    backward(loss);
    CHECK_THROWS_AS(backward(loss), Error);
}

TEST_CASE("backward needs a scalar") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(scale(x, 2.0)), Error);
}

TEST_CASE("no-grad guard records nothing") {
    auto x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor y;
    {
        NoGradGuard ng;
        CHECK_FALSE(grad_enabled());
        y = mul(x, x);
    }
    CHECK(grad_enabled());
    CHECK_FALSE(y.requires_grad());
    CHECK(y.at(1) == 4.0);
}

TEST_CASE("shape mismatch is rejected") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(add(a, b), Error);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), Error);
}

TEST_CASE("softmax rows sum to one and ignore shifts") {
    Rng rng(3);
    auto x = randn({4, 5}, rng, false);
    auto p = softmax(x, 1);
    std::vector<double> shifted(x.data().begin(), x.data().end());
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 5; ++c) shifted[r * 5 + c] += 100.0 * double(r + 1);
    auto q = softmax(Tensor::from({4, 5}, shifted), 1);
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 5; ++c) {
            s += p.at(r * 5 + c);
            CHECK(std::abs(p.at(r * 5 + c) - q.at(r * 5 + c)) < 1e-12);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("cross entropy against the scalar formula") {
    Rng rng(5);
    auto z = randn({3, 4}, rng, false);
    const std::vector<int> y{2, 0, 3};
    double expect = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
        double m = -1e300;
        for (std::size_t c = 0; c < 4; ++c) m = std::max(m, z.at(r * 4 + c));
        double s = 0.0;
        for (std::size_t c = 0; c < 4; ++c) s += std::exp(z.at(r * 4 + c) - m);
        expect += -(z.at(r * 4 + y[r]) - m - std::log(s));
    }
    expect /= 3.0;
    CHECK(cross_entropy(z, y).item() == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
    auto z = Tensor::zeros({2, 3});
    const std::vector<int> bad{0, 3};
    CHECK_THROWS_AS(cross_entropy(z, bad), Error);
}

TEST_CASE("conv2d forward matches direct loops") {
    Rng rng(7);
    struct Case {
        std::size_t C, F, K, stride, pad, dil, groups;
    };
    for (const Case c : {Case{2, 3, 3, 1, 1, 1, 1}, Case{2, 4, 3, 2, 1, 1, 1},
                         Case{4, 4, 3, 1, 2, 2, 4}, Case{4, 2, 1, 1, 0, 1, 2},
                         Case{3, 3, 5, 1, 2, 1, 3}}) {
        auto x = randn({2, c.C, 6, 6}, rng, false);
        auto w = randn({c.F, c.C / c.groups, c.K, c.K}, rng, false);
        auto y = conv2d(x, w, std::nullopt, {c.stride, c.pad, c.dil, c.groups});
        const auto ref = naive_conv(x, w, c.stride, c.pad, c.dil, c.groups);
        REQUIRE(y.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y.at(i) - ref[i]) < 1e-12);
    }
}

TEST_CASE("pooling values") {
    auto x = Tensor::from({1, 1, 2, 2}, {1.0, 5.0, -3.0, 2.0});
    CHECK(max_pool2d(x, 2).item() == 5.0);
    CHECK(avg_pool2d(x, 2).item() == doctest::Approx(1.25));
    // 3x3 window, stride 1, pad 1: padded cells are excluded from the average
    auto a = avg_pool(x, 3, 1, 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.at(i) == doctest::Approx(1.25));
    auto m = max_pool(Tensor::from({1, 1, 2, 2}, {-1.0, -2.0, -3.0, -4.0}), 3, 1, 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(m.at(i) == -1.0);  // padding never wins
}

TEST_CASE("finite differences agree for every operator") {
    Rng rng(11);
    const double tol = 1e-4;

    SUBCASE("arithmetic and reductions") {
        auto a = randn({2, 3}, rng), b = randn({2, 3}, rng);
        CHECK(max_fd_error([&] { return mean(mul(sub(a, b), add_scalar(a, 0.3))); }, {a, b}) < tol);
    }
    SUBCASE("softmax") {
        auto a = randn({3, 4}, rng), w = randn({3, 4}, rng, false);
        CHECK(max_fd_error([&] { return sum(mul(softmax(a, 1), w)); }, {a}) < tol);
        CHECK(max_fd_error([&] { return sum(mul(softmax(a, 0), w)); }, {a}) < tol);
    }
    SUBCASE("linear and cross entropy") {
        auto x = randn({4, 3}, rng), w = randn({5, 3}, rng), b = randn({5}, rng);
        const std::vector<int> y{0, 4, 2, 2};
        CHECK(max_fd_error([&] { return cross_entropy(linear(x, w, b), y); }, {x, w, b}) < tol);
    }
    SUBCASE("concat, slice, select, reshape") {
        auto a = randn({2, 3}, rng), b = randn({1, 3}, rng), w = randn({3}, rng, false);
        CHECK(max_fd_error(
                  [&] {
                      std::vector<Tensor> parts{a, b};
                      auto c = concat(parts, 0);
                      auto s = slice_rows(c, 1, 3);
                      return sum(mul(select_row(reshape(s, {2, 3}), 1), w));
                  },
                  {a, b}) < tol);
    }
    SUBCASE("weighted sum") {
        auto t0 = randn({2, 2}, rng), t1 = randn({2, 2}, rng), wts = randn({2}, rng);
        CHECK(max_fd_error(
                  [&] {
                      std::vector<Tensor> terms{t0, t1};
                      return sum(mul(weighted_sum(terms, wts), t0));
                  },
                  {t0, t1, wts}) < tol);
    }
    SUBCASE("convolutions") {
        auto x = randn({2, 4, 5, 5}, rng);
        auto w = randn({4, 1, 3, 3}, rng), b = randn({4}, rng);
        auto w2 = randn({3, 4, 3, 3}, rng), b2 = randn({3}, rng);
        auto r = randn({2, 3, 3, 3}, rng, false);
        CHECK(max_fd_error([&] { return mean(mul(conv2d(x, w2, b2, {2, 1, 1, 1}), r)); },
                           {x, w2, b2}) < tol);
        CHECK(max_fd_error([&] { return mean(relu(conv2d(x, w, b, {1, 2, 2, 4}))); }, {x, w, b}) < tol);
    }
    SUBCASE("pooling") {
        auto x = randn({1, 2, 4, 4}, rng);
        auto r = randn({1, 2, 2, 2}, rng, false);
        auto r4 = randn({1, 2, 4, 4}, rng, false);
        auto r2 = randn({1, 2}, rng, false);
        CHECK(max_fd_error([&] { return sum(mul(max_pool2d(x, 2), r)); }, {x}) < tol);
        CHECK(max_fd_error([&] { return sum(mul(avg_pool2d(x, 2), r)); }, {x}) < tol);
        CHECK(max_fd_error([&] { return sum(mul(max_pool(x, 3, 1, 1), r4)); }, {x}) < tol);
        CHECK(max_fd_error([&] { return sum(mul(avg_pool(x, 3, 2, 1), r)); }, {x}) < tol);
        CHECK(max_fd_error([&] { return sum(mul(global_avg_pool(x), r2)); }, {x}) < tol);
    }
    SUBCASE("residual with projection") {
        auto br = randn({1, 3, 2, 2}, rng), x = randn({1, 2, 4, 4}, rng);
        auto p = randn({3, 2, 1, 1}, rng);
        auto r = randn({1, 3, 2, 2}, rng, false);
        CHECK(max_fd_error([&] { return sum(mul(residual_add(br, x, p, 2), r)); }, {br, x, p}) < tol);
    }
}

TEST_CASE("library gradcheck agrees with a closed form") {
    Rng rng(1);
    auto x = randn({5}, rng);
    auto r = gradcheck("square", [&] { return sum(mul(x, x)); }, {x}, 0, 1e-5, rng);
    CHECK(r.coords == 5);
    CHECK(r.max_rel_err < 1e-8);
}

TEST_CASE("relative error floor") {
    CHECK(relative_error(0.0, 0.0) == 0.0);
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("sgd with momentum follows the hand recurrence") {
    ParameterStore store;
    auto& p = store.add("w", Role::backbone_weight, Tensor::from({2}, {1.0, -1.0}, true));
    const SgdOptions opts{0.1, 0.9, 0.01};
    double w0 = 1.0, w1 = -1.0, v0 = 0.0, v1 = 0.0;
    for (int step = 0; step < 5; ++step) {
        backward(sum(mul(p.value(), p.value())));  // grad = 2w
        sgd_step({&p}, opts);
        v0 = 0.9 * v0 + 2 * w0 + 0.01 * w0;
        v1 = 0.9 * v1 + 2 * w1 + 0.01 * w1;
        w0 -= 0.1 * v0;
        w1 -= 0.1 * v1;
        CHECK(p.value().at(0) == doctest::Approx(w0).epsilon(1e-14));
        CHECK(p.value().at(1) == doctest::Approx(w1).epsilon(1e-14));
        CHECK_FALSE(p.value().has_grad());
    }
}

TEST_CASE("sgd skips parameters without a gradient") {
    ParameterStore store;
    auto& a = store.add("a", Role::arch_bb, Tensor::from({1}, {2.0}, true));
    auto& b = store.add("b", Role::arch_ins, Tensor::from({1}, {3.0}, true));
    backward(sum(a.value()));
    const auto rep = sgd_step({&a, &b}, {0.5, 0.9, 0.0});
    CHECK(rep.updated == 1);
    CHECK(rep.skipped_without_grad == 1);
    CHECK(b.value().at(0) == 3.0);
    CHECK(b.momentum()[0] == 0.0);
}

TEST_CASE("roles") {
    CHECK(is_arch(Role::arch_cls));
    CHECK_FALSE(is_arch(Role::head_cls_weight));
    ParameterStore s;
    s.add("x", Role::arch_bb, Tensor::zeros({1}, true));
    s.add("y", Role::backbone_weight, Tensor::zeros({1}, true));
    CHECK(s.arch().size() == 1);
    CHECK(s.weights().size() == 1);
    CHECK(s.find("y") != nullptr);
    CHECK(s.find("z") == nullptr);
}

TEST_CASE("rng state round trip and stream separation") {
    Rng a(42);
    a.next_u64();
    Rng b(0);
    b.set_state(a.state());
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(derive_seed(1, 10) != derive_seed(1, 11));
    CHECK(derive_seed(1, 10) == derive_seed(1, 10));
}
