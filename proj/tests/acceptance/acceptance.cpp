// Acceptance suite. One PASS/FAIL line per criterion; pass criterion numbers
// as arguments to run a subset. Exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bbnas/autodiff/ops.hpp"
#include "bbnas/bbn/model.hpp"
#include "bbnas/bbn/probe.hpp"
#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"
#include "bbnas/data/dataset.hpp"
#include "bbnas/data/longtail.hpp"
#include "bbnas/data/sampler.hpp"
#include "bbnas/harness/commands.hpp"
#include "bbnas/nas/genotype.hpp"
#include "bbnas/schedule/schedules.hpp"
#include "bbnas/train/bilevel.hpp"
#include "bbnas/train/config.hpp"
#include "bbnas/train/history.hpp"
#include "bbnas/train/prepare.hpp"
#include "bbnas/train/steps.hpp"
#include "bbnas/train/trainer.hpp"
#include "support/fd.hpp"
#include "support/genotype_oracle.hpp"
#include "support/stats.hpp"
#include "support/toy_bilevel.hpp"

using namespace bbnas;
namespace ad = bbnas::ad;
namespace fs = std::filesystem;
using ad::Role;
using ad::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// BBNAS_ACCEPT_CONFIG_DIR points the training criteria at another desk.cfg.
fs::path desk_config() {
    const char* dir = std::getenv("BBNAS_ACCEPT_CONFIG_DIR");
    return fs::path(dir ? dir : BBNAS_CONFIG_DIR) / "desk.cfg";
}

bbn::ModelConfig desk_model(std::uint64_t seed) {
    bbn::ModelConfig c;
    c.in_channels = 1;
    c.image_size = 8;
    c.num_classes = 3;
    c.layers = 4;
    c.width = 8;
    c.n_nodes = 5;
    c.seed = seed;
    return c;
}

Tensor randn(ad::Shape s, Rng& rng) {
    std::vector<double> v(ad::numel(s));
    for (auto& x : v) x = rng.normal();
    return Tensor::from(std::move(s), std::move(v));
}

bbn::ProbeBatch random_batch(std::size_t n, Rng& rng) {
    auto lab = [&] {
        std::vector<int> y(n);
        for (auto& v : y) v = int(rng.below(3));
        return y;
    };
    auto xi = randn({n, 1, 8, 8}, rng);
    auto yi = lab();
    auto xc = randn({n, 1, 8, 8}, rng);
    return {xi, yi, xc, lab()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("bbnas_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// 1. Gradient correctness
Outcome c1() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto suite = harness::gradcheck_suite(1);
    o.require(suite.max_rel_err < 1e-4, "library suite max rel err " + fmt("%.2e", suite.max_rel_err));
    o.note("library suite max rel err " + fmt("%.2e", suite.max_rel_err));

    // Test-side central differences on the DESK supernet loss.
    double worst = 0.0;
    std::size_t coords = 0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        bbn::BBNModel model(desk_model(seed));
        Rng rng(100 + seed);
        const auto b = random_batch(4, rng);
        const double mu = rng.uniform();
        auto loss = [&] {
            const auto lg = model.forward(b.x_ins, b.x_cls, mu);
            return bbn::bbn_loss(lg.mixed, b.y_ins, b.y_cls, mu);
        };
        model.params().zero_grad();
        ad::backward(loss());
        auto params = model.params().all();
        std::vector<std::size_t> sizes;
        for (auto* p : params) sizes.push_back(p->value().size());
        const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        const auto value = [&] {
            ad::NoGradGuard ng;
            return loss().item();
        };
        for (int k = 0; k < 20; ++k) {
            std::size_t flat = rng.below(total), pi = 0;
            while (flat >= sizes[pi]) flat -= sizes[pi++];
            Tensor& leaf = params[pi]->value();
            const double analytic = leaf.has_grad() ? leaf.grad()[flat] : 0.0;
            worst = std::max(worst, fd::rel_err(analytic, fd::partial(value, leaf, flat, 1e-5)));
            ++coords;
        }
    }
    o.require(worst < 1e-4, "supernet max rel err " + fmt("%.2e", worst));
    o.note("supernet " + std::to_string(coords) + " coords max rel err " + fmt("%.2e", worst));
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "runtime " + fmt("%.1f s", secs));
    return o;
}

// 2. Theorem-1 suite
Outcome c2() {
    Outcome o;
    const auto t0 = Clock::now();
    const std::vector<double> mus{0.1, 0.25, 0.5, 0.75, 0.9};
    const auto idx = [](Role r) { return static_cast<std::size_t>(r); };
    double lin = 0.0, lin_mixed = 0.0, spread = 0.0;
    bool zeros = true;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        bbn::BBNModel m(desk_model(seed));
        Rng rng(200 + seed);
        auto b = random_batch(8, rng);

        // (a) g(mu) against mu g_ins + (1 - mu) g_cls, computed here
        for (auto form : {bbn::LossForm::decomposed, bbn::LossForm::mixed_logits}) {
            const auto g1 = bbn::gradients_at(m, b, 1.0, form);
            const auto g0 = bbn::gradients_at(m, b, 0.0, form);
            double& worst = form == bbn::LossForm::decomposed ? lin : lin_mixed;
            for (double mu : mus) {
                const auto g = bbn::gradients_at(m, b, mu, form);
                for (std::size_t r = 0; r < bbn::kRoleCount; ++r)
                    for (std::size_t i = 0; i < g.flat[r].size(); ++i)
                        worst = std::max(worst, std::abs(g.flat[r][i] - (mu * g1.flat[r][i] +
                                                                         (1 - mu) * g0.flat[r][i])));
            }
            // (c) exact zeros for the head whose coefficient vanishes
            for (double v : g0.flat[idx(Role::head_ins_weight)]) zeros &= v == 0.0;
            for (double v : g0.flat[idx(Role::arch_ins)]) zeros &= v == 0.0;
            for (double v : g1.flat[idx(Role::head_cls_weight)]) zeros &= v == 0.0;
            for (double v : g1.flat[idx(Role::arch_cls)]) zeros &= v == 0.0;
            zeros &= g0.norm[idx(Role::head_cls_weight)] > 0.0 && g1.norm[idx(Role::head_ins_weight)] > 0.0;
        }

        // (b) cloned heads on a shared batch
        m.clone_ins_head_into_cls();
        b.x_cls = b.x_ins;
        b.y_cls = b.y_ins;
        for (auto form : {bbn::LossForm::decomposed, bbn::LossForm::mixed_logits}) {
            const auto ref = bbn::gradients_at(m, b, 0.0, form);
            for (double mu : {0.25, 0.5, 0.75, 1.0}) {
                const auto g = bbn::gradients_at(m, b, mu, form);
                for (Role r : {Role::backbone_weight, Role::arch_bb})
                    for (std::size_t i = 0; i < g.flat[idx(r)].size(); ++i)
                        spread = std::max(spread, std::abs(g.flat[idx(r)][i] - ref.flat[idx(r)][i]));
            }
        }
    }
    o.require(lin < 1e-10, "linearity residual " + fmt("%.2e", lin));
    o.require(spread < 1e-10, "clone backbone spread " + fmt("%.2e", spread));
    o.require(zeros, "gated head gradients not exactly zero");
    o.note("(a) decomposed residual " + fmt("%.2e", lin) + " (mixed-logits form " + fmt("%.2e", lin_mixed) +
           ", not linear)");
    o.note("(b) clone spread " + fmt("%.2e", spread));
    o.note("(c) gating zeros exact");
    const double secs = seconds_since(t0);
    o.require(secs < 30.0, "runtime " + fmt("%.1f s", secs));
    return o;
}

// 3. Schedule values
Outcome c3() {
    Outcome o;
    bool para = true;
    for (double T : {20.0, 50.0, 7.0})
        para &= sched::parabolic_mu(0, T) == 1.0 && sched::parabolic_mu(T, T) == 0.0 &&
                sched::parabolic_mu(T / 2, T) == 0.75;
    o.require(para, "parabolic boundary values");

    Rng rng(3);
    double sym = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double T = 1.0 + 99.0 * rng.uniform(), k = 0.1 + 20.0 * rng.uniform();
        const double t = T * rng.uniform();
        sym = std::max(sym, std::abs(sched::reverse_sigmoid_mu(t, T, k) +
                                     sched::reverse_sigmoid_mu(T - t, T, k) - 1.0));
    }
    o.require(sym < 1e-12, "reverse sigmoid symmetry " + fmt("%.2e", sym));

    double hls = 0.0;
    bool hls0 = true;
    for (double xi0 : {0.02, 0.05, 1.0})
        for (double tau : {1.0, 5.0, 10.0}) {
            const sched::HlsConfig cfg{xi0, tau};
            hls0 &= sched::hls_scale(cfg, 0.0) == 0.0;
            hls = std::max(hls, std::abs(sched::hls_scale(cfg, 1.0) - xi0 * (1.0 - std::exp(-tau))));
        }
    o.require(hls0, "hls_scale(0) != 0");
    o.require(hls < 1e-12, "hls_scale(1) error " + fmt("%.2e", hls));
    o.note("parabolic exact; RS symmetry " + fmt("%.1e", sym) + "; hls(1) error " + fmt("%.1e", hls));
    return o;
}

// 4. Long-tail construction
Outcome c4() {
    Outcome o;
    const data::LongTailSpec spec{100.0, 5000, 10};
    const auto counts = data::longtail_counts(spec);
    bool exact = counts.size() == 10;
    for (std::size_t c = 0; exact && c < 10; ++c)
        exact &= counts[c] == std::size_t(std::floor(5000.0 * std::pow(100.0, -double(c) / 9.0)));
    o.require(exact, "counts differ from floor(5000*100^(-c/9))");
    o.require(counts.size() == 10 && counts[1] == 2997 && counts[9] == 50, "n1 = 2997, n9 = 50");
    o.require(std::is_sorted(counts.rbegin(), counts.rend()), "monotone");

    const auto ds = data::make_synthetic({10, 5000, 2, 1, 0.5, 0});
    const auto m1 = data::longtail_manifest_json(data::build_longtail(ds, spec, 7), spec, 7);
    const auto m2 = data::longtail_manifest_json(data::build_longtail(ds, spec, 7), spec, 7);
    const auto m3 = data::longtail_manifest_json(data::build_longtail(ds, spec, 8), spec, 8);
    o.require(m1 == m2, "manifest not byte-stable");
    o.require(m1 != m3, "manifest ignores the seed");
    o.note("n0..n9 = " + std::to_string(counts[0]) + ".." + std::to_string(counts[9]) +
           ", n1 = " + std::to_string(counts[1]) + "; manifest " + std::to_string(m1.size()) +
           " bytes, stable");
    return o;
}

// 5. Class-balanced sampler
Outcome c5() {
    Outcome o;
    const auto counts = data::longtail_counts({100.0, 500, 10});
    data::LabeledImageSet ds;
    ds.channels = 1;
    ds.height = ds.width = 1;
    ds.num_classes = 10;
    std::vector<std::size_t> start;
    for (std::size_t c = 0; c < 10; ++c) {
        start.push_back(ds.labels.size());
        for (std::size_t i = 0; i < counts[c]; ++i) {
            ds.labels.push_back(int(c));
            ds.pixels.push_back(0.0);
        }
    }
    double min_class_p = 1.0, min_within_p = 1.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        data::BatchSampler s(data::SamplerKind::class_balanced, 100, seed);
        std::vector<double> per_class(10, 0.0);
        std::vector<std::vector<double>> within(10);
        for (std::size_t c = 0; c < 10; ++c) within[c].assign(counts[c], 0.0);
        for (int b = 0; b < 1000; ++b)
            for (auto i : s.draw_indices(ds)) {
                const int y = ds.labels[i];
                per_class[y] += 1;
                within[y][i - start[y]] += 1;
            }
        min_class_p = std::min(min_class_p, oracle::chi_square_p(per_class, std::vector<double>(10, 1e4)));
        for (std::size_t c = 0; c < 10; ++c)
            min_within_p = std::min(
                min_within_p,
                oracle::chi_square_p(within[c], std::vector<double>(counts[c], per_class[c] / counts[c])));
    }
    o.require(min_class_p > 0.01, "class uniformity p = " + fmt("%.4f", min_class_p));
    o.require(min_within_p > 0.01, "within-class uniformity p = " + fmt("%.4f", min_within_p));
    o.note("3 seeds x 100k draws: min class p " + fmt("%.3f", min_class_p) + ", min within-class p " +
           fmt("%.3f", min_within_p));
    return o;
}

// 6. Genotype derivation
Outcome c6() {
    Outcome o;
    Rng rng(6);
    const std::vector<nas::OpSet> sets{nas::OpSet({"zero", "skip", "maxpool3x3"}), nas::OpSet::desk(),
                                       nas::OpSet({"zero", "skip", "conv3x3-relu", "maxpool3x3", "avgpool3x3"})};
    int agree = 0, shift_agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_int = 1 + rng.below(3);
        const auto& ops = sets[rng.below(sets.size())];
        std::vector<double> a(nas::edge_count(n_int) * ops.size());
        for (auto& v : a) v = 2.0 * rng.normal();
        const auto got = nas::derive_cell_genotype(a, n_int, ops);
        agree += got == oracle::brute_force_genotype(a, n_int, ops);
        auto shifted = a;
        for (std::size_t e = 0; e < nas::edge_count(n_int); ++e) {
            const double c = 50.0 * rng.normal();
            for (std::size_t k = 0; k < ops.size(); ++k) shifted[e * ops.size() + k] += c;
        }
        shift_agree += nas::derive_cell_genotype(shifted, n_int, ops) == got;
    }
    o.require(agree == 100, "brute-force agreement " + std::to_string(agree) + "/100");
    o.require(shift_agree == 100, "shifted genotype agreement " + std::to_string(shift_agree) + "/100");

    // Shifting every alpha row leaves the supernet output alone.
    bbn::BBNModel m(desk_model(6));
    Rng r2(66);
    const auto b = random_batch(4, r2);
    const auto before = m.forward(b.x_ins, b.x_cls, 0.4).mixed;
    for (auto* p : m.params().arch()) {
        auto v = p->value().mutable_data();
        const std::size_t K = p->value().dim(1);
        for (std::size_t row = 0; row < v.size() / K; ++row) {
            const double c = 10.0 * r2.normal();
            for (std::size_t k = 0; k < K; ++k) v[row * K + k] += c;
        }
    }
    const auto after = m.forward(b.x_ins, b.x_cls, 0.4).mixed;
    double diff = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) diff = std::max(diff, std::abs(before.at(i) - after.at(i)));
    o.require(diff < 1e-10, "shifted supernet logits differ by " + fmt("%.2e", diff));
    o.note("brute force " + std::to_string(agree) + "/100, shifted genotypes " + std::to_string(shift_agree) +
           "/100, shifted supernet logits " + fmt("%.1e", diff));
    return o;
}

// 7. Smoke training
Outcome c7() {
    Outcome o;
    const auto t0 = Clock::now();
    auto cfg = train::load_config(desk_config());
    cfg.mode = train::Mode::darts_only;
    const auto data = train::prepare_data(cfg);
    const auto res = train::train(cfg, data, {});
    const double secs = seconds_since(t0);
    const double train_acc = res.history.records.back().train_acc;
    const double before = res.initial_test.best_row().accuracy;
    const double after = res.final_test.best_row().accuracy;
    o.require(train_acc >= 0.9, "train accuracy " + fmt("%.3f", train_acc));
    o.require(after - before >= 0.30, "balanced held-out gain " + fmt("%.3f", after - before));
    o.require(secs < 300.0, "runtime " + fmt("%.1f s", secs));
    o.note("train acc " + fmt("%.3f", train_acc) + "; balanced held-out " + fmt("%.3f", before) + " -> " +
           fmt("%.3f", after));
    return o;
}

// 8. HLS ablation trend
Outcome c8() {
    Outcome o;
    const auto base = train::load_config(desk_config());
    std::vector<double> acc_hls, acc_naive, disp_hls, disp_naive;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (auto mode : {train::Mode::hls, train::Mode::bbn_naive}) {
            auto cfg = base;
            cfg.mode = mode;
            cfg.seed = seed;
            const auto res = train::train(cfg, train::prepare_data(cfg), {});
            const bool h = mode == train::Mode::hls;
            (h ? acc_hls : acc_naive).push_back(res.final_test.best_row().accuracy);
            (h ? disp_hls : disp_naive).push_back(train::tail_displacement(res.history, 0.2));
        }
        std::printf("    seed %llu  hls %.3f (tail disp %.4f)  bbn-naive %.3f (tail disp %.4f)\n",
                    static_cast<unsigned long long>(seed), acc_hls.back(), disp_hls.back(),
                    acc_naive.back(), disp_naive.back());
        std::fflush(stdout);
    }
    auto stats = [](const std::vector<double>& xs) {
        const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        return std::pair{m, std::sqrt(v / double(xs.size() - 1))};
    };
    const auto [mh, sh] = stats(acc_hls);
    const auto [mn, sn] = stats(acc_naive);
    int ordered = 0, smaller = 0;
    for (std::size_t i = 0; i < 5; ++i) {
        ordered += acc_hls[i] >= acc_naive[i];
        smaller += disp_hls[i] < disp_naive[i];
    }
    o.require(mh >= mn, "mean hls below bbn-naive");
    o.require(ordered >= 4, "accuracy ordering in " + std::to_string(ordered) + "/5 seeds");
    o.require(smaller == 5, "tail displacement smaller in " + std::to_string(smaller) + "/5 seeds");
    o.note("best-mu acc hls " + fmt("%.3f", mh) + " +- " + fmt("%.3f", sh) + ", bbn-naive " + fmt("%.3f", mn) +
           " +- " + fmt("%.3f", sn) + "; ordering " + std::to_string(ordered) + "/5; tail displacement smaller " +
           std::to_string(smaller) + "/5");
    return o;
}

// 9. Bilevel second-order check
Outcome c9() {
    Outcome o;
    Rng rng(9);
    double err = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double w = rng.normal(), a = rng.normal(), xi = 0.05 + 0.5 * rng.uniform();
        oracle::Toy toy(w, a);
        const auto g = train::arch_gradient(toy, train::ArchOrder::second, xi);
        err = std::max(err, std::abs(g.grads[0][0] - oracle::unrolled(w, a, xi)));
    }
    o.require(err < 1e-4, "second order vs unrolled " + fmt("%.2e", err));

    double gap = 0.0;
    {
        oracle::Toy f(0.4, 1.2), s(0.4, 1.2);
        gap = std::abs(train::arch_gradient(f, train::ArchOrder::first, 0.0).grads[0][0] -
                       train::arch_gradient(s, train::ArchOrder::second, 0.0).grads[0][0]);
    }
    bbn::BBNModel m1(desk_model(9)), m2(desk_model(9));
    Rng r2(99);
    const auto tr = random_batch(4, r2), va = random_batch(4, r2);
    const train::StepContext ctx{true, 0.6, bbn::LossForm::mixed_logits};
    train::BBNObjective o1(m1, tr, va, ctx), o2(m2, tr, va, ctx);
    const auto g1 = train::arch_gradient(o1, train::ArchOrder::first, 0.0);
    const auto g2 = train::arch_gradient(o2, train::ArchOrder::second, 0.0);
    for (std::size_t p = 0; p < g1.grads.size(); ++p)
        for (std::size_t i = 0; i < g1.grads[p].size(); ++i)
            gap = std::max(gap, std::abs(g1.grads[p][i] - g2.grads[p][i]));
    o.require(gap < 1e-10, "first vs second order at xi = 0: " + fmt("%.2e", gap));
    o.note("toy second order max error " + fmt("%.2e", err) + "; first == second at xi = 0 within " +
           fmt("%.1e", gap));
    return o;
}

// 10. Determinism and persistence
Outcome c10() {
    Outcome o;
    const auto cfg = train::load_config(desk_config());
    const auto data = train::prepare_data(cfg);
    TempDir a("a"), b("b"), c("c");
    auto into = [](const fs::path& p) {
        train::TrainOptions t;
        t.out_dir = p;
        return t;
    };
    train::train(cfg, data, into(a.path));
    train::train(cfg, train::prepare_data(cfg), into(b.path));
    const auto ha = slurp(a.path / "history.csv");
    o.require(!ha.empty() && ha == slurp(b.path / "history.csv"), "repeated run history.csv differs");

    const std::size_t stop_at = cfg.epochs / 2;
    auto stop = into(c.path);
    stop.stop_after_epoch = stop_at;
    train::train(cfg, data, stop);
    auto resume = into(c.path);
    resume.resume = true;
    train::train(cfg, data, resume);
    o.require(slurp(c.path / "history.csv") == ha, "resumed history.csv differs");
    o.require(slurp(c.path / "checkpoint.bin") == slurp(a.path / "checkpoint.bin"),
              "resumed checkpoint differs");
    o.note("history.csv " + std::to_string(ha.size()) + " bytes identical across runs and after resume at epoch " +
           std::to_string(stop_at));
    return o;
}

// 11. CIFAR-10 parser
Outcome c11() {
    Outcome o;
    Rng rng(11);
    data::LabeledImageSet s;
    s.channels = 3;
    s.height = s.width = 32;
    s.num_classes = 10;
    for (int i = 0; i < 50; ++i) {
        s.labels.push_back(int(rng.below(10)));
        for (int p = 0; p < 3072; ++p) s.pixels.push_back(double(rng.below(256)) / 255.0);
    }
    const auto bytes = data::write_cifar10_bin(s);
    const auto back = data::parse_cifar10_bin(bytes);
    o.require(back.labels == s.labels && back.pixels == s.pixels && data::write_cifar10_bin(back) == bytes,
              "round trip not bit-exact");

    auto rejected_at = [](const std::vector<std::uint8_t>& b, const std::string& where) {
        try {
            data::parse_cifar10_bin(b);
        } catch (const Error& e) {
            return e.kind() == ErrorKind::format && std::string(e.what()).find(where) != std::string::npos;
        }
        return false;
    };
    auto bad = bytes;
    bad[7 * data::kCifarRecordBytes] = 12;
    o.require(rejected_at(bad, "offset " + std::to_string(7 * data::kCifarRecordBytes)), "bad label offset");
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 3 * data::kCifarRecordBytes + 10);
    o.require(rejected_at(cut, "offset " + std::to_string(3 * data::kCifarRecordBytes)), "truncated record offset");
    o.note("50 records round trip bit-exactly; bad label and truncation rejected at their offsets");
    return o;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "gradient correctness", c1},      {2, "gradient decomposition", c2},
        {3, "schedule values", c3},           {4, "long-tail construction", c4},
        {5, "class-balanced sampler", c5},    {6, "genotype derivation", c6},
        {7, "smoke training", c7},            {8, "HLS ablation trend", c8},
        {9, "bilevel second order", c9},      {10, "determinism and resume", c10},
        {11, "CIFAR-10 parser", c11},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        failures += !out.pass;
        std::printf("%s  C%-2d %-24s %6.1fs  %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                    seconds_since(t0), out.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
