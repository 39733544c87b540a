#include "bbnas/train/evaluate.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "bbnas/common/error.hpp"
#include "bbnas/data/sampler.hpp"

namespace bbnas::train {

HeadOutputs collect_heads(const bbn::BBNModel& model, const data::LabeledImageSet& set,
                          const data::Normalization& norm, std::size_t chunk) {
    require(set.size() > 0, ErrorKind::invalid_argument, "evaluate: empty set");
    ad::NoGradGuard guard;
    HeadOutputs out;
    out.num_classes = model.config().num_classes;
    out.labels = set.labels;
    out.ins.reserve(set.size() * out.num_classes);
    out.cls.reserve(set.size() * out.num_classes);
    std::vector<std::size_t> idx;
    for (std::size_t begin = 0; begin < set.size(); begin += chunk) {
        const std::size_t end = std::min(set.size(), begin + chunk);
        idx.resize(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        const auto x = data::normalize(set.gather(idx), norm);
        const auto h = model.heads(x);
        out.ins.insert(out.ins.end(), h.ins.data().begin(), h.ins.data().end());
        out.cls.insert(out.cls.end(), h.cls.data().begin(), h.cls.data().end());
    }
    return out;
}

namespace {

MuRow score(const HeadOutputs& out, double mu_ins) {
    const std::size_t C = out.num_classes, N = out.labels.size();
    MuRow row;
    row.mu = mu_ins;
    std::vector<std::size_t> hits(C, 0), totals(C, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < N; ++i) {
        int best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < C; ++c) {
            const double z = mu_ins * out.ins[i * C + c] + (1.0 - mu_ins) * out.cls[i * C + c];
            if (z > best_v) {
                best_v = z;
                best = static_cast<int>(c);
            }
        }
        const auto y = static_cast<std::size_t>(out.labels[i]);
        ++totals[y];
        if (best == out.labels[i]) {
            ++hits[y];
            ++correct;
        }
    }
    row.accuracy = static_cast<double>(correct) / static_cast<double>(N);
    row.per_class.resize(C);
    for (std::size_t c = 0; c < C; ++c)
        row.per_class[c] = totals[c] ? static_cast<double>(hits[c]) / static_cast<double>(totals[c])
                                     : std::numeric_limits<double>::quiet_NaN();
    return row;
}

}  // namespace

const MuRow* Evaluation::at(double mu) const {
    for (const auto& r : rows)
        if (r.mu == mu) return &r;
    return nullptr;
}

Evaluation evaluate_outputs(const HeadOutputs& out, std::span<const double> grid) {
    require(!grid.empty(), ErrorKind::invalid_argument, "evaluate: empty mu grid");
    Evaluation ev;
    for (double mu : grid) {
        bbn::check_mu(mu);
        ev.rows.push_back(score(out, mu));
        if (ev.rows.back().accuracy > ev.rows[ev.best].accuracy) ev.best = ev.rows.size() - 1;
    }
    return ev;
}

Evaluation evaluate(const bbn::BBNModel& model, const data::LabeledImageSet& set,
                    const data::Normalization& norm, std::span<const double> grid) {
    return evaluate_outputs(collect_heads(model, set, norm), grid);
}

MuRow evaluate_head(const HeadOutputs& out, HeadChoice head) {
    HeadOutputs single;
    single.num_classes = out.num_classes;
    single.labels = out.labels;
    single.ins = head == HeadChoice::ins ? out.ins : out.cls;
    single.cls = single.ins;
    MuRow r = score(single, 1.0);
    r.mu = head == HeadChoice::ins ? 1.0 : 0.0;
    return r;
}

double mixed_loss(const HeadOutputs& out, double mu) {
    bbn::check_mu(mu);
    const std::size_t C = out.num_classes, N = out.labels.size();
    double total = 0.0;
    std::vector<double> z(C);
    for (std::size_t i = 0; i < N; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < C; ++c) {
            z[c] = mu * out.ins[i * C + c] + (1.0 - mu) * out.cls[i * C + c];
            m = std::max(m, z[c]);
        }
        double s = 0.0;
        for (double v : z) s += std::exp(v - m);
        total += m + std::log(s) - z[static_cast<std::size_t>(out.labels[i])];
    }
    return total / static_cast<double>(N);
}

}  // namespace bbnas::train
