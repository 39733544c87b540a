#include "bbnas/data/longtail.hpp"

#include <algorithm>
#include <cmath>

#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"
#include "json.hpp"

namespace bbnas::data {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Guards floor() against values computed a few ulps below an integer.
std::size_t safe_floor(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }

}  // namespace

std::vector<std::size_t> longtail_counts(const LongTailSpec& spec) {
    require(spec.imbalance_ratio >= 1.0, ErrorKind::invalid_argument,
            "long tail: imbalance ratio must be >= 1");
    require(spec.num_classes >= 1, ErrorKind::invalid_argument, "long tail: need classes");
    std::vector<std::size_t> counts(spec.num_classes, spec.base_count);
    if (spec.num_classes == 1) return counts;
    const double denom = static_cast<double>(spec.num_classes - 1);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        const double f = std::pow(spec.imbalance_ratio, -static_cast<double>(c) / denom);
        counts[c] = safe_floor(static_cast<double>(spec.base_count) * f);
    }
    return counts;
}

LongTailResult build_longtail(const LabeledImageSet& ds, const LongTailSpec& spec,
                              std::uint64_t seed) {
    require(spec.num_classes == ds.num_classes, ErrorKind::invalid_argument,
            "long tail: spec has " + std::to_string(spec.num_classes) + " classes, data has " +
                std::to_string(ds.num_classes));
    const auto counts = longtail_counts(spec);
    auto by_class = ds.class_indices();
    Rng rng(seed);
    LongTailResult res;
    res.retained.resize(ds.num_classes);
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
        require(by_class[c].size() >= counts[c], ErrorKind::invalid_argument,
                "long tail: class " + std::to_string(c) + " has " +
                    std::to_string(by_class[c].size()) + " samples, needs " +
                    std::to_string(counts[c]));
        shuffle(by_class[c], rng);
        res.retained[c].assign(by_class[c].begin(), by_class[c].begin() + static_cast<long>(counts[c]));
        keep.insert(keep.end(), res.retained[c].begin(), res.retained[c].end());
    }
    std::sort(keep.begin(), keep.end());
    res.data = ds.subset(keep);
    return res;
}

std::string longtail_manifest_json(const LongTailResult& result, const LongTailSpec& spec,
                                   std::uint64_t seed) {
    nlohmann::json j;
    j["imbalance_ratio"] = spec.imbalance_ratio;
    j["base_count"] = spec.base_count;
    j["seed"] = seed;
    nlohmann::json counts = nlohmann::json::array();
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t c = 0; c < result.retained.size(); ++c) {
        counts.push_back(result.retained[c].size());
        classes[std::to_string(c)] = result.retained[c];
    }
    j["counts"] = counts;
    j["classes"] = classes;
    return j.dump() + "\n";
}

TrainValSplit split_train_val(const LabeledImageSet& ds, double train_fraction,
                              std::uint64_t seed) {
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::invalid_argument,
            "split: fraction must lie in (0,1)");
    auto by_class = ds.class_indices();
    Rng rng(seed);
    TrainValSplit out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        require(idx.size() >= 2, ErrorKind::invalid_argument,
                "split: class " + std::to_string(c) + " has fewer than 2 samples");
        shuffle(idx, rng);
        std::size_t n_val = safe_floor(static_cast<double>(idx.size()) * (1.0 - train_fraction));
        n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
        out.val_indices.insert(out.val_indices.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
        out.train_indices.insert(out.train_indices.end(), idx.begin() + static_cast<long>(n_val), idx.end());
    }
    std::sort(out.train_indices.begin(), out.train_indices.end());
    std::sort(out.val_indices.begin(), out.val_indices.end());
    out.train = ds.subset(out.train_indices);
    out.val = ds.subset(out.val_indices);
    return out;
}

Normalization compute_normalization(const LabeledImageSet& ds) {
    require(ds.size() > 0, ErrorKind::invalid_argument, "normalization: empty set");
    Normalization n;
    const std::size_t plane = ds.height * ds.width;
    n.mean.assign(ds.channels, 0.0);
    n.stddev.assign(ds.channels, 0.0);
    for (std::size_t ch = 0; ch < ds.channels; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double* p = ds.pixels.data() + i * ds.image_numel() + ch * plane;
            for (std::size_t k = 0; k < plane; ++k) s += p[k];
        }
        const double m = s / static_cast<double>(ds.size() * plane);
        double v = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double* p = ds.pixels.data() + i * ds.image_numel() + ch * plane;
            for (std::size_t k = 0; k < plane; ++k) v += (p[k] - m) * (p[k] - m);
        }
        n.mean[ch] = m;
        n.stddev[ch] = std::sqrt(v / static_cast<double>(ds.size() * plane));
        if (n.stddev[ch] <= 0.0) n.stddev[ch] = 1.0;
    }
    return n;
}

}  // namespace bbnas::data
