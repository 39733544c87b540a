#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bbnas/data/dataset.hpp"

namespace bbnas::data {

struct LongTailSpec {
    double imbalance_ratio = 100.0;
    std::size_t base_count = 5000;  // n_0, kept by class 0
    std::size_t num_classes = 10;
};

// n_c = floor(n_0 * rho^(-c/(C-1)))
std::vector<std::size_t> longtail_counts(const LongTailSpec& spec);

struct LongTailResult {
    LabeledImageSet data;
    // Original indices kept per class, in retention order.
    std::vector<std::vector<std::size_t>> retained;
};

// Each class keeps the first n_c of its samples after a seeded shuffle.
LongTailResult build_longtail(const LabeledImageSet& ds, const LongTailSpec& spec,
                              std::uint64_t seed);

// {"base_count":..,"classes":{"0":[...],..},"counts":[...],"imbalance_ratio":..,"seed":..}
std::string longtail_manifest_json(const LongTailResult& result, const LongTailSpec& spec,
                                   std::uint64_t seed);

struct TrainValSplit {
    LabeledImageSet train;
    LabeledImageSet val;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
};

// Stratified: each class contributes floor(n * (1 - train_fraction)) samples
// to val (at least one), the rest to train.
TrainValSplit split_train_val(const LabeledImageSet& ds, double train_fraction,
                              std::uint64_t seed);

struct Normalization {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Per-channel statistics over every pixel of the set.
Normalization compute_normalization(const LabeledImageSet& ds);

}  // namespace bbnas::data
