#pragma once

#include "bbnas/data/dataset.hpp"
#include "bbnas/data/longtail.hpp"
#include "bbnas/train/config.hpp"

namespace bbnas::train {

// Everything a run consumes, built deterministically from the config.
struct PreparedData {
    data::LongTailSpec spec;
    data::LongTailResult longtail;  // retained pool
    data::TrainValSplit split;      // stratified split of the pool
    data::LabeledImageSet test;     // balanced held-out set
    data::Normalization norm;       // from the pool
};

PreparedData prepare_data(const TrainConfig& cfg);

}  // namespace bbnas::train
