#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "bbnas/common/rng.hpp"
#include "bbnas/data/dataset.hpp"
#include "bbnas/data/longtail.hpp"

namespace bbnas::data {

enum class SamplerKind { instance, class_balanced };

struct Batch {
    ad::Tensor images;
    std::vector<int> labels;
};

// i.i.d. draws with replacement. Instance: uniform over samples.
// Class-balanced: class uniform over [0, C), then uniform within the class.
class BatchSampler {
public:
    BatchSampler(SamplerKind kind, std::size_t batch_size, std::uint64_t seed);

    SamplerKind kind() const { return kind_; }
    std::size_t batch_size() const { return batch_size_; }
    Rng& rng() { return rng_; }
    const Rng& rng() const { return rng_; }

    std::vector<std::size_t> draw_indices(const LabeledImageSet& ds);
    Batch sample(const LabeledImageSet& ds);

private:
    SamplerKind kind_;
    std::size_t batch_size_;
    Rng rng_;
    // cached per-class lists of the last dataset seen
    const LabeledImageSet* cached_for_ = nullptr;
    std::size_t cached_size_ = 0;
    std::vector<std::vector<std::size_t>> by_class_;
};

struct AugmentOptions {
    std::size_t pad = 4;
    std::size_t crop = 0;  // 0 means the input extent
    bool flip = true;
};

// Training path: zero-pad, random crop, random horizontal flip (p = 0.5),
// then per-channel normalization.
ad::Tensor augment(const ad::Tensor& batch, const AugmentOptions& opts,
                   const Normalization& norm, Rng& rng);

// Evaluation path: normalization only.
ad::Tensor normalize(const ad::Tensor& batch, const Normalization& norm);

}  // namespace bbnas::data
