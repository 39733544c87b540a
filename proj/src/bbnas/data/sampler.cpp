#include "bbnas/data/sampler.hpp"

#include "bbnas/common/error.hpp"

namespace bbnas::data {

BatchSampler::BatchSampler(SamplerKind kind, std::size_t batch_size, std::uint64_t seed)
    : kind_(kind), batch_size_(batch_size), rng_(seed) {
    require(batch_size > 0, ErrorKind::invalid_argument, "sampler: batch size must be positive");
}

std::vector<std::size_t> BatchSampler::draw_indices(const LabeledImageSet& ds) {
    require(ds.size() > 0, ErrorKind::invalid_argument, "sampler: empty dataset");
    std::vector<std::size_t> out(batch_size_);
    if (kind_ == SamplerKind::instance) {
        for (auto& i : out) i = rng_.below(ds.size());
        return out;
    }
    if (cached_for_ != &ds || cached_size_ != ds.size()) {
        by_class_ = ds.class_indices();
        for (std::size_t c = 0; c < by_class_.size(); ++c)
            require(!by_class_[c].empty(), ErrorKind::invalid_argument,
                    "sampler: class " + std::to_string(c) + " is empty under class-balanced sampling");
        cached_for_ = &ds;
        cached_size_ = ds.size();
    }
    for (auto& i : out) {
        const auto& members = by_class_[rng_.below(by_class_.size())];
        i = members[rng_.below(members.size())];
    }
    return out;
}

Batch BatchSampler::sample(const LabeledImageSet& ds) {
    const auto idx = draw_indices(ds);
    return Batch{ds.gather(idx), ds.gather_labels(idx)};
}

ad::Tensor normalize(const ad::Tensor& batch, const Normalization& norm) {
    require(batch.rank() == 4 && batch.dim(1) == norm.mean.size(), ErrorKind::shape_mismatch,
            "normalize: batch " + ad::to_string(batch.shape()) + " vs " +
                std::to_string(norm.mean.size()) + " channel statistics");
    const std::size_t n = batch.dim(0), c = batch.dim(1), plane = batch.dim(2) * batch.dim(3);
    auto x = batch.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (i * c + ch) * plane;
            for (std::size_t k = 0; k < plane; ++k)
                out[base + k] = (x[base + k] - norm.mean[ch]) / norm.stddev[ch];
        }
    return ad::Tensor::from(batch.shape(), std::move(out));
}

ad::Tensor augment(const ad::Tensor& batch, const AugmentOptions& opts,
                   const Normalization& norm, Rng& rng) {
    require(batch.rank() == 4, ErrorKind::shape_mismatch, "augment: expected [N,C,H,W]");
    const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    const std::size_t crop = opts.crop == 0 ? h : opts.crop;
    const std::size_t ph = h + 2 * opts.pad, pw = w + 2 * opts.pad;
    require(crop <= ph && crop <= pw, ErrorKind::invalid_argument,
            "augment: crop " + std::to_string(crop) + " larger than padded image " +
                std::to_string(ph) + "x" + std::to_string(pw));
    auto x = batch.data();
    std::vector<double> out(n * c * crop * crop);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t oy = rng.below(ph - crop + 1);
        const std::size_t ox = rng.below(pw - crop + 1);
        const bool flip = opts.flip && rng.coin();
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = x.data() + (i * c + ch) * h * w;
            double* dst = out.data() + (i * c + ch) * crop * crop;
            for (std::size_t y = 0; y < crop; ++y)
                for (std::size_t xx = 0; xx < crop; ++xx) {
                    const std::size_t cx = flip ? crop - 1 - xx : xx;
                    const long sy = static_cast<long>(y + oy) - static_cast<long>(opts.pad);
                    const long sx = static_cast<long>(cx + ox) - static_cast<long>(opts.pad);
                    const double v = (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 &&
                                      sx < static_cast<long>(w))
                                         ? src[sy * static_cast<long>(w) + sx]
                                         : 0.0;
                    dst[y * crop + xx] = v;
                }
        }
    }
    return normalize(ad::Tensor::from({n, c, crop, crop}, std::move(out)), norm);
}

}  // namespace bbnas::data
