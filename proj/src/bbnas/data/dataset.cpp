#include "bbnas/data/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"

namespace bbnas::data {

std::span<const double> LabeledImageSet::image(std::size_t i) const {
    return std::span<const double>(pixels).subspan(i * image_numel(), image_numel());
}

std::vector<std::vector<std::size_t>> LabeledImageSet::class_indices() const {
    std::vector<std::vector<std::size_t>> out(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(labels[i])].push_back(i);
    return out;
}

std::vector<std::size_t> LabeledImageSet::class_counts() const {
    std::vector<std::size_t> out(num_classes, 0);
    for (int y : labels) ++out[static_cast<std::size_t>(y)];
    return out;
}

LabeledImageSet LabeledImageSet::subset(std::span<const std::size_t> indices) const {
    LabeledImageSet s;
    s.channels = channels;
    s.height = height;
    s.width = width;
    s.num_classes = num_classes;
    s.pixels.reserve(indices.size() * image_numel());
    for (std::size_t i : indices) {
        require(i < size(), ErrorKind::invalid_argument,
                "subset: index " + std::to_string(i) + " out of range");
        auto img = image(i);
        s.pixels.insert(s.pixels.end(), img.begin(), img.end());
        s.labels.push_back(labels[i]);
    }
    return s;
}

ad::Tensor LabeledImageSet::gather(std::span<const std::size_t> indices) const {
    std::vector<double> v;
    v.reserve(indices.size() * image_numel());
    for (std::size_t i : indices) {
        auto img = image(i);
        v.insert(v.end(), img.begin(), img.end());
    }
    return ad::Tensor::from({indices.size(), channels, height, width}, std::move(v));
}

std::vector<int> LabeledImageSet::gather_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels[i]);
    return out;
}

void LabeledImageSet::validate() const {
    require(pixels.size() == labels.size() * image_numel(), ErrorKind::shape_mismatch,
            "image set: pixel buffer does not match label count");
    for (std::size_t i = 0; i < labels.size(); ++i)
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < num_classes,
                ErrorKind::invalid_argument,
                "image set: label " + std::to_string(labels[i]) + " at " + std::to_string(i) +
                    " outside [0," + std::to_string(num_classes) + ")");
}

LabeledImageSet parse_cifar10_bin(std::span<const std::uint8_t> bytes) {
    require(bytes.size() % kCifarRecordBytes == 0, ErrorKind::format,
            "cifar10: length " + std::to_string(bytes.size()) + " is not a multiple of 3073; " +
                "truncated record at offset " +
                std::to_string(bytes.size() - bytes.size() % kCifarRecordBytes));
    LabeledImageSet s;
    s.channels = 3;
    s.height = 32;
    s.width = 32;
    s.num_classes = kCifarClasses;
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    s.labels.reserve(n);
    s.pixels.reserve(n * 3072);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t off = r * kCifarRecordBytes;
        const std::uint8_t label = bytes[off];
        require(label < kCifarClasses, ErrorKind::format,
                "cifar10: record " + std::to_string(r) + " (offset " + std::to_string(off) +
                    "): label byte " + std::to_string(label) + " > 9");
        s.labels.push_back(label);
        for (std::size_t k = 1; k < kCifarRecordBytes; ++k)
            s.pixels.push_back(static_cast<double>(bytes[off + k]) / 255.0);
    }
    return s;
}

std::vector<std::uint8_t> write_cifar10_bin(const LabeledImageSet& set) {
    require(set.channels == 3 && set.height == 32 && set.width == 32, ErrorKind::shape_mismatch,
            "cifar10 writer: images must be 3x32x32");
    set.validate();
    std::vector<std::uint8_t> out;
    out.reserve(set.size() * kCifarRecordBytes);
    for (std::size_t i = 0; i < set.size(); ++i) {
        require(set.labels[i] < kCifarClasses, ErrorKind::invalid_argument,
                "cifar10 writer: label out of range");
        out.push_back(static_cast<std::uint8_t>(set.labels[i]));
        for (double v : set.image(i)) {
            const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
            out.push_back(static_cast<std::uint8_t>(q));
        }
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

LabeledImageSet concat_sets(const LabeledImageSet& a, const LabeledImageSet& b) {
    if (a.size() == 0) return b;
    require(a.channels == b.channels && a.height == b.height && a.width == b.width &&
                a.num_classes == b.num_classes,
            ErrorKind::shape_mismatch, "concat_sets: incompatible image sets");
    LabeledImageSet s = a;
    s.pixels.insert(s.pixels.end(), b.pixels.begin(), b.pixels.end());
    s.labels.insert(s.labels.end(), b.labels.begin(), b.labels.end());
    return s;
}

CifarSplits load_cifar10_dir(const std::filesystem::path& dir) {
    CifarSplits out;
    for (int i = 1; i <= 5; ++i) {
        auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
        auto set = parse_cifar10_bin(read_file_bytes(p));
        out.train = concat_sets(out.train, set);
    }
    out.test = parse_cifar10_bin(read_file_bytes(dir / "test_batch.bin"));
    return out;
}

LabeledImageSet make_synthetic(const SyntheticSpec& spec) {
    require(spec.classes >= 2, ErrorKind::invalid_argument, "synthetic: need at least 2 classes");
    require(spec.size >= 2 && spec.channels >= 1, ErrorKind::invalid_argument,
            "synthetic: size must be >= 2 and channels >= 1");
    require(spec.noise >= 0.0, ErrorKind::invalid_argument, "synthetic: noise must be >= 0");
    const std::size_t H = spec.size, plane = H * H, img = spec.channels * plane;

    // Patterns depend only on the geometry so that sets drawn with different
    // seeds share their classes.
    Rng pattern_rng(derive_seed(0x5eedULL, spec.classes * 1000003ULL + H * 101ULL + spec.channels));
    std::vector<double> patterns(spec.classes * img);
    for (std::size_t c = 0; c < spec.classes; ++c)
        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
            double* p = patterns.data() + c * img + ch * plane;
            for (int wave = 0; wave < 3; ++wave) {
                const double fx = static_cast<double>(pattern_rng.below(3));
                const double fy = static_cast<double>(pattern_rng.below(3));
                const double phase = 2.0 * std::numbers::pi * pattern_rng.uniform();
                for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t x = 0; x < H; ++x)
                        p[y * H + x] += std::cos(2.0 * std::numbers::pi *
                                                     (fx * static_cast<double>(x) + fy * static_cast<double>(y)) /
                                                     static_cast<double>(H) +
                                                 phase);
            }
            double m = 0.0, s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) m += p[i];
            m /= static_cast<double>(plane);
            for (std::size_t i = 0; i < plane; ++i) s += (p[i] - m) * (p[i] - m);
            s = std::sqrt(s / static_cast<double>(plane));
            for (std::size_t i = 0; i < plane; ++i) p[i] = s > 0 ? (p[i] - m) / s : 0.0;
        }

    LabeledImageSet out;
    out.channels = spec.channels;
    out.height = H;
    out.width = H;
    out.num_classes = spec.classes;
    out.pixels.reserve(spec.classes * spec.per_class * img);
    Rng noise_rng(spec.seed);
    for (std::size_t c = 0; c < spec.classes; ++c)
        for (std::size_t n = 0; n < spec.per_class; ++n) {
            for (std::size_t i = 0; i < img; ++i)
                out.pixels.push_back(patterns[c * img + i] + spec.noise * noise_rng.normal());
            out.labels.push_back(static_cast<int>(c));
        }
    return out;
}

}  // namespace bbnas::data
