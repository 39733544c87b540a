#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bbnas/autodiff/tensor.hpp"

namespace bbnas::data {

// Labeled images stored as one contiguous [N, C, H, W] float64 block.
struct LabeledImageSet {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t num_classes = 0;
    std::vector<double> pixels;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t image_numel() const { return channels * height * width; }
    std::span<const double> image(std::size_t i) const;

    // Per-class index lists; together they partition [0, size()).
    std::vector<std::vector<std::size_t>> class_indices() const;
    std::vector<std::size_t> class_counts() const;

    LabeledImageSet subset(std::span<const std::size_t> indices) const;
    ad::Tensor gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

    void validate() const;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr int kCifarClasses = 10;

// CIFAR-10 binary: per record one label byte, then 1024 R, 1024 G, 1024 B
// bytes (32x32 row-major each). Pixels scale to [0,1].
LabeledImageSet parse_cifar10_bin(std::span<const std::uint8_t> bytes);

// Inverse of the parser; pixels are quantized with round(x * 255).
std::vector<std::uint8_t> write_cifar10_bin(const LabeledImageSet& set);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct CifarSplits {
    LabeledImageSet train;
    LabeledImageSet test;
};

// data_batch_1..5.bin and test_batch.bin from a directory.
CifarSplits load_cifar10_dir(const std::filesystem::path& dir);

struct SyntheticSpec {
    std::size_t classes = 3;
    std::size_t per_class = 200;
    std::size_t size = 8;
    std::size_t channels = 1;
    double noise = 0.5;
    std::uint64_t seed = 0;
};

// Each class is a fixed smooth pattern (a function of classes, size and
// channels only) plus i.i.d. Gaussian noise drawn from the seed. Samples are
// ordered class-major.
LabeledImageSet make_synthetic(const SyntheticSpec& spec);

LabeledImageSet concat_sets(const LabeledImageSet& a, const LabeledImageSet& b);

}  // namespace bbnas::data
