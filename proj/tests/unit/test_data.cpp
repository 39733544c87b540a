#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"
#include "bbnas/data/dataset.hpp"
#include "bbnas/data/longtail.hpp"
#include "bbnas/data/sampler.hpp"
#include "support/stats.hpp"

using namespace bbnas;
using namespace bbnas::data;

namespace {

LabeledImageSet tiny_set(std::vector<std::size_t> counts, std::size_t size = 2) {
    LabeledImageSet s;
    s.channels = 1;
    s.height = s.width = size;
    s.num_classes = counts.size();
    for (std::size_t c = 0; c < counts.size(); ++c)
        for (std::size_t i = 0; i < counts[c]; ++i) {
            s.labels.push_back(int(c));
            for (std::size_t p = 0; p < size * size; ++p)
                s.pixels.push_back(double(s.labels.size()) / 1000.0);
        }
    return s;
}

LabeledImageSet random_cifar(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledImageSet s;
    s.channels = 3;
    s.height = s.width = 32;
    s.num_classes = 10;
    for (std::size_t i = 0; i < n; ++i) {
        s.labels.push_back(int(rng.below(10)));
        for (std::size_t p = 0; p < 3072; ++p) s.pixels.push_back(double(rng.below(256)) / 255.0);
    }
    return s;
}

}  // namespace

TEST_CASE("cifar record of zeros") {
    std::vector<std::uint8_t> bytes(kCifarRecordBytes, 0);
    auto s = parse_cifar10_bin(bytes);
    REQUIRE(s.size() == 1);
    CHECK(s.labels[0] == 0);
    CHECK(std::all_of(s.pixels.begin(), s.pixels.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("cifar known bytes land on the right planes") {
    std::vector<std::uint8_t> bytes(2 * kCifarRecordBytes, 0);
    bytes[0] = 3;
    bytes[1 + 0] = 255;                       // R (0,0)
    bytes[1 + 1024 + 31] = 51;                // G (0,31)
    bytes[1 + 2048 + 32 * 5 + 7] = 102;       // B (5,7)
    bytes[kCifarRecordBytes] = 9;
    bytes[kCifarRecordBytes + 1 + 1023] = 17; // R (31,31) of record 1
    auto s = parse_cifar10_bin(bytes);
    REQUIRE(s.size() == 2);
    CHECK(s.labels == std::vector<int>{3, 9});
    CHECK(s.image(0)[0] == 1.0);
    CHECK(s.image(0)[1024 + 31] == 51.0 / 255.0);
    CHECK(s.image(0)[2048 + 5 * 32 + 7] == 102.0 / 255.0);
    CHECK(s.image(1)[1023] == 17.0 / 255.0);
    CHECK(write_cifar10_bin(s) == bytes);
}

TEST_CASE("cifar writer and parser round trip bit-exactly") {
    const auto s = random_cifar(20, 1);
    const auto bytes = write_cifar10_bin(s);
    CHECK(bytes.size() == 20 * kCifarRecordBytes);
    const auto back = parse_cifar10_bin(bytes);
    CHECK(back.labels == s.labels);
    CHECK(back.pixels == s.pixels);
    CHECK(write_cifar10_bin(back) == bytes);
}

TEST_CASE("cifar malformed input is rejected with its offset") {
    std::vector<std::uint8_t> bytes(3 * kCifarRecordBytes, 0);
    bytes[2 * kCifarRecordBytes] = 10;
    try {
        parse_cifar10_bin(bytes);
        FAIL("accepted label 10");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::format);
        CHECK(std::string(e.what()).find("record 2") != std::string::npos);
        CHECK(std::string(e.what()).find("offset 6146") != std::string::npos);
    }
    std::vector<std::uint8_t> first(kCifarRecordBytes, 0);
    first[0] = 10;
    CHECK_THROWS_WITH_AS(parse_cifar10_bin(first), doctest::Contains("record 0"), Error);
    std::vector<std::uint8_t> truncated(kCifarRecordBytes + 100, 0);
    CHECK_THROWS_WITH_AS(parse_cifar10_bin(truncated), doctest::Contains("offset 3073"), Error);
}

TEST_CASE("synthetic data is deterministic") {
    SyntheticSpec spec{3, 20, 8, 1, 0.5, 7};
    const auto a = make_synthetic(spec), b = make_synthetic(spec);
    CHECK(a.pixels == b.pixels);
    CHECK(a.labels == b.labels);
    spec.seed = 8;
    CHECK(make_synthetic(spec).pixels != a.pixels);
}

TEST_CASE("synthetic without noise repeats one image per class") {
    const auto s = make_synthetic({3, 5, 8, 2, 0.0, 1});
    const auto idx = s.class_indices();
    for (const auto& cls : idx)
        for (auto i : cls) CHECK(std::equal(s.image(i).begin(), s.image(i).end(), s.image(cls[0]).begin()));
    CHECK_FALSE(std::equal(s.image(idx[0][0]).begin(), s.image(idx[0][0]).end(),
                           s.image(idx[1][0]).begin()));
}

TEST_CASE("synthetic classes are separable by nearest neighbours") {
    const auto s = make_synthetic({3, 200, 8, 1, 0.5, 3});
    const std::size_t n = s.size(), d = s.image_numel();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> dist;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double t = s.image(i)[k] - s.image(j)[k];
                acc += t * t;
            }
            dist.emplace_back(acc, s.labels[j]);
        }
        std::partial_sort(dist.begin(), dist.begin() + 5, dist.end());
        std::vector<int> votes(3, 0);
        for (int k = 0; k < 5; ++k) ++votes[dist[k].second];
        correct += std::max_element(votes.begin(), votes.end()) - votes.begin() == s.labels[i];
    }
    CHECK(double(correct) / n > 0.95);
}

TEST_CASE("long tail counts") {
    const auto c = longtail_counts({100.0, 5000, 10});
    REQUIRE(c.size() == 10);
    for (std::size_t k = 0; k < 10; ++k)
        CHECK(c[k] == std::size_t(std::floor(5000.0 * std::pow(100.0, -double(k) / 9.0))));
    CHECK(c[0] == 5000);
    CHECK(c[1] == 2997);
    CHECK(c[9] == 50);
    CHECK(std::is_sorted(c.rbegin(), c.rend()));
    const auto flat = longtail_counts({1.0, 70, 4});
    CHECK(flat == std::vector<std::size_t>{70, 70, 70, 70});
}

TEST_CASE("long tail ratio stays within flooring slack") {
    for (double rho : {2.0, 10.0, 37.5, 100.0, 200.0})
        for (std::size_t n0 : {100u, 1000u, 5000u})
            for (std::size_t C : {3u, 10u}) {
                const auto c = longtail_counts({rho, n0, C});
                const double last = double(c.back());
                if (last < 3) continue;
                const double r = double(c.front()) / last;
                CHECK(r >= rho * (1 - 2 / last));
                CHECK(r <= rho * (1 + 2 / last));
                for (std::size_t k = 1; k < C; ++k) CHECK(c[k] <= c[k - 1]);
            }
}

TEST_CASE("long tail construction and manifest") {
    const auto ds = make_synthetic({10, 5000, 2, 1, 0.5, 0});
    const LongTailSpec spec{100.0, 5000, 10};
    const auto a = build_longtail(ds, spec, 4);
    CHECK(a.data.class_counts() == longtail_counts(spec));
    const auto ma = longtail_manifest_json(a, spec, 4);
    CHECK(longtail_manifest_json(build_longtail(ds, spec, 4), spec, 4) == ma);
    CHECK(longtail_manifest_json(build_longtail(ds, spec, 5), spec, 5) != ma);
    // retained indices are real members of their class, without repeats
    for (std::size_t c = 0; c < 10; ++c) {
        std::set<std::size_t> uniq(a.retained[c].begin(), a.retained[c].end());
        CHECK(uniq.size() == a.retained[c].size());
        for (auto i : a.retained[c]) CHECK(ds.labels[i] == int(c));
    }
}

TEST_CASE("long tail with too few samples names the class") {
    const auto ds = tiny_set({10, 3, 10});
    CHECK_THROWS_WITH_AS(build_longtail(ds, {2.0, 10, 3}, 0), doctest::Contains("class 1"), Error);
}

TEST_CASE("stratified split") {
    const auto ds = tiny_set({50, 17, 5, 2});
    const auto sp = split_train_val(ds, 0.8, 1);
    CHECK(sp.val.class_counts() == std::vector<std::size_t>{10, 3, 1, 1});
    CHECK(sp.train.class_counts() == std::vector<std::size_t>{40, 14, 4, 1});
    std::vector<std::size_t> all = sp.train_indices;
    all.insert(all.end(), sp.val_indices.begin(), sp.val_indices.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(ds.size());
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    CHECK_THROWS_AS(split_train_val(tiny_set({5, 1}), 0.8, 1), Error);
    CHECK_THROWS_AS(split_train_val(ds, 1.0, 1), Error);
}

TEST_CASE("val share within one sample of 20 percent on the 100x profile") {
    const auto counts = longtail_counts({100.0, 5000, 10});
    const auto sp = split_train_val(tiny_set(counts, 2), 0.8, 3);
    const auto v = sp.val.class_counts();
    for (std::size_t c = 0; c < 10; ++c) CHECK(std::abs(double(v[c]) - 0.2 * counts[c]) <= 1.0);
}

TEST_CASE("class balanced sampler is uniform over classes") {
    const auto counts = longtail_counts({100.0, 500, 10});
    const auto ds = tiny_set(counts);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        BatchSampler s(SamplerKind::class_balanced, 100, seed);
        std::vector<double> per_class(10, 0.0);
        std::vector<std::vector<double>> within(10);
        const auto idx = ds.class_indices();
        for (std::size_t c = 0; c < 10; ++c) within[c].assign(counts[c], 0.0);
        std::vector<std::size_t> start(10, 0);
        for (std::size_t c = 1; c < 10; ++c) start[c] = start[c - 1] + counts[c - 1];
        for (int b = 0; b < 1000; ++b)
            for (auto i : s.draw_indices(ds)) {
                const int y = ds.labels[i];
                per_class[y] += 1;
                within[y][i - start[y]] += 1;
            }
        CHECK(oracle::chi_square_p(per_class, std::vector<double>(10, 10000.0)) > 0.01);
        for (std::size_t c = 0; c < 10; ++c) {
            const double e = per_class[c] / counts[c];
            CHECK(oracle::chi_square_p(within[c], std::vector<double>(counts[c], e)) > 0.01);
        }
    }
}

TEST_CASE("instance sampler follows the retained counts") {
    const auto counts = longtail_counts({100.0, 500, 10});
    const auto ds = tiny_set(counts);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    BatchSampler s(SamplerKind::instance, 100, 9);
    std::vector<double> per_class(10, 0.0);
    for (int b = 0; b < 1000; ++b)
        for (auto i : s.draw_indices(ds)) per_class[ds.labels[i]] += 1;
    std::vector<double> expect;
    for (auto c : counts) expect.push_back(1e5 * c / total);
    CHECK(oracle::chi_square_p(per_class, expect) > 0.01);
    CHECK(per_class[0] / 1e5 == doctest::Approx(500 / total).epsilon(0.05));
}

TEST_CASE("samplers on a single class and on an empty class") {
    const auto one = tiny_set({7});
    for (auto kind : {SamplerKind::instance, SamplerKind::class_balanced}) {
        BatchSampler s(kind, 16, 1);
        const auto b = s.sample(one);
        CHECK(b.labels == std::vector<int>(16, 0));
        CHECK(b.images.shape() == ad::Shape{16, 1, 2, 2});
    }
    BatchSampler cb(SamplerKind::class_balanced, 4, 1);
    CHECK_THROWS_AS(cb.draw_indices(tiny_set({3, 0, 2})), Error);
}

TEST_CASE("sampler is reproducible per seed") {
    const auto ds = tiny_set({9, 4, 2});
    BatchSampler a(SamplerKind::class_balanced, 32, 5), b(SamplerKind::class_balanced, 32, 5);
    for (int i = 0; i < 5; ++i) CHECK(a.draw_indices(ds) == b.draw_indices(ds));
}

TEST_CASE("augmentation") {
    const Normalization norm{{0.5}, {0.25}};
    Rng rng(1);
    auto x = ad::Tensor::from({1, 1, 2, 2}, {0.0, 0.25, 0.5, 1.0});
    SUBCASE("no padding and no flip is normalization only") {
        auto y = augment(x, {0, 0, false}, norm, rng);
        const std::vector<double> expect{-2.0, -1.0, 0.0, 2.0};
        for (std::size_t i = 0; i < 4; ++i) CHECK(y.at(i) == expect[i]);
        auto z = normalize(x, norm);
        for (std::size_t i = 0; i < 4; ++i) CHECK(z.at(i) == expect[i]);
    }
    SUBCASE("constant image without padding stays constant") {
        auto c = ad::Tensor::full({3, 1, 4, 4}, 0.75);
        for (int t = 0; t < 10; ++t) {
            auto y = augment(c, {0, 0, true}, norm, rng);
            for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.at(i) == 1.0);
        }
    }
    SUBCASE("padded crops are shifted copies with zero fill") {
        auto big = ad::Tensor::full({1, 1, 4, 4}, 1.0);
        auto y = augment(big, {1, 0, false}, {{0.0}, {1.0}}, rng);
        double s = 0.0;
        for (double v : y.data()) s += v;
        CHECK((s == 16.0 || s == 12.0 || s == 9.0));
    }
    SUBCASE("seeded runs repeat") {
        auto b = ad::Tensor::from({2, 1, 2, 2}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
        Rng r1(3), r2(3);
        auto y1 = augment(b, {4, 0, true}, norm, r1);
        auto y2 = augment(b, {4, 0, true}, norm, r2);
        CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
    }
    SUBCASE("crop larger than the padded image") {
        CHECK_THROWS_AS(augment(x, {0, 5, false}, norm, rng), Error);
    }
}

TEST_CASE("normalization statistics") {
    LabeledImageSet s;
    s.channels = 2;
    s.height = s.width = 1;
    s.num_classes = 1;
    s.pixels = {0.0, 1.0, 2.0, 1.0};
    s.labels = {0, 0};
    const auto n = compute_normalization(s);
    CHECK(n.mean == std::vector<double>{1.0, 1.0});
    CHECK(n.stddev[0] == doctest::Approx(1.0));
    CHECK(n.stddev[1] > 0.0);  // zero variance is floored
}
